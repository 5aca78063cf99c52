#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "codeepneat/distrib.hpp"
#include "codeepneat/run.hpp"

namespace fs = std::filesystem;
using namespace codeepneat;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendFlags {
  std::size_t workers = 0;
  std::string listen;
};

// Owns whatever the chosen backend needs. Members are declared so that the
// pool and listener go away before the master.
struct Backend {
  std::unique_ptr<Master> master;
  std::unique_ptr<TcpListener> listener;
  std::unique_ptr<LocalWorkerPool> pool;
  std::unique_ptr<EvaluationBackend> backend;

  ~Backend() {
    backend.reset();
    pool.reset();
    if (master) master->shutdown_workers();
    listener.reset();
  }
};

std::unique_ptr<Backend> make_backend(const EvolutionConfig& config, const BackendFlags& flags) {
  auto b = std::make_unique<Backend>();
  auto evaluator = evaluator_for(config);
  if (flags.workers == 0 && flags.listen.empty()) {
    b->backend = std::make_unique<InProcessBackend>(evaluator, config.co.fitness_floor);
    return b;
  }
  MasterOptions opts;
  opts.max_retries = config.distributed.max_retries;
  opts.min_timeout = config.distributed.min_timeout;
  opts.timeout_factor = config.distributed.timeout_factor;
  opts.heartbeat_timeout = config.distributed.heartbeat_timeout;
  opts.registration_wait = config.distributed.registration_wait;
  opts.fitness_floor = config.co.fitness_floor;
  b->master = std::make_unique<Master>(opts);
  if (!flags.listen.empty()) {
    const auto [host, port] = parse_endpoint(flags.listen);
    b->listener = std::make_unique<TcpListener>(*b->master, host, port);
    spdlog::info("listening for workers on {}:{}", host, b->listener->port());
  }
  if (flags.workers > 0) b->pool = std::make_unique<LocalWorkerPool>(*b->master, flags.workers, evaluator);
  b->backend = std::make_unique<DistributedBackend>(*b->master, evaluator);
  return b;
}

// An empty CODEEPNEAT_OUT_DIR counts as unset.
std::string env_output_dir() {
  const char* env = std::getenv("CODEEPNEAT_OUT_DIR");
  return env == nullptr ? std::string() : std::string(env);
}

fs::path output_dir(const std::string& flag, const std::string& configured) {
  if (!flag.empty()) return flag;
  if (const auto env = env_output_dir(); !env.empty()) return env;
  return configured;
}

// DIR/checkpoints/gen_N.json and DIR/checkpoint.json both resolve to DIR.
fs::path run_dir_of(const fs::path& checkpoint) {
  auto parent = fs::absolute(checkpoint).parent_path();
  if (parent.filename() == "checkpoints") return parent.parent_path();
  return parent;
}

void print_summary(const RunState& s, const fs::path& dir) {
  std::cout << "generations: " << s.generation << "\n";
  if (!s.log.empty()) {
    const auto& g = s.log.back();
    std::cout << "last generation best: " << g.best_fitness << " mean: " << g.mean_fitness << "\n";
  }
  if (s.best)
    std::cout << "best fitness: " << s.best->fitness << " (generation " << s.best->generation
              << ", network " << s.best->network.provenance.network_id << ")\n";
  std::cout << "output: " << dir.string() << "\n";
}

int cmd_run(const std::string& config_path, const std::string& preset, std::optional<std::uint64_t> seed,
            std::optional<int> generations, const std::string& output, const BackendFlags& flags) {
  json tree = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("", "cannot open config file '" + config_path + "'");
    tree = json::parse(in, nullptr, false, true);
    if (tree.is_discarded()) throw ConfigError("", "'" + config_path + "' is not valid JSON");
  }
  if (!preset.empty()) tree["preset"] = preset;
  if (seed) tree["seed"] = *seed;
  if (generations) tree["generations"] = *generations;
  auto config = parse_config(tree);
  config.output_dir = output_dir(output, config.output_dir).string();

  RunWriter writer(config.output_dir);
  auto state = start_run(config);
  auto backend = make_backend(config, flags);
  run_until(state, *backend->backend, config.generations, writer);
  print_summary(state, writer.dir());
  return kOk;
}

int cmd_resume(const std::string& checkpoint, std::optional<int> generations, const std::string& output,
               const BackendFlags& flags) {
  auto state = load_checkpoint_file(checkpoint);
  const fs::path dir = output_dir(output, run_dir_of(checkpoint).string());
  state.config.output_dir = dir.string();
  if (generations) state.config.generations = *generations;
  RunWriter writer(dir);
  auto backend = make_backend(state.config, flags);
  run_until(state, *backend->backend, state.config.generations, writer);
  print_summary(state, dir);
  return kOk;
}

template <class C>
void print_species(const char* label, const Population<C>& pop) {
  std::cout << label << ": " << pop.size() << " members in " << pop.species.size() << " species\n";
  for (const auto& s : pop.species) {
    std::cout << "  species " << s.id << ": " << s.members.size() << " members, staleness " << s.staleness
              << ", best ";
    if (s.best_fitness)
      std::cout << *s.best_fitness;
    else
      std::cout << "-";
    std::cout << "\n";
  }
}

int cmd_inspect(const std::string& checkpoint, const std::string& what, std::optional<std::size_t> index) {
  const auto state = load_checkpoint_file(checkpoint);
  if (what == "best") {
    const auto net = best_or_initial_network(state);
    if (state.best)
      std::cout << "best fitness " << state.best->fitness << " from generation " << state.best->generation
                << "\n";
    else
      std::cout << "no evaluated network yet; showing the initial assembly\n";
    std::cout << "layers " << net.layers.size() << ", edges " << net.edges.size() << ", depth "
              << compute_depth(net) << "\n";
    std::cout << export_dot(net);
    return kOk;
  }
  if (what == "species") {
    if (state.config.mode == RunMode::codeepneat) {
      print_species("blueprints", state.co.blueprints);
      print_species("modules", state.co.modules);
    } else {
      print_species("population", state.population);
    }
    return kOk;
  }
  if (what == "record") {
    if (!index) throw std::invalid_argument("record needs an index");
    if (*index >= state.last_records.size())
      throw NotFound("record " + std::to_string(*index) + " not found; the checkpoint holds " +
                     std::to_string(state.last_records.size()) + " records");
    std::cout << to_json(state.last_records[*index]).dump() << "\n";
    return kOk;
  }
  throw std::invalid_argument("unknown query '" + what + "'");
}

int cmd_export(const std::string& checkpoint, const std::string& format, const std::string& out) {
  const auto state = load_checkpoint_file(checkpoint);
  const auto net = best_or_initial_network(state);
  const std::string text = format == "dot" ? export_dot(net) : export_json(net);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << text;
  }
  return kOk;
}

int cmd_worker(const std::string& endpoint, double heartbeat, const std::string& id, int attempts) {
  const auto [host, port] = parse_endpoint(endpoint);
  WorkerOptions opts;
  opts.worker_id = id;
  opts.heartbeat_interval = heartbeat;
  return run_tcp_worker(host, port, opts, attempts) == 0 ? kOk : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoDeepNEAT / DeepNEAT neuroevolution"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  BackendFlags flags;
  const auto add_backend_flags = [&](CLI::App* cmd) {
    cmd->add_option("--workers", flags.workers, "evaluate on N local worker threads");
    cmd->add_option("--listen", flags.listen, "accept remote workers on HOST:PORT");
  };

  std::string config_path, preset, output, checkpoint, what, format, endpoint, worker_id = "worker";
  std::optional<std::uint64_t> seed;
  std::optional<int> generations;
  std::optional<std::size_t> index;
  double heartbeat = 1.0;
  int attempts = 20;

  auto* run = app.add_subcommand("run", "start a run from a config file or preset");
  run->add_option("config", config_path, "JSON config file");
  run->add_option("--preset", preset, "built-in preset used as the base config");
  run->add_option("--seed", seed, "random seed (overrides the config)");
  run->add_option("--generations", generations, "generation count (overrides the config)");
  run->add_option("--output", output, "output directory");
  add_backend_flags(run);

  auto* resume = app.add_subcommand("resume", "continue a run from a checkpoint");
  resume->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  resume->add_option("--generations", generations, "total generations to reach");
  resume->add_option("--output", output, "output directory (default: the checkpoint's run)");
  add_backend_flags(resume);

  auto* inspect = app.add_subcommand("inspect", "print part of a checkpoint");
  inspect->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  inspect->add_option("query", what, "best, species or record")
      ->required()
      ->check(CLI::IsMember({"best", "species", "record"}));
  inspect->add_option("index", index, "record index for 'record'");

  auto* exp = app.add_subcommand("export", "write the best network");
  exp->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  exp->add_option("format", format, "dot or json")->required()->check(CLI::IsMember({"dot", "json"}));
  exp->add_option("-o,--out", output, "output file (default: stdout)");

  auto* worker = app.add_subcommand("worker", "serve evaluation jobs for a master");
  worker->add_option("--connect", endpoint, "master HOST:PORT")->required();
  worker->add_option("--heartbeat", heartbeat, "heartbeat interval in seconds");
  worker->add_option("--id", worker_id, "worker name");
  worker->add_option("--attempts", attempts, "connection attempts before giving up");

  auto* presets = app.add_subcommand("preset", "list presets or print one as a config tree");
  presets->add_option("name", preset, "preset name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (run->parsed()) {
      if (config_path.empty() && preset.empty()) throw ConfigError("", "give a config file or --preset");
      if (flags.workers > 0 && !flags.listen.empty())
        throw ConfigError("", "--workers and --listen are mutually exclusive");
      return cmd_run(config_path, preset, seed, generations, output, flags);
    }
    if (resume->parsed()) return cmd_resume(checkpoint, generations, output, flags);
    if (inspect->parsed()) return cmd_inspect(checkpoint, what, index);
    if (exp->parsed()) return cmd_export(checkpoint, format, output);
    if (worker->parsed()) return cmd_worker(endpoint, heartbeat, worker_id, attempts);
    if (presets->parsed()) {
      if (preset.empty()) {
        for (const auto& n : preset_names()) std::cout << n << "\n";
      } else {
        std::cout << preset_tree(preset).dump(2) << "\n";
      }
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NotFound& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
