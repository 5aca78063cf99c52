#include "codeepneat/distrib.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <chrono>
#include <cstring>
#include <stdexcept>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

namespace codeepneat {

json to_json(const EvaluationBudget& budget) {
  return {{"epochs", budget.epochs}, {"sample_cap", budget.sample_cap}, {"seed", budget.seed}};
}

EvaluationBudget budget_from_json(const json& j) {
  EvaluationBudget b;
  b.epochs = j.at("epochs").get<int>();
  b.sample_cap = j.at("sample_cap").get<std::size_t>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.validate();
  return b;
}

Clock steady_clock_seconds() {
  return [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
}

namespace {

double real_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::set<std::string> layer_kinds(const json& network) {
  std::set<std::string> out;
  for (const auto& l : network.at("layers")) out.insert(l.at("kind").get<std::string>());
  return out;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

// --- master -------------------------------------------------------------------

Master::Master(MasterOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = steady_clock_seconds();
  if (options_.max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
}

Master::~Master() {
  std::vector<int> fds;
  {
    std::lock_guard lock(mutex_);
    fds = fds_;
  }
  for (int fd : fds) ::shutdown(fd, SHUT_RDWR);
  for (auto& t : readers_)
    if (t.joinable()) t.join();
  for (int fd : fds) ::close(fd);
}

void Master::add_connection(int fd) {
  std::lock_guard lock(mutex_);
  const int id = next_connection_++;
  fds_.push_back(fd);
  inbox_.push_back(Event{Event::Kind::connected, id, fd, nullptr});
  readers_.emplace_back([this, id, fd] {
    for (;;) {
      std::optional<std::string> frame;
      try {
        frame = read_frame(fd);
      } catch (const ProtocolError& e) {
        spdlog::warn("connection {}: {}", id, e.what());
      }
      if (!frame) break;
      json message = json::parse(*frame, nullptr, false);
      if (message.is_discarded() || !message.is_object()) {
        spdlog::warn("connection {}: ignoring a frame that is not a JSON object", id);
        continue;
      }
      push(Event{Event::Kind::message, id, fd, std::move(message)});
    }
    push(Event{Event::Kind::closed, id, fd, nullptr});
  });
  cv_.notify_all();
}

void Master::push(Event e) {
  {
    std::lock_guard lock(mutex_);
    inbox_.push_back(std::move(e));
  }
  cv_.notify_all();
}

void Master::pump(double wait) {
  std::deque<Event> batch;
  {
    std::unique_lock lock(mutex_);
    if (inbox_.empty() && wait > 0.0)
      cv_.wait_for(lock, std::chrono::duration<double>(wait), [&] { return !inbox_.empty(); });
    batch.swap(inbox_);
  }
  for (const auto& e : batch) handle(e);
}

double Master::job_timeout() const {
  if (durations_.empty()) return options_.min_timeout;
  return std::max(options_.min_timeout, options_.timeout_factor * median(durations_));
}

bool Master::any_live_worker(bool registered_only) const {
  for (const auto& [id, w] : workers_)
    if (w.alive && (w.registered || !registered_only)) return true;
  return false;
}

std::size_t Master::live_workers() {
  pump(0.0);
  std::size_t n = 0;
  for (const auto& [id, w] : workers_)
    if (w.alive && w.registered) ++n;
  return n;
}

void Master::mark_dead(int connection, const std::string& why) {
  auto it = workers_.find(connection);
  if (it == workers_.end() || !it->second.alive) return;
  auto& w = it->second;
  w.alive = false;
  ::shutdown(w.fd, SHUT_RDWR);
  spdlog::warn("worker {} ({}): {}", connection, w.name.empty() ? "unregistered" : w.name, why);
  if (w.inflight && !w.overdue) {
    auto job = job_index_.find(*w.inflight);
    if (job != job_index_.end()) requeue(job->second, why);
  }
  w.inflight.reset();
}

void Master::resolve(std::size_t index, FitnessReport report) {
  if (results_[index]) return;
  results_[index] = std::move(report);
  ++resolved_;
}

void Master::fail(std::size_t index, const std::string& why) {
  FitnessReport r;
  r.fitness = options_.fitness_floor;
  r.failed = true;
  r.diagnostics = {{"error", why}, {"attempts", attempts_[index] + 1}};
  resolve(index, std::move(r));
}

void Master::requeue(std::size_t index, const std::string& why) {
  if (results_[index]) return;
  if (attempts_[index] >= options_.max_retries) {
    spdlog::warn("job {}: giving up after {} attempts ({})", (*jobs_)[index].job_id,
                 attempts_[index] + 1, why);
    fail(index, "retries exhausted: " + why);
    return;
  }
  ++attempts_[index];
  ++requeued_;
  queue_.push_front(index);
}

bool Master::can_run(const Worker& w, std::size_t index) const {
  if (w.any_capability) return true;
  return std::includes(w.capabilities.begin(), w.capabilities.end(), required_[index].begin(),
                       required_[index].end());
}

void Master::handle(const Event& e) {
  const double now = options_.clock();
  if (e.kind == Event::Kind::connected) {
    Worker w;
    w.fd = e.fd;
    w.last_heartbeat = now;
    workers_[e.connection] = std::move(w);
    return;
  }
  auto it = workers_.find(e.connection);
  if (it == workers_.end()) return;
  if (e.kind == Event::Kind::closed) {
    mark_dead(e.connection, "connection lost");
    return;
  }
  auto& w = it->second;
  if (!w.alive) return;
  w.last_heartbeat = now;
  const auto type = e.message.value("type", std::string());
  if (type == "HEARTBEAT") return;
  if (type == "REGISTER") {
    w.registered = true;
    w.name = e.message.value("worker_id", std::string("worker"));
    const auto& caps = e.message.contains("capabilities") ? e.message["capabilities"] : json("any");
    w.any_capability = caps.is_string() && caps.get<std::string>() == "any";
    if (caps.is_array())
      for (const auto& c : caps)
        if (c.is_string()) w.capabilities.insert(c.get<std::string>());
    return;
  }
  if (type != "REPORT") {
    spdlog::warn("worker {}: ignoring unexpected {} message", w.name, type.empty() ? "untyped" : type);
    return;
  }
  const json& id = e.message.contains("job_id") ? e.message["job_id"] : json(nullptr);
  if (!id.is_number_unsigned() && !id.is_number_integer()) {
    spdlog::warn("worker {}: report without a job id: {}", w.name, e.message.value("error", std::string()));
    return;
  }
  const auto job_id = id.get<std::uint64_t>();
  if (w.inflight == job_id) {
    if (!w.overdue) durations_.push_back(now - w.started);
    w.inflight.reset();
    w.overdue = false;
  }
  auto job = job_index_.find(job_id);
  if (job == job_index_.end()) {
    spdlog::warn("worker {}: discarding report for unknown job {}", w.name, job_id);
    return;
  }
  if (results_[job->second]) {
    ++duplicates_;
    spdlog::warn("worker {}: discarding duplicate report for job {}", w.name, job_id);
    return;
  }
  if (e.message.contains("error")) {
    FitnessReport r;
    r.fitness = options_.fitness_floor;
    r.failed = true;
    r.diagnostics = {{"error", e.message["error"]}};
    resolve(job->second, std::move(r));
    return;
  }
  try {
    resolve(job->second, fitness_report_from_json(e.message.at("report")));
  } catch (const std::exception& ex) {
    spdlog::warn("worker {}: malformed report for job {}: {}", w.name, job_id, ex.what());
    requeue(job->second, "malformed report");
  }
}

std::vector<FitnessReport> Master::dispatch(const std::vector<EvalJob>& jobs, const json& evaluator) {
  jobs_ = &jobs;
  evaluator_ = evaluator;
  queue_.clear();
  job_index_.clear();
  required_.assign(jobs.size(), {});
  results_.assign(jobs.size(), std::nullopt);
  attempts_.assign(jobs.size(), 0);
  resolved_ = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!job_index_.emplace(jobs[i].job_id, i).second)
      throw std::invalid_argument("duplicate job id " + std::to_string(jobs[i].job_id));
    required_[i] = layer_kinds(jobs[i].network);
    attempts_[i] = jobs[i].attempt;
    queue_.push_back(i);
  }

  pump(0.0);
  if (!any_live_worker(false)) throw std::runtime_error("no workers are connected");

  double stranded_since = -1.0;  // real time since no live registered worker exists
  while (resolved_ < jobs.size()) {
    // Assign queued jobs to idle workers, oldest connection first.
    for (auto& [cid, w] : workers_) {
      if (queue_.empty()) break;
      if (!w.alive || !w.registered || w.inflight) continue;
      for (auto q = queue_.begin(); q != queue_.end(); ++q) {
        const std::size_t i = *q;
        if (results_[i]) continue;
        if (!can_run(w, i)) continue;
        queue_.erase(q);
        const auto& job = jobs[i];
        const auto msg = message::job(job.job_id, attempts_[i], job.network, to_json(job.budget), evaluator_);
        w.inflight = job.job_id;
        w.started = options_.clock();
        w.overdue = false;
        if (!send_message(w.fd, msg)) mark_dead(cid, "send failed");
        break;
      }
    }

    // Drop resolved entries; fail jobs no registered worker can run.
    std::deque<std::size_t> still;
    for (auto i : queue_) {
      if (results_[i]) continue;
      bool capable = false, pending_registration = false;
      for (const auto& [cid, w] : workers_) {
        if (!w.alive) continue;
        if (!w.registered) pending_registration = true;
        else if (can_run(w, i)) capable = true;
      }
      if (!capable && !pending_registration && any_live_worker(true)) {
        spdlog::warn("job {}: no worker supports its layer kinds", jobs[i].job_id);
        fail(i, "no capable worker");
        continue;
      }
      still.push_back(i);
    }
    queue_.swap(still);
    if (resolved_ == jobs.size()) break;

    const double now = options_.clock();
    const double timeout = job_timeout();
    for (auto& [cid, w] : workers_) {
      if (!w.alive) continue;
      if (now - w.last_heartbeat > options_.heartbeat_timeout) {
        mark_dead(cid, "heartbeat timeout");
        continue;
      }
      if (w.inflight && !w.overdue && now - w.started > timeout) {
        w.overdue = true;
        auto job = job_index_.find(*w.inflight);
        if (job != job_index_.end()) {
          spdlog::warn("job {}: no report after {:.1f}s, re-queueing", *w.inflight, timeout);
          requeue(job->second, "job timeout");
        }
      }
    }

    if (!any_live_worker(true)) {
      if (stranded_since < 0.0) stranded_since = real_now();
      if (!any_live_worker(false) && real_now() - stranded_since > options_.registration_wait)
        throw std::runtime_error("all workers were lost with " +
                                 std::to_string(jobs.size() - resolved_) + " jobs unresolved");
      if (any_live_worker(false) && real_now() - stranded_since > options_.registration_wait)
        throw std::runtime_error("no worker registered in time");
    } else {
      stranded_since = -1.0;
    }
    pump(options_.poll_interval);
  }

  std::vector<FitnessReport> out;
  out.reserve(jobs.size());
  for (auto& r : results_) out.push_back(std::move(*r));
  jobs_ = nullptr;
  job_index_.clear();
  return out;
}

void Master::shutdown_workers() {
  pump(0.0);
  for (auto& [cid, w] : workers_) {
    if (!w.alive) continue;
    send_message(w.fd, message::shutdown());
    w.alive = false;
  }
}

// --- worker -------------------------------------------------------------------

int worker_loop(int fd, const WorkerOptions& options) {
  std::mutex write_mutex;
  const auto send = [&](const json& m) {
    std::lock_guard lock(write_mutex);
    return send_message(fd, m);
  };

  json caps = "any";
  if (options.evaluator) {
    caps = json::array();
    for (const auto& k : options.evaluator->capabilities()) caps.push_back(k);
  }
  if (!send(message::register_worker(options.worker_id, caps))) return 1;

  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stop = false;
  std::thread heartbeat([&] {
    std::unique_lock lock(stop_mutex);
    while (!stop_cv.wait_for(lock, std::chrono::duration<double>(options.heartbeat_interval),
                             [&] { return stop; })) {
      lock.unlock();
      send(message::heartbeat());
      lock.lock();
    }
  });
  const auto finish = [&](int code) {
    {
      std::lock_guard lock(stop_mutex);
      stop = true;
    }
    stop_cv.notify_all();
    heartbeat.join();
    return code;
  };

  std::map<std::string, EvaluatorPtr> cache;
  std::size_t received = 0;
  for (;;) {
    std::optional<std::string> frame;
    try {
      frame = read_frame(fd);
    } catch (const ProtocolError& e) {
      spdlog::warn("{}: {}", options.worker_id, e.what());
      return finish(1);
    }
    if (!frame) return finish(1);
    json msg = json::parse(*frame, nullptr, false);
    if (msg.is_discarded() || !msg.is_object()) {
      send(message::error(nullptr, "malformed message: not a JSON object"));
      continue;
    }
    const auto type = msg.value("type", std::string());
    if (type == "SHUTDOWN") return finish(0);
    if (type != "JOB") {
      send(message::error(nullptr, "unexpected message type '" + type + "'"));
      continue;
    }
    ++received;
    if (options.die_on_job && *options.die_on_job == received) {
      ::shutdown(fd, SHUT_RDWR);
      return finish(1);
    }
    const json id = msg.contains("job_id") ? msg["job_id"] : json(nullptr);
    EvalRequest request;
    EvaluatorPtr evaluator = options.evaluator;
    try {
      if (!id.is_number_unsigned() && !id.is_number_integer()) throw std::invalid_argument("job_id missing");
      request.network = network_from_json(msg.at("network"));
      request.budget = budget_from_json(msg.at("budget"));
      if (!evaluator) {
        const auto key = msg.at("evaluator").dump();
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, make_evaluator(msg.at("evaluator"))).first;
        evaluator = it->second;
      }
    } catch (const std::exception& e) {
      send(message::error(id, std::string("malformed job: ") + e.what()));
      continue;
    }
    FitnessReport report;
    try {
      report = evaluator->evaluate(request.network, request.budget);
      report.network_id = request.network.provenance.network_id;
    } catch (const std::exception& e) {
      send(message::error(id, e.what()));
      continue;
    }
    if (!std::isfinite(report.fitness)) {
      send(message::error(id, "non-finite fitness"));
      continue;
    }
    if (!send(message::report(id.get<std::uint64_t>(), to_json(report)))) return finish(1);
  }
}

namespace {

int connect_to(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;
  int fd = -1;
  for (auto* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  return fd;
}

}  // namespace

int run_tcp_worker(const std::string& host, int port, const WorkerOptions& options,
                   int max_connect_attempts) {
  int failures = 0;
  double backoff = 0.1;
  while (failures < max_connect_attempts) {
    const int fd = connect_to(host, port);
    if (fd < 0) {
      ++failures;
      spdlog::info("{}: cannot reach {}:{}, retrying in {:.1f}s", options.worker_id, host, port, backoff);
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff = std::min(backoff * 2.0, 5.0);
      continue;
    }
    failures = 0;
    backoff = 0.1;
    const int code = worker_loop(fd, options);
    ::close(fd);
    if (code == 0) return 0;
    spdlog::info("{}: connection lost, reconnecting", options.worker_id);
  }
  return 1;
}

std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == endpoint.size())
    throw std::invalid_argument("endpoint must look like HOST:PORT, got '" + endpoint + "'");
  const auto port_text = endpoint.substr(colon + 1);
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535)
    throw std::invalid_argument("invalid port in endpoint '" + endpoint + "'");
  return {endpoint.substr(0, colon), port};
}

// --- listener and local pool ------------------------------------------------------------

TcpListener::TcpListener(Master& master, const std::string& host, int port) : master_(master) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), std::to_string(port).c_str(),
                               &hints, &res);
  if (rc != 0) throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd_);
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  thread_ = std::thread([this] {
    while (!stop_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      const int client = ::accept(fd_, nullptr, nullptr);
      if (client >= 0) master_.add_connection(client);
    }
  });
}

TcpListener::~TcpListener() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  ::close(fd_);
}

LocalWorkerPool::LocalWorkerPool(Master& master, std::size_t workers, EvaluatorPtr evaluator,
                                 std::map<std::size_t, std::size_t> die_on_job)
    : master_(master) {
  for (std::size_t i = 0; i < workers; ++i) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0)
      throw std::runtime_error(std::string("socketpair: ") + std::strerror(errno));
    master.add_connection(sv[0]);
    WorkerOptions opts;
    opts.worker_id = "local-" + std::to_string(i);
    opts.evaluator = evaluator;
    if (auto it = die_on_job.find(i); it != die_on_job.end()) opts.die_on_job = it->second;
    const int fd = sv[1];
    threads_.emplace_back([fd, opts] {
      worker_loop(fd, opts);
      ::close(fd);
    });
  }
}

LocalWorkerPool::~LocalWorkerPool() {
  master_.shutdown_workers();
  for (auto& t : threads_)
    if (t.joinable()) t.join();
}

std::vector<FitnessReport> DistributedBackend::evaluate_all(const std::vector<EvalRequest>& requests) {
  if (requests.empty()) return {};
  std::vector<EvalJob> jobs;
  jobs.reserve(requests.size());
  for (const auto& r : requests) {
    EvalJob job;
    job.job_id = master_.next_job_id();
    job.network = to_json(r.network);
    job.budget = r.budget;
    jobs.push_back(std::move(job));
  }
  auto reports = master_.dispatch(jobs, evaluator_->describe());
  for (std::size_t i = 0; i < reports.size(); ++i)
    reports[i].network_id = requests[i].network.provenance.network_id;
  return reports;
}

}  // namespace codeepneat
