#pragma once

#include <atomic>
#include <cstdint>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "codeepneat/evaluator.hpp"
#include "codeepneat/wire.hpp"

namespace codeepneat {

struct EvalJob {
  std::uint64_t job_id = 0;
  json network;  // canonical network JSON
  EvaluationBudget budget;
  int attempt = 0;
};

json to_json(const EvaluationBudget& budget);
EvaluationBudget budget_from_json(const json& j);

// Seconds on a monotonic scale; injectable for tests.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

struct MasterOptions {
  int max_retries = 2;
  double min_timeout = 30.0;     // seconds
  double timeout_factor = 10.0;  // x median observed job duration
  double heartbeat_timeout = 10.0;
  double registration_wait = 60.0;  // how long dispatch waits for a first worker
  double fitness_floor = 0.0;
  double poll_interval = 0.02;  // real seconds between scheduler wakeups
  Clock clock;                  // defaults to steady_clock_seconds()
};

// Scheduling state machine. Each connection gets a reader thread that only
// forwards decoded messages to the inbox; all decisions happen on the thread
// calling dispatch().
class Master {
 public:
  explicit Master(MasterOptions options = {});
  ~Master();
  Master(const Master&) = delete;
  Master& operator=(const Master&) = delete;

  // Takes ownership of a connected stream socket.
  void add_connection(int fd);

  // Resolves every job exactly once (generation barrier). Reports come back
  // in job order. Throws std::runtime_error when no worker is available.
  std::vector<FitnessReport> dispatch(const std::vector<EvalJob>& jobs, const json& evaluator);

  // Sends SHUTDOWN to every live worker.
  void shutdown_workers();

  std::size_t live_workers();
  std::uint64_t next_job_id() { return next_job_id_++; }
  std::size_t duplicate_reports() const { return duplicates_; }
  std::size_t requeued_jobs() const { return requeued_; }

  double job_timeout() const;

 private:
  struct Event {
    enum class Kind { connected, message, closed } kind;
    int connection;
    int fd = -1;
    json message;
  };
  struct Worker {
    int fd = -1;
    std::string name;
    std::set<std::string> capabilities;
    bool any_capability = false;
    bool registered = false;
    bool alive = true;
    double last_heartbeat = 0.0;
    std::optional<std::uint64_t> inflight;
    double started = 0.0;
    bool overdue = false;  // inflight job already re-queued after a timeout
  };

  void push(Event e);
  // Handles queued events, waiting up to wait real seconds for the first one.
  void pump(double wait);
  void handle(const Event& e);
  void mark_dead(int connection, const std::string& why);
  void resolve(std::size_t index, FitnessReport report);
  void fail(std::size_t index, const std::string& why);
  void requeue(std::size_t index, const std::string& why);
  bool can_run(const Worker& w, std::size_t index) const;
  bool any_live_worker(bool registered_only) const;

  MasterOptions options_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> inbox_;
  std::vector<int> fds_;
  std::vector<std::thread> readers_;
  int next_connection_ = 0;

  // Owned by the dispatching thread.
  std::map<int, Worker> workers_;
  std::vector<double> durations_;
  std::atomic<std::uint64_t> next_job_id_{1};
  std::size_t duplicates_ = 0;
  std::size_t requeued_ = 0;

  // Per-dispatch state.
  const std::vector<EvalJob>* jobs_ = nullptr;
  json evaluator_;
  std::deque<std::size_t> queue_;
  std::map<std::uint64_t, std::size_t> job_index_;
  std::vector<std::set<std::string>> required_;
  std::vector<std::optional<FitnessReport>> results_;
  std::vector<int> attempts_;
  std::size_t resolved_ = 0;
};

struct WorkerOptions {
  std::string worker_id = "worker";
  double heartbeat_interval = 1.0;  // seconds
  EvaluatorPtr evaluator;           // optional; otherwise built from each job
  // Fault injection: drop the connection upon receiving this job (1-based).
  std::optional<std::size_t> die_on_job;
};

// Serves one connection until SHUTDOWN (returns 0) or connection loss (1).
int worker_loop(int fd, const WorkerOptions& options);

// Connects to host:port and serves; reconnects with exponential backoff after
// connection loss. Returns 0 after SHUTDOWN, 1 when attempts are exhausted.
int run_tcp_worker(const std::string& host, int port, const WorkerOptions& options,
                   int max_connect_attempts = 20);

// Listening socket that hands accepted connections to a master.
class TcpListener {
 public:
  TcpListener(Master& master, const std::string& host, int port);
  ~TcpListener();
  int port() const { return port_; }

 private:
  Master& master_;
  int fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

// N in-process worker threads connected to a master over socketpairs. The
// master must outlive the pool; destruction sends SHUTDOWN and joins.
// die_on_job maps a worker index to the job number it drops its connection on.
class LocalWorkerPool {
 public:
  LocalWorkerPool(Master& master, std::size_t workers, EvaluatorPtr evaluator,
                  std::map<std::size_t, std::size_t> die_on_job = {});
  ~LocalWorkerPool();

 private:
  Master& master_;
  std::vector<std::thread> threads_;
};

// EvaluationBackend over a master. Networks travel as canonical JSON.
class DistributedBackend final : public EvaluationBackend {
 public:
  DistributedBackend(Master& master, EvaluatorPtr evaluator)
      : master_(master), evaluator_(std::move(evaluator)) {}
  std::vector<FitnessReport> evaluate_all(const std::vector<EvalRequest>& requests) override;

 private:
  Master& master_;
  EvaluatorPtr evaluator_;
};

// Splits "host:port"; throws std::invalid_argument.
std::pair<std::string, int> parse_endpoint(const std::string& endpoint);

}  // namespace codeepneat
