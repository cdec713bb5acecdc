#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "trajan/bench.hpp"
#include "trajan/bytes.hpp"

namespace trajan {

// Kind tags understood by the built-in task registry. The engine itself
// only routes by tag; decoding the payload is up to the handler.
enum class TaskKind : std::uint8_t {
  noop = 0,
  echo = 1,
  broadcast_digest = 2,
  fail = 3,
  abort_worker = 4,
  psa_block = 10,
  leaflet_rows = 20,
  leaflet_edges = 21,
  leaflet_partial = 22,
  leaflet_tree = 23,
  leaflet_shared_tree = 24,
};

struct TaskSpec {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::noop;
  Bytes payload;
};

enum class TaskStatus : std::uint8_t { ok = 0, error = 1 };

struct TaskResult {
  std::uint64_t id = 0;
  TaskStatus status = TaskStatus::ok;
  Bytes payload;  // on error: UTF-8 cause
  std::size_t payload_size = 0;
  double wall_seconds = 0.0;
  std::size_t worker = 0;  // index of the executing worker

  bool ok() const { return status == TaskStatus::ok; }
  std::string error_message() const {
    return ok() ? std::string{} : std::string(payload.begin(), payload.end());
  }
};

struct BroadcastHandle {
  std::uint64_t id = 0;
  std::uint64_t size = 0;
};

// What a handler can see of its worker.
class TaskContext {
 public:
  virtual ~TaskContext() = default;
  // Bytes of a completed broadcast; UsageError for unknown handles.
  virtual std::span<const std::uint8_t> broadcast(std::uint64_t handle) const = 0;
  virtual std::size_t worker_index() const = 0;
  // True when the handler runs in a dedicated worker process.
  virtual bool isolated() const = 0;
};

using TaskHandler = std::function<Bytes(std::span<const std::uint8_t>, const TaskContext&)>;

class TaskRegistry {
 public:
  void add(TaskKind kind, TaskHandler handler);
  // Runs the handler for `kind`; UsageError for unregistered kinds.
  Bytes run(std::uint8_t kind, std::span<const std::uint8_t> input, const TaskContext& ctx) const;

 private:
  std::map<std::uint8_t, TaskHandler> handlers_;
};

enum class Backend { in_process, multi_process };

const char* to_string(Backend backend);
Backend parse_backend(const std::string& name);

struct EngineConfig {
  Backend backend = Backend::in_process;
  std::size_t workers = 1;
  std::uint64_t memory_budget = std::uint64_t{2} << 30;
  // Scheduler listen address (multi-process only). Port 0 picks a free port.
  std::string listen_address = "127.0.0.1:0";
  // argv prefix used to spawn a worker; "--connect <addr> --budget <n>" is
  // appended. Empty means "<this executable> worker".
  std::vector<std::string> worker_command;
  // When false, the scheduler waits for externally started workers.
  bool spawn_workers = true;
  std::chrono::milliseconds startup_timeout{20000};
  // Tasks a remote worker may hold at once (pull window).
  std::size_t window = 2;

  // Defaults overridden by TRAJAN_WORKERS and TRAJAN_LISTEN.
  static EngineConfig from_env();
  void validate() const;
};

class BackendImpl;

// Map/broadcast/gather engine. Driver API is single-caller.
class Engine {
 public:
  Engine(EngineConfig config, std::shared_ptr<const TaskRegistry> registry);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Runs every task exactly once; results come back sorted by task id.
  // UsageError on duplicate ids, ResourceError when a payload exceeds the
  // worker memory budget. Failed tasks are reported with status=error.
  std::vector<TaskResult> submit_map(std::vector<TaskSpec> tasks);

  // Replicates `data` to every worker. ResourceError when it exceeds the
  // memory budget; nothing is sent in that case.
  BroadcastHandle broadcast(Bytes data);

  // Multi-process: blocks until all workers registered (no-op otherwise).
  void await_workers();
  // Actual scheduler address (multi-process); empty for in-process.
  std::string listen_address() const;

  const EngineConfig& config() const { return config_; }
  // Timing records of engine-level operations (broadcasts).
  const std::vector<BenchRecord>& records() const { return records_; }

 private:
  EngineConfig config_;
  std::shared_ptr<const TaskRegistry> registry_;
  std::unique_ptr<BackendImpl> impl_;
  std::vector<BenchRecord> records_;
  std::uint64_t next_handle_ = 1;
};

// Sum of payload sizes; the shuffle volume of a gather.
std::uint64_t gathered_bytes(std::span<const TaskResult> results);

// Throws TaskError naming the first failed task, if any.
void require_ok(std::span<const TaskResult> results);

using Combine = std::function<Bytes(Bytes accumulator, std::span<const std::uint8_t> next)>;

// Left fold of result payloads in task-id order. UsageError if any result
// failed. An empty input folds to an empty payload.
Bytes reduce(std::span<const TaskResult> results, const Combine& combine);

// Zero-workload throughput: n_tasks noop tasks timed from first submission
// to last result on an already running engine.
BenchRecord throughput_benchmark(Engine& engine, std::size_t n_tasks, std::size_t repeat = 0);
// Same, but the timing includes engine (and worker) startup.
BenchRecord throughput_benchmark_cold(const EngineConfig& config,
                                      std::shared_ptr<const TaskRegistry> registry,
                                      std::size_t n_tasks, std::size_t repeat = 0);

}  // namespace trajan
