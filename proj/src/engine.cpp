#include "trajan/engine.hpp"

#include <algorithm>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <iostream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <unordered_map>
#include <unordered_set>

#include <poll.h>

#include "net.hpp"
#include "trajan/errors.hpp"
#include "trajan/wire.hpp"

extern char** environ;

namespace trajan {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Bytes text_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

TaskResult error_result(std::uint64_t id, const std::string& cause) {
  TaskResult r;
  r.id = id;
  r.status = TaskStatus::error;
  r.payload = text_bytes(cause);
  r.payload_size = r.payload.size();
  return r;
}

}  // namespace

void TaskRegistry::add(TaskKind kind, TaskHandler handler) {
  handlers_[static_cast<std::uint8_t>(kind)] = std::move(handler);
}

Bytes TaskRegistry::run(std::uint8_t kind, std::span<const std::uint8_t> input,
                        const TaskContext& ctx) const {
  auto it = handlers_.find(kind);
  if (it == handlers_.end()) throw UsageError("no handler for task kind " + std::to_string(kind));
  return it->second(input, ctx);
}

const char* to_string(Backend backend) {
  return backend == Backend::in_process ? "in-process" : "multi-process";
}

Backend parse_backend(const std::string& name) {
  if (name == "in-process" || name == "inproc" || name == "threads") return Backend::in_process;
  if (name == "multi-process" || name == "multiproc" || name == "processes") {
    return Backend::multi_process;
  }
  throw UsageError("unknown backend '" + name + "' (expected in-process or multi-process)");
}

EngineConfig EngineConfig::from_env() {
  EngineConfig c;
  if (const char* w = std::getenv("TRAJAN_WORKERS"); w && *w) {
    try {
      c.workers = std::stoul(w);
    } catch (const std::exception&) {
      throw UsageError(std::string("TRAJAN_WORKERS='") + w + "' is not a count");
    }
  }
  if (const char* l = std::getenv("TRAJAN_LISTEN"); l && *l) c.listen_address = l;
  return c;
}

void EngineConfig::validate() const {
  if (workers == 0) throw UsageError("engine needs at least one worker");
  if (memory_budget == 0) throw UsageError("worker memory budget must be > 0");
  if (window == 0) throw UsageError("worker window must be >= 1");
  if (backend == Backend::multi_process) net::parse_endpoint(listen_address);
}

// ---------------------------------------------------------------------------

class BackendImpl {
 public:
  virtual ~BackendImpl() = default;
  // Results in any order; exactly one per task.
  virtual std::vector<TaskResult> run(std::vector<TaskSpec>& tasks) = 0;
  virtual void broadcast(std::uint64_t handle, std::shared_ptr<const Bytes> data) = 0;
  virtual void await_workers() {}
  virtual std::string address() const { return {}; }
};

namespace {

// Thread pool pulling from a shared queue.
class InProcessBackend final : public BackendImpl {
 public:
  InProcessBackend(std::size_t workers, std::shared_ptr<const TaskRegistry> registry)
      : registry_(std::move(registry)) {
    for (std::size_t w = 0; w < workers; ++w) {
      threads_.emplace_back([this, w] { loop(w); });
    }
  }

  ~InProcessBackend() override {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::vector<TaskResult> run(std::vector<TaskSpec>& tasks) override {
    std::vector<TaskResult> results(tasks.size());
    if (tasks.empty()) return results;
    std::unique_lock lock(mu_);
    tasks_ = &tasks;
    results_ = &results;
    next_ = 0;
    done_ = 0;
    work_cv_.notify_all();
    done_cv_.wait(lock, [&] { return done_ == tasks.size(); });
    tasks_ = nullptr;
    results_ = nullptr;
    return results;
  }

  void broadcast(std::uint64_t handle, std::shared_ptr<const Bytes> data) override {
    std::unique_lock lock(broadcast_mu_);
    broadcasts_[handle] = std::move(data);
  }

 private:
  class Context final : public TaskContext {
   public:
    Context(const InProcessBackend& owner, std::size_t index) : owner_(owner), index_(index) {}
    std::span<const std::uint8_t> broadcast(std::uint64_t handle) const override {
      std::shared_lock lock(owner_.broadcast_mu_);
      auto it = owner_.broadcasts_.find(handle);
      if (it == owner_.broadcasts_.end()) {
        throw UsageError("unknown broadcast handle " + std::to_string(handle));
      }
      return *it->second;
    }
    std::size_t worker_index() const override { return index_; }
    bool isolated() const override { return false; }

   private:
    const InProcessBackend& owner_;
    std::size_t index_;
  };

  void loop(std::size_t index) {
    Context ctx(*this, index);
    std::unique_lock lock(mu_);
    while (true) {
      work_cv_.wait(lock, [&] { return stop_ || (tasks_ && next_ < tasks_->size()); });
      if (stop_) return;
      const std::size_t i = next_++;
      const TaskSpec& task = (*tasks_)[i];
      lock.unlock();

      TaskResult r;
      r.id = task.id;
      r.worker = index;
      const auto t0 = Clock::now();
      try {
        r.payload = registry_->run(static_cast<std::uint8_t>(task.kind), task.payload, ctx);
      } catch (const std::exception& e) {
        r.status = TaskStatus::error;
        r.payload = text_bytes(e.what());
      }
      r.wall_seconds = seconds_since(t0);
      r.payload_size = r.payload.size();

      lock.lock();
      (*results_)[i] = std::move(r);
      if (++done_ == tasks_->size()) done_cv_.notify_one();
      // Give idle peers a chance to pull the next task on oversubscribed hosts.
      lock.unlock();
      std::this_thread::yield();
      lock.lock();
    }
  }

  std::shared_ptr<const TaskRegistry> registry_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable work_cv_, done_cv_;
  std::vector<TaskSpec>* tasks_ = nullptr;
  std::vector<TaskResult>* results_ = nullptr;
  std::size_t next_ = 0;
  std::size_t done_ = 0;
  bool stop_ = false;

  mutable std::shared_mutex broadcast_mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<const Bytes>> broadcasts_;
};

// ---------------------------------------------------------------------------

// Scheduler side of the wire protocol. Workers connect and REGISTER; tasks
// are pulled: each worker holds at most `window` tasks and receives the
// next one when it returns a result.
class MultiProcessBackend final : public BackendImpl {
 public:
  MultiProcessBackend(const EngineConfig& config) : config_(config) {
    auto [sock, ep] = net::listen_tcp(config.listen_address);
    listener_ = std::move(sock);
    endpoint_ = ep;
    if (config.spawn_workers) {
      for (std::size_t w = 0; w < config.workers; ++w) spawn();
      await_workers();
    }
  }

  ~MultiProcessBackend() override {
    const auto bye = wire::encode_frame(wire::MessageType::shutdown, {});
    for (auto& c : conns_) {
      if (!c.alive) continue;
      try {
        net::set_nonblocking(c.sock);
        net::send_some(c.sock, bye);
      } catch (const Error&) {
      }
      c.sock.close();
    }
    reap_children();
  }

  std::string address() const override { return endpoint_.str(); }

  void await_workers() override {
    const auto deadline = Clock::now() + config_.startup_timeout;
    std::vector<Conn> pending;
    while (registered_count() < config_.workers) {
      if (Clock::now() >= deadline) {
        throw ResourceError("only " + std::to_string(registered_count()) + " of " +
                            std::to_string(config_.workers) + " workers registered at " +
                            endpoint_.str());
      }
      std::vector<pollfd> fds;
      fds.push_back({listener_.fd(), POLLIN, 0});
      for (auto& p : pending) fds.push_back({p.sock.fd(), POLLIN, 0});
      ::poll(fds.data(), fds.size(), 50);

      if (fds[0].revents & POLLIN) {
        while (true) {
          auto s = net::accept_nonblocking(listener_);
          if (!s.valid()) break;
          pending.emplace_back(std::move(s), config_.memory_budget);
        }
      }
      for (std::size_t i = 0; i < pending.size(); ++i) {
        auto& p = pending[i];
        if (!p.alive) continue;
        try {
          if (!pump_read(p)) continue;
          auto msg = p.decoder.next();
          if (!msg) continue;
          if (msg->type != wire::MessageType::register_worker || msg->payload.size() != 8) {
            throw ProtocolError(std::string("expected REGISTER, got ") + wire::to_string(msg->type));
          }
          if (p.decoder.mid_frame()) throw ProtocolError("data after REGISTER");
          net::set_nonblocking(p.sock);
          net::send_all(p.sock, wire::encode_frame(wire::MessageType::ack, {}));
          p.registered = true;
          p.index = conns_.size();
          conns_.push_back(std::move(p));
          p.alive = false;
        } catch (const Error& e) {
          std::cerr << "trajan scheduler: dropping connection during registration: " << e.what()
                    << "\n";
          p.alive = false;
          p.sock.close();
        }
      }
      std::erase_if(pending, [](const Conn& c) { return !c.alive; });
    }
  }

  void broadcast(std::uint64_t handle, std::shared_ptr<const Bytes> data) override {
    await_workers();
    Bytes payload;
    payload.reserve(8 + data->size());
    ByteWriter w(payload);
    w.u64(handle);
    w.bytes(*data);
    const auto frame = wire::encode_frame(wire::MessageType::broadcast, payload);
    for (auto& c : conns_) {
      if (!c.alive) continue;
      c.out.insert(c.out.end(), frame.begin(), frame.end());
      c.awaiting_ack = handle;
    }
    auto waiting = [&] {
      return std::any_of(conns_.begin(), conns_.end(),
                         [](const Conn& c) { return c.alive && c.awaiting_ack; });
    };
    while (waiting()) {
      poll_once([&](Conn& c, wire::Message& msg) {
        if (msg.type != wire::MessageType::ack || msg.payload.size() != 8) {
          throw ProtocolError(std::string("expected broadcast ACK, got ") +
                              wire::to_string(msg.type));
        }
        ByteReader r(msg.payload);
        if (!c.awaiting_ack || r.u64() != *c.awaiting_ack) {
          throw ProtocolError("ACK for unexpected broadcast handle");
        }
        c.awaiting_ack.reset();
      });
    }
    if (live_count() == 0) throw ResourceError("no live workers to hold broadcast");
  }

  std::vector<TaskResult> run(std::vector<TaskSpec>& tasks) override {
    await_workers();
    const std::size_t n = tasks.size();
    std::vector<std::optional<TaskResult>> results(n);
    std::vector<int> attempts(n, 0);
    std::unordered_map<std::uint64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < n; ++i) by_id[tasks[i].id] = i;
    std::deque<std::size_t> pending;
    for (std::size_t i = 0; i < n; ++i) pending.push_back(i);
    std::size_t done = 0;

    auto lost = [&](Conn& c, const std::string& cause) {
      for (auto i : c.inflight) {
        if (++attempts[i] < 2) {
          pending.push_front(i);
        } else {
          results[i] = error_result(tasks[i].id, "worker lost twice; last cause: " + cause);
          ++done;
        }
      }
      c.inflight.clear();
    };

    while (done < n) {
      if (live_count() == 0) {
        for (auto i : pending) {
          results[i] = error_result(tasks[i].id, "no live workers");
          ++done;
        }
        pending.clear();
        break;
      }
      for (auto& c : conns_) {
        while (c.alive && c.inflight.size() < config_.window && !pending.empty()) {
          const auto i = pending.front();
          pending.pop_front();
          const auto& t = tasks[i];
          const auto frame = wire::encode_frame(
              wire::MessageType::task,
              wire::encode_task(t.id, static_cast<std::uint8_t>(t.kind), t.payload));
          c.out.insert(c.out.end(), frame.begin(), frame.end());
          c.inflight.push_back(i);
        }
      }
      poll_once(
          [&](Conn& c, wire::Message& msg) {
            if (msg.type != wire::MessageType::result) {
              throw ProtocolError(std::string("expected RESULT, got ") + wire::to_string(msg.type));
            }
            wire::ResultMessage res;
            try {
              res = wire::decode_result(msg.payload);
            } catch (const FormatError& e) {
              throw ProtocolError(std::string("malformed RESULT: ") + e.what());
            }
            auto it = by_id.find(res.id);
            auto pos = it == by_id.end()
                           ? c.inflight.end()
                           : std::find(c.inflight.begin(), c.inflight.end(), it->second);
            if (pos == c.inflight.end()) {
              throw ProtocolError("RESULT for task " + std::to_string(res.id) +
                                  " not assigned to this worker");
            }
            const std::size_t i = *pos;
            c.inflight.erase(pos);
            TaskResult r;
            r.id = res.id;
            r.status = res.status == 0 ? TaskStatus::ok : TaskStatus::error;
            r.payload.assign(res.output.begin(), res.output.end());
            r.payload_size = r.payload.size();
            r.wall_seconds = res.wall_seconds;
            r.worker = c.index;
            results[i] = std::move(r);
            ++done;
          },
          lost);
    }

    std::vector<TaskResult> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
  }

 private:
  struct Conn {
    Conn(net::Socket s, std::uint64_t budget)
        : sock(std::move(s)), decoder(budget + 64) {}
    net::Socket sock;
    wire::FrameDecoder decoder;
    Bytes out;
    std::size_t out_off = 0;
    bool alive = true;
    bool registered = false;
    std::size_t index = 0;
    std::deque<std::size_t> inflight;
    std::optional<std::uint64_t> awaiting_ack;
  };

  std::size_t registered_count() const { return conns_.size(); }
  std::size_t live_count() const {
    return static_cast<std::size_t>(
        std::count_if(conns_.begin(), conns_.end(), [](const Conn& c) { return c.alive; }));
  }

  // Reads whatever is available. Returns false if nothing new arrived.
  // Raises IoError/ProtocolError on EOF or garbage.
  static bool pump_read(Conn& c) {
    std::uint8_t buf[1 << 16];
    bool any = false;
    while (true) {
      const long n = net::recv_some(c.sock, buf);
      if (n < 0) break;
      if (n == 0) {
        throw IoError(c.decoder.mid_frame() ? "connection closed mid-frame"
                                            : "connection closed");
      }
      c.decoder.feed(std::span(buf, static_cast<std::size_t>(n)));
      any = true;
      if (static_cast<std::size_t>(n) < sizeof buf) break;
    }
    return any;
  }

  template <typename OnMessage>
  void poll_once(OnMessage&& on_message) {
    poll_once(std::forward<OnMessage>(on_message), [](Conn&, const std::string&) {});
  }

  template <typename OnMessage, typename OnLost>
  void poll_once(OnMessage&& on_message, OnLost&& on_lost) {
    std::vector<pollfd> fds;
    std::vector<Conn*> owners;
    for (auto& c : conns_) {
      if (!c.alive) continue;
      short events = POLLIN;
      if (c.out_off < c.out.size()) events |= POLLOUT;
      fds.push_back({c.sock.fd(), events, 0});
      owners.push_back(&c);
    }
    if (fds.empty()) return;
    ::poll(fds.data(), fds.size(), 1000);
    for (std::size_t k = 0; k < fds.size(); ++k) {
      Conn& c = *owners[k];
      try {
        if (fds[k].revents & POLLOUT) flush(c);
        if (fds[k].revents & (POLLIN | POLLHUP | POLLERR)) {
          pump_read(c);
          while (auto msg = c.decoder.next()) on_message(c, *msg);
        }
      } catch (const Error& e) {
        std::cerr << "trajan scheduler: dropping worker " << c.index << ": " << e.what() << "\n";
        c.alive = false;
        c.sock.close();
        c.awaiting_ack.reset();
        on_lost(c, e.what());
      }
    }
  }

  static void flush(Conn& c) {
    while (c.out_off < c.out.size()) {
      const auto n = net::send_some(c.sock, std::span(c.out).subspan(c.out_off));
      if (n == 0) break;
      c.out_off += n;
    }
    if (c.out_off == c.out.size()) {
      c.out.clear();
      c.out_off = 0;
    }
  }

  void spawn() {
    std::vector<std::string> args = config_.worker_command;
    if (args.empty()) args = {"/proc/self/exe", "worker"};
    args.insert(args.end(), {"--connect", endpoint_.str(), "--budget",
                             std::to_string(config_.memory_budget)});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (const int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
        rc != 0) {
      throw ResourceError("cannot spawn worker '" + args[0] + "': " + std::strerror(rc));
    }
    children_.push_back(pid);
  }

  void reap_children() {
    const auto deadline = Clock::now() + std::chrono::seconds(3);
    for (auto pid : children_) {
      while (true) {
        int status = 0;
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid || r < 0) break;
        if (Clock::now() >= deadline) {
          ::kill(pid, SIGKILL);
          ::waitpid(pid, &status, 0);
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
  }

  EngineConfig config_;
  net::Socket listener_;
  net::Endpoint endpoint_;
  std::vector<Conn> conns_;
  std::vector<pid_t> children_;
};

}  // namespace

// ---------------------------------------------------------------------------

Engine::Engine(EngineConfig config, std::shared_ptr<const TaskRegistry> registry)
    : config_(std::move(config)), registry_(std::move(registry)) {
  config_.validate();
  if (!registry_) throw UsageError("engine needs a task registry");
  if (config_.backend == Backend::in_process) {
    impl_ = std::make_unique<InProcessBackend>(config_.workers, registry_);
  } else {
    impl_ = std::make_unique<MultiProcessBackend>(config_);
  }
}

Engine::~Engine() = default;

std::vector<TaskResult> Engine::submit_map(std::vector<TaskSpec> tasks) {
  std::unordered_set<std::uint64_t> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.id).second) {
      throw UsageError("duplicate task id " + std::to_string(t.id));
    }
    if (t.payload.size() > config_.memory_budget) {
      throw ResourceError("task " + std::to_string(t.id) + " payload of " +
                          std::to_string(t.payload.size()) +
                          " bytes exceeds worker memory budget of " +
                          std::to_string(config_.memory_budget));
    }
  }
  auto results = impl_->run(tasks);
  std::sort(results.begin(), results.end(),
            [](const TaskResult& a, const TaskResult& b) { return a.id < b.id; });
  return results;
}

BroadcastHandle Engine::broadcast(Bytes data) {
  if (data.size() > config_.memory_budget) {
    throw ResourceError("broadcast of " + std::to_string(data.size()) +
                        " bytes exceeds worker memory budget of " +
                        std::to_string(config_.memory_budget));
  }
  BroadcastHandle h{next_handle_++, data.size()};
  const auto t0 = Clock::now();
  impl_->broadcast(h.id, std::make_shared<const Bytes>(std::move(data)));
  BenchRecord rec;
  rec.op = "broadcast";
  rec.scale = "bytes=" + std::to_string(h.size);
  rec.workers = config_.workers;
  rec.repeat = records_.size();
  rec.wall_seconds = std::max(seconds_since(t0), 1e-9);
  rec.bytes_shuffled = h.size * config_.workers;
  records_.push_back(rec);
  return h;
}

void Engine::await_workers() { impl_->await_workers(); }

std::string Engine::listen_address() const { return impl_->address(); }

std::uint64_t gathered_bytes(std::span<const TaskResult> results) {
  std::uint64_t total = 0;
  for (const auto& r : results) total += r.payload_size;
  return total;
}

void require_ok(std::span<const TaskResult> results) {
  for (const auto& r : results) {
    if (!r.ok()) throw TaskError("task " + std::to_string(r.id) + " failed: " + r.error_message());
  }
}

Bytes reduce(std::span<const TaskResult> results, const Combine& combine) {
  std::vector<const TaskResult*> order;
  for (const auto& r : results) {
    if (!r.ok()) {
      throw UsageError("cannot reduce: task " + std::to_string(r.id) + " failed: " +
                       r.error_message());
    }
    order.push_back(&r);
  }
  if (order.empty()) return {};
  std::sort(order.begin(), order.end(),
            [](const TaskResult* a, const TaskResult* b) { return a->id < b->id; });
  Bytes acc = order.front()->payload;
  for (std::size_t i = 1; i < order.size(); ++i) acc = combine(std::move(acc), order[i]->payload);
  return acc;
}

namespace {

std::vector<TaskSpec> noop_tasks(std::size_t n) {
  std::vector<TaskSpec> tasks(n);
  for (std::size_t i = 0; i < n; ++i) tasks[i].id = i;
  return tasks;
}

BenchRecord throughput_record(const char* op, const EngineConfig& config, std::size_t n,
                              std::size_t repeat, double wall,
                              std::span<const TaskResult> results) {
  require_ok(results);
  if (results.size() != n) throw TaskError("throughput run lost results");
  BenchRecord rec;
  rec.op = op;
  rec.scale = "tasks=" + std::to_string(n) + ";backend=" + to_string(config.backend);
  rec.workers = config.workers;
  rec.repeat = repeat;
  rec.wall_seconds = std::max(wall, 1e-9);
  rec.bytes_shuffled = gathered_bytes(results);
  return rec;
}

}  // namespace

BenchRecord throughput_benchmark(Engine& engine, std::size_t n_tasks, std::size_t repeat) {
  if (n_tasks == 0) throw UsageError("throughput benchmark needs at least one task");
  engine.await_workers();
  auto tasks = noop_tasks(n_tasks);
  const auto t0 = Clock::now();
  auto results = engine.submit_map(std::move(tasks));
  const double wall = seconds_since(t0);
  return throughput_record("throughput_warm", engine.config(), n_tasks, repeat, wall, results);
}

BenchRecord throughput_benchmark_cold(const EngineConfig& config,
                                      std::shared_ptr<const TaskRegistry> registry,
                                      std::size_t n_tasks, std::size_t repeat) {
  if (n_tasks == 0) throw UsageError("throughput benchmark needs at least one task");
  auto tasks = noop_tasks(n_tasks);
  const auto t0 = Clock::now();
  Engine engine(config, std::move(registry));
  auto results = engine.submit_map(std::move(tasks));
  const double wall = seconds_since(t0);
  return throughput_record("throughput_cold", config, n_tasks, repeat, wall, results);
}

}  // namespace trajan
