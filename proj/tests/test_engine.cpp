#include <doctest.h>

#include <poll.h>

#include <atomic>
#include <future>
#include <thread>

#include "net.hpp"
#include "trajan/engine.hpp"
#include "trajan/errors.hpp"
#include "trajan/rng.hpp"
#include "trajan/tasks.hpp"
#include "trajan/wire.hpp"
#include "trajan/worker.hpp"

using namespace trajan;
using namespace std::chrono_literals;

namespace {

EngineConfig config_for(Backend backend, std::size_t workers) {
  EngineConfig c;
  c.backend = backend;
  c.workers = workers;
  c.worker_command = {TRAJAN_EXE, "worker"};
  return c;
}

Bytes text(const std::string& s) { return Bytes(s.begin(), s.end()); }

std::vector<TaskSpec> echo_tasks(std::size_t n) {
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < n; ++i) {
    // Submit in reverse id order; results must come back sorted.
    const auto id = n - 1 - i;
    tasks.push_back({id, TaskKind::echo, text("task " + std::to_string(id))});
  }
  return tasks;
}

// Registry for in-thread workers: nothing in it may end the process.
std::shared_ptr<const TaskRegistry> safe_registry() {
  auto reg = std::make_shared<TaskRegistry>();
  reg->add(TaskKind::noop, [](auto, const TaskContext&) { return Bytes{}; });
  reg->add(TaskKind::echo, [](auto in, const TaskContext&) { return Bytes(in.begin(), in.end()); });
  reg->add(TaskKind::broadcast_digest, [](auto in, const TaskContext& ctx) {
    ByteReader r(in);
    const auto d = ctx.broadcast(r.u64());
    return Bytes(d.begin(), d.end());
  });
  return reg;
}

// Reads frames until one is complete or the peer goes quiet.
std::optional<wire::Message> read_frame(const net::Socket& s, wire::FrameDecoder& dec,
                                        std::chrono::milliseconds wait) {
  const auto deadline = std::chrono::steady_clock::now() + wait;
  std::uint8_t buf[4096];
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto m = dec.next()) return m;
    pollfd p{s.fd(), POLLIN, 0};
    if (::poll(&p, 1, 20) <= 0) continue;
    const long n = net::recv_some(s, buf);
    if (n == 0) return std::nullopt;
    if (n > 0) dec.feed(std::span(buf, static_cast<std::size_t>(n)));
  }
  return std::nullopt;
}

net::Socket accept_within(const net::Socket& listener, std::chrono::milliseconds wait) {
  const auto deadline = std::chrono::steady_clock::now() + wait;
  while (std::chrono::steady_clock::now() < deadline) {
    auto s = net::accept_nonblocking(listener);
    if (s.valid()) return s;
    std::this_thread::sleep_for(1ms);
  }
  return {};
}

Bytes mutate(Bytes b, Xorshift64Star& rng) {
  const auto kind = rng.below(5);
  if (b.empty()) b.push_back(0);
  switch (kind) {
    case 0:  // flip bits
      for (int i = 0, n = 1 + int(rng.below(4)); i < n; ++i)
        b[rng.below(b.size())] ^= std::uint8_t(1u << rng.below(8));
      break;
    case 1:  // truncate
      b.resize(rng.below(b.size()));
      break;
    case 2:  // append junk
      for (int i = 0, n = 1 + int(rng.below(16)); i < n; ++i) b.push_back(std::uint8_t(rng.next()));
      break;
    case 3:  // overwrite a header byte
      b[rng.below(std::min<std::size_t>(b.size(), wire::kHeaderSize))] = std::uint8_t(rng.next());
      break;
    default:  // random bytes
      for (auto& x : b) x = std::uint8_t(rng.next());
      break;
  }
  return b;
}

}  // namespace

TEST_CASE("task registry") {
  TaskRegistry reg;
  reg.add(TaskKind::echo, [](auto in, const TaskContext&) { return Bytes(in.begin(), in.end()); });
  struct Ctx : TaskContext {
    std::span<const std::uint8_t> broadcast(std::uint64_t) const override { return {}; }
    std::size_t worker_index() const override { return 0; }
    bool isolated() const override { return false; }
  } ctx;
  CHECK(reg.run(1, text("x"), ctx) == text("x"));
  CHECK_THROWS_AS(reg.run(99, {}, ctx), UsageError);
}

TEST_CASE("engine config validation") {
  EngineConfig c;
  c.workers = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.workers = 1;
  c.backend = Backend::multi_process;
  c.listen_address = "nonsense";
  CHECK_THROWS_AS(c.validate(), UsageError);
  CHECK(parse_backend("multi-process") == Backend::multi_process);
  CHECK_THROWS_AS(parse_backend("mpi"), UsageError);
}

TEST_CASE("map, broadcast and reduce on both backends") {
  for (auto backend : {Backend::in_process, Backend::multi_process}) {
    const std::string backend_name = to_string(backend);
    CAPTURE(backend_name);
    Engine engine(config_for(backend, 3), default_registry());
    const auto results = engine.submit_map(echo_tasks(50));
    REQUIRE(results.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(results[i].id == i);
      CHECK(results[i].ok());
      CHECK(results[i].payload == text("task " + std::to_string(i)));
      CHECK(results[i].payload_size == results[i].payload.size());
    }
    std::uint64_t want = 0;
    for (const auto& r : results) want += r.payload.size();
    CHECK(gathered_bytes(results) == want);

    const auto folded = reduce(results, [](Bytes acc, std::span<const std::uint8_t> next) {
      acc.insert(acc.end(), next.begin(), next.begin() + 1);
      return acc;
    });
    // Seeded with the first payload, then one byte from each later task.
    auto want_fold = text("task 0");
    want_fold.insert(want_fold.end(), 49, 't');
    CHECK(folded == want_fold);
    CHECK(reduce({}, [](Bytes a, auto) { return a; }).empty());

    const auto h = engine.broadcast(text("shared table"));
    std::vector<TaskSpec> probes;
    for (std::uint64_t i = 0; i < 9; ++i) {
      TaskSpec t{i, TaskKind::broadcast_digest, {}};
      ByteWriter(t.payload).u64(h.id);
      probes.push_back(t);
    }
    for (const auto& r : engine.submit_map(probes)) CHECK(r.payload == text("shared table"));
    CHECK(engine.records().back().op == "broadcast");
    CHECK(engine.records().back().bytes_shuffled == 12 * 3);

    TaskSpec unknown{0, TaskKind::broadcast_digest, {}};
    ByteWriter(unknown.payload).u64(999);
    CHECK_FALSE(engine.submit_map({unknown})[0].ok());

    CHECK(engine.submit_map({}).empty());
  }
}

TEST_CASE("task failures are reported per task") {
  for (auto backend : {Backend::in_process, Backend::multi_process}) {
    Engine engine(config_for(backend, 2), default_registry());
    auto tasks = echo_tasks(5);
    tasks.push_back({7, TaskKind::fail, text("deliberate")});
    const auto results = engine.submit_map(tasks);
    CHECK(results.back().id == 7);
    CHECK_FALSE(results.back().ok());
    CHECK(results.back().error_message() == "deliberate");
    CHECK_THROWS_WITH_AS(require_ok(results), doctest::Contains("task 7"), TaskError);
    CHECK_THROWS_AS(reduce(results, [](Bytes a, auto) { return a; }), UsageError);
  }
}

TEST_CASE("submit_map preconditions") {
  EngineConfig c = config_for(Backend::in_process, 1);
  c.memory_budget = 16;
  Engine engine(c, default_registry());
  CHECK_THROWS_AS(engine.submit_map({{1, TaskKind::noop, {}}, {1, TaskKind::noop, {}}}), UsageError);
  CHECK_THROWS_AS(engine.submit_map({{1, TaskKind::echo, Bytes(17)}}), ResourceError);
  CHECK_THROWS_AS(engine.broadcast(Bytes(17)), ResourceError);
  CHECK(engine.records().empty());
}

TEST_CASE("a task lost with its worker is retried once, then reported") {
  Engine engine(config_for(Backend::multi_process, 3), default_registry());
  auto tasks = echo_tasks(20);
  tasks.push_back({100, TaskKind::abort_worker, {}});
  const auto results = engine.submit_map(tasks);
  REQUIRE(results.size() == 21);
  for (std::size_t i = 0; i < 20; ++i) CHECK(results[i].ok());
  CHECK_FALSE(results[20].ok());
  CHECK(results[20].error_message().find("lost twice") != std::string::npos);
  // The surviving worker keeps serving.
  CHECK(engine.submit_map(echo_tasks(4)).size() == 4);
}

TEST_CASE("in-process abort_worker fails cleanly") {
  Engine engine(config_for(Backend::in_process, 1), default_registry());
  CHECK_FALSE(engine.submit_map({{0, TaskKind::abort_worker, {}}})[0].ok());
}

TEST_CASE("throughput benchmarks produce records") {
  for (auto backend : {Backend::in_process, Backend::multi_process}) {
    const auto cfg = config_for(backend, 2);
    const auto cold = throughput_benchmark_cold(cfg, default_registry(), 200);
    CHECK(cold.op == "throughput_cold");
    CHECK(cold.wall_seconds > 0);
    Engine engine(cfg, default_registry());
    const auto warm = throughput_benchmark(engine, 200, 1);
    CHECK(warm.op == "throughput_warm");
    CHECK(warm.repeat == 1);
    CHECK(warm.workers == 2);
  }
}

TEST_CASE("frame decoder") {
  wire::FrameDecoder dec(1024);
  const auto f = wire::encode_frame(wire::MessageType::task, wire::encode_task(9, 1, text("abc")));
  CHECK(f.size() == 9 + 9 + 3);
  CHECK(Bytes(f.begin(), f.begin() + 9) == Bytes{'T', 'P', 'W', '1', 2, 12, 0, 0, 0});
  // Byte-at-a-time delivery.
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK_FALSE(dec.next().has_value());
    dec.feed(std::span(f).subspan(i, 1));
  }
  const auto m = dec.next();
  REQUIRE(m);
  CHECK(m->type == wire::MessageType::task);
  const auto t = wire::decode_task(m->payload);
  CHECK(t.id == 9);
  CHECK(Bytes(t.input.begin(), t.input.end()) == text("abc"));
  CHECK_FALSE(dec.mid_frame());

  const auto r = wire::encode_result(4, 1, 0.25, text("bad"));
  const auto rm = wire::decode_result(r);
  CHECK(rm.id == 4);
  CHECK(rm.status == 1);
  CHECK(rm.wall_seconds == 0.25);
  auto bad_status = r;
  bad_status[8] = 2;
  CHECK_THROWS_AS(wire::decode_result(bad_status), FormatError);

  wire::FrameDecoder d2(4);
  d2.feed(wire::encode_frame(wire::MessageType::ack, Bytes(5)));
  CHECK_THROWS_AS(d2.next(), ProtocolError);
  wire::FrameDecoder d3(64);
  d3.feed(text("TPX"));
  CHECK_THROWS_AS(d3.next(), ProtocolError);
  wire::FrameDecoder d4(64);
  d4.feed(Bytes{'T', 'P', 'W', '1', 9});
  CHECK_THROWS_AS(d4.next(), ProtocolError);
}

TEST_CASE("frame decoder survives random mutations") {
  Xorshift64Star rng(99);
  const std::vector<Bytes> valid = {
      wire::encode_frame(wire::MessageType::task, wire::encode_task(1, 1, text("payload"))),
      wire::encode_frame(wire::MessageType::result, wire::encode_result(1, 0, 0.5, text("out"))),
      wire::encode_frame(wire::MessageType::ack, {}),
  };
  for (int i = 0; i < 5000; ++i) {
    wire::FrameDecoder dec(256);
    dec.feed(mutate(valid[rng.below(valid.size())], rng));
    try {
      while (auto m = dec.next()) {
        if (m->type == wire::MessageType::task) wire::decode_task(m->payload);
        if (m->type == wire::MessageType::result) wire::decode_result(m->payload);
      }
    } catch (const Error&) {
    }
  }
}

TEST_CASE("worker: register, broadcast, task and shutdown") {
  auto [listener, ep] = net::listen_tcp("127.0.0.1:0");
  auto fut = std::async(std::launch::async,
                        [addr = ep.str()] { return worker_serve(addr, 1 << 20, *safe_registry()); });
  auto s = accept_within(listener, 5s);
  REQUIRE(s.valid());
  wire::FrameDecoder dec(1 << 20);
  auto reg = read_frame(s, dec, 5s);
  REQUIRE(reg);
  CHECK(reg->type == wire::MessageType::register_worker);
  CHECK(ByteReader(reg->payload).u64() == (1u << 20));
  net::send_all(s, wire::encode_frame(wire::MessageType::ack, {}));

  Bytes bc;
  ByteWriter(bc).u64(5);
  ByteWriter(bc).bytes(text("table"));
  net::send_all(s, wire::encode_frame(wire::MessageType::broadcast, bc));
  auto ack = read_frame(s, dec, 5s);
  REQUIRE(ack);
  CHECK(ack->type == wire::MessageType::ack);
  CHECK(ByteReader(ack->payload).u64() == 5);

  Bytes probe;
  ByteWriter(probe).u64(5);
  net::send_all(s, wire::encode_frame(wire::MessageType::task, wire::encode_task(3, 2, probe)));
  auto res = read_frame(s, dec, 5s);
  REQUIRE(res);
  const auto rm = wire::decode_result(res->payload);
  CHECK(rm.id == 3);
  CHECK(rm.status == 0);
  CHECK(Bytes(rm.output.begin(), rm.output.end()) == text("table"));

  net::send_all(s, wire::encode_frame(wire::MessageType::shutdown, {}));
  REQUIRE(fut.wait_for(5s) == std::future_status::ready);
  CHECK(fut.get() == 0);
}

TEST_CASE("worker process exits cleanly on REGISTER then SHUTDOWN") {
  EngineConfig c = config_for(Backend::multi_process, 1);
  { Engine engine(c, default_registry()); }  // destructor sends SHUTDOWN and reaps
  CHECK(true);
}

TEST_CASE("worker survives mutated scheduler frames") {
  Xorshift64Star rng(1234);
  const auto registry = safe_registry();
  for (int i = 0; i < 150; ++i) {
    auto [listener, ep] = net::listen_tcp("127.0.0.1:0");
    auto fut = std::async(std::launch::async,
                          [addr = ep.str(), registry] { return worker_serve(addr, 4096, *registry); });
    {
      auto s = accept_within(listener, 5s);
      REQUIRE(s.valid());
      wire::FrameDecoder dec(1 << 20);
      REQUIRE(read_frame(s, dec, 5s));
      Bytes stream = wire::encode_frame(wire::MessageType::ack, {});
      Bytes valid;
      switch (rng.below(3)) {
        case 0: valid = wire::encode_frame(wire::MessageType::task, wire::encode_task(1, 1, text("hi"))); break;
        case 1: {
          Bytes bc;
          ByteWriter(bc).u64(1);
          ByteWriter(bc).bytes(text("data"));
          valid = wire::encode_frame(wire::MessageType::broadcast, bc);
          break;
        }
        default: valid = wire::encode_frame(wire::MessageType::shutdown, {}); break;
      }
      const auto bad = mutate(valid, rng);
      if (rng.below(4) == 0) stream = mutate(stream, rng);
      stream.insert(stream.end(), bad.begin(), bad.end());
      try {
        net::send_all(s, stream);
      } catch (const IoError&) {
      }
      // Drain replies briefly, then hang up.
      read_frame(s, dec, 20ms);
    }
    REQUIRE(fut.wait_for(5s) == std::future_status::ready);
    const int rc = fut.get();
    CHECK((rc == 0 || rc == 1));
  }
}

TEST_CASE("scheduler survives mutated worker frames") {
  Xorshift64Star rng(4321);
  for (int i = 0; i < 150; ++i) {
    EngineConfig c = config_for(Backend::multi_process, 1);
    c.spawn_workers = false;
    c.startup_timeout = 500ms;
    Engine engine(c, safe_registry());
    const auto addr = engine.listen_address();
    const bool corrupt_register = rng.below(4) == 0;
    const auto seed = rng.next();
    std::thread fake([addr, corrupt_register, seed] {
      Xorshift64Star r(seed);
      auto s = net::connect_tcp(addr, 2s);
      wire::FrameDecoder dec(1 << 20);
      Bytes reg;
      ByteWriter(reg).u64(4096);
      auto hello = wire::encode_frame(wire::MessageType::register_worker, reg);
      try {
        if (corrupt_register) {
          net::send_all(s, mutate(hello, r));
          return;
        }
        net::send_all(s, hello);
        if (!read_frame(s, dec, 2s)) return;       // ACK
        auto task = read_frame(s, dec, 2s);
        if (!task) return;
        const auto t = wire::decode_task(task->payload);
        auto reply = wire::encode_frame(wire::MessageType::result,
                                        wire::encode_result(t.id, 0, 0.0, t.input));
        net::send_all(s, mutate(reply, r));
        read_frame(s, dec, 20ms);
      } catch (const Error&) {
      }
    });
    try {
      const auto results = engine.submit_map({{1, TaskKind::echo, text("x")}});
      CHECK(results.size() == 1);
    } catch (const ResourceError&) {
      // Registration was rejected and no worker arrived in time.
    }
    fake.join();
  }
}
