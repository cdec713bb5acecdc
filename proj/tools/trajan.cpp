// trajan: generation, analysis and benchmark driver.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajan/csv.hpp"
#include "trajan/engine.hpp"
#include "trajan/errors.hpp"
#include "trajan/generate.hpp"
#include "trajan/leaflet.hpp"
#include "trajan/psa.hpp"
#include "trajan/tasks.hpp"
#include "trajan/trjb.hpp"
#include "trajan/worker.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace trajan {
namespace {

constexpr const char* kToolVersion = "0.1.0";

enum Exit { kOk = 0, kRuntime = 1, kUsage = 2, kResource = 3 };

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// Resolved invocation of one subcommand. `args` replays the run when
// followed by "-o <dir>".
struct Manifest {
  std::string subcommand;
  json parameters = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> args;
  std::string started = utc_timestamp();

  void write(const fs::path& dir) const {
    json j;
    j["subcommand"] = subcommand;
    j["parameters"] = parameters;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["tool_version"] = kToolVersion;
    j["start_timestamp"] = started;
    j["args"] = args;
    write_file(dir / "manifest.json", [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }
};

void write_bench(const fs::path& dir, std::span<const BenchRecord> records) {
  write_file(dir / "bench.csv", [&](std::ostream& out) { write_results_csv(records, out); });
}

// ---------------------------------------------------------------------------
// Engine flags shared by psa, leaflet and throughput.

struct EngineFlags {
  std::size_t workers = 1;
  std::string backend = "in-process";
  std::string listen = "127.0.0.1:0";
  std::uint64_t memory_budget = EngineConfig{}.memory_budget;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--workers", workers, "Worker count")
        ->envname("TRAJAN_WORKERS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--backend", backend, "in-process or multi-process")
        ->check(CLI::IsMember({"in-process", "multi-process"}))
        ->capture_default_str();
    cmd.add_option("--listen", listen, "Scheduler address (multi-process)")
        ->envname("TRAJAN_LISTEN")
        ->capture_default_str();
    cmd.add_option("--memory-budget", memory_budget, "Per-worker memory budget in bytes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  EngineConfig config() const {
    EngineConfig c;
    c.backend = parse_backend(backend);
    c.workers = workers;
    c.listen_address = listen;
    c.memory_budget = memory_budget;
    return c;
  }

  void record(Manifest& m) const {
    m.parameters["workers"] = workers;
    m.parameters["backend"] = backend;
    m.parameters["memory_budget"] = memory_budget;
    m.args.insert(m.args.end(), {"--workers", std::to_string(workers), "--backend", backend,
                                 "--memory-budget", std::to_string(memory_budget)});
  }
};

// ---------------------------------------------------------------------------

struct GenerateBilayer {
  std::size_t atoms = 0;
  double separation = 0.0;
  double spacing = 1.0;
  double jitter = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> cutoff;
  std::string out;

  void run() const {
    BilayerSpec spec{atoms, separation, spacing, jitter, seed};
    const auto bilayer = generate_bilayer(spec, cutoff);
    const auto dir = prepare_out_dir(out);
    write_system_file(bilayer.system, dir / "system.trjb");
    write_file(dir / "truth.csv",
               [&](std::ostream& o) { write_components_csv(bilayer.truth, o); });

    Manifest m;
    m.subcommand = "generate bilayer";
    m.seed = seed;
    m.parameters = {{"atoms_per_leaflet", atoms}, {"separation", separation},
                    {"spacing", spacing},         {"jitter", jitter},
                    {"cutoff", cutoff ? json(*cutoff) : json(nullptr)}};
    m.args = {"generate", "bilayer", "--atoms", std::to_string(atoms),
              "--separation", fmt_double(separation), "--spacing", fmt_double(spacing),
              "--jitter", fmt_double(jitter), "--seed", std::to_string(seed)};
    if (cutoff) m.args.insert(m.args.end(), {"--cutoff", fmt_double(*cutoff)});
    m.write(dir);
    std::cout << bilayer.system.n_atoms() << " atoms written to " << (dir / "system.trjb").string()
              << '\n';
  }
};

struct GenerateEnsemble {
  std::size_t trajectories = 0;
  std::size_t frames = 0;
  std::size_t atoms = 0;
  std::uint64_t seed = 0;
  std::string out;

  void run() const {
    const auto dir = prepare_out_dir(out);
    // One trajectory at a time keeps memory at a single trajectory even for
    // the large shapes; ids and contents match generate_ensemble.
    for (std::size_t i = 0; i < trajectories; ++i) {
      auto t = generate_ensemble_member(i, frames, atoms, seed);
      write_trjb_file(t, dir / (t.id + ".trjb"));
    }
    Manifest m;
    m.subcommand = "generate ensemble";
    m.seed = seed;
    m.parameters = {{"trajectories", trajectories}, {"frames", frames}, {"atoms", atoms}};
    m.args = {"generate", "ensemble", "--trajectories", std::to_string(trajectories),
              "--frames", std::to_string(frames), "--atoms", std::to_string(atoms),
              "--seed", std::to_string(seed)};
    m.write(dir);
    std::cout << trajectories << " trajectories written to " << dir.string() << '\n';
  }
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".trjb") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.emplace_back(in);
    }
  }
  for (auto& p : paths) {
    if (!fs::exists(p)) throw IoError("input not found: " + p.string());
    p = fs::absolute(p);
  }
  return paths;
}

struct PsaCommand {
  std::vector<std::string> inputs;
  std::size_t block = 0;
  std::string variant = "naive";
  bool full = false;
  EngineFlags engine;
  std::string out;

  void run() const {
    const auto paths = expand_inputs(inputs);
    if (paths.empty()) throw UsageError("psa: no input trajectories");
    const std::size_t b = block == 0 ? paths.size() : block;
    PsaOptions options{parse_variant(variant), !full};
    partition_2d(paths.size(), b);
    const auto dir = prepare_out_dir(out);

    Engine eng(engine.config(), default_registry());
    eng.await_workers();
    const auto t0 = std::chrono::steady_clock::now();
    const auto matrix = psa_matrix_files(paths, b, eng, options);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_file(dir / "matrix.csv", [&](std::ostream& o) { write_matrix_csv(matrix, o); });
    const std::size_t k = paths.size() / b;
    BenchRecord rec{"psa_" + std::string(to_string(options.variant)),
                    "trajectories=" + std::to_string(paths.size()) + ";block=" + std::to_string(b) +
                        ";tasks=" + std::to_string(options.symmetric ? k * (k + 1) / 2 : k * k),
                    engine.workers, 0, wall, 0};
    write_bench(dir, std::span(&rec, 1));

    Manifest m;
    m.subcommand = "psa";
    m.parameters = {{"inputs", json::array()}, {"block", b}, {"variant", variant},
                    {"symmetric", !full}};
    for (const auto& p : paths) m.parameters["inputs"].push_back(p.string());
    m.args = {"psa"};
    for (const auto& p : paths) m.args.push_back(p.string());
    m.args.insert(m.args.end(), {"--block", std::to_string(b), "--variant", variant});
    if (full) m.args.push_back("--full");
    engine.record(m);
    m.write(dir);
    std::cout << "psa " << paths.size() << "x" << paths.size() << " matrix in " << fmt_double(wall)
              << " s\n";
  }
};

struct LeafletCommand {
  std::string input;
  double cutoff = 0.0;
  int approach = 3;
  std::size_t block = 0;
  bool shared_tree = false;
  std::size_t leaf_size = 40;
  EngineFlags engine;
  std::string out;

  void run() const {
    if (!(cutoff > 0.0)) throw UsageError("--cutoff must be > 0");
    const auto which = parse_approach(approach);
    const auto system = read_system_file(input);
    LeafletOptions options;
    options.cutoff = cutoff;
    options.block = block == 0 ? system.n_atoms() : block;
    options.shared_tree = shared_tree;
    options.leaf_size = leaf_size;
    const auto dir = prepare_out_dir(out);

    Engine eng(engine.config(), default_registry());
    eng.await_workers();
    const auto run = run_leaflet(system, which, options, eng);

    write_file(dir / "components.csv",
               [&](std::ostream& o) { write_components_csv(run.components, o); });
    const auto summary = component_summary(run.components);
    write_file(dir / "summary.txt", [&](std::ostream& o) { o << summary << '\n'; });
    std::vector<BenchRecord> records = eng.records();
    records.push_back(run.record(engine.workers));
    write_bench(dir, records);

    Manifest m;
    m.subcommand = "leaflet";
    m.parameters = {{"input", fs::absolute(input).string()},
                    {"cutoff", cutoff},
                    {"approach", approach},
                    {"block", options.block},
                    {"shared_tree", shared_tree},
                    {"leaf_size", leaf_size}};
    m.args = {"leaflet", "--input", fs::absolute(input).string(), "--cutoff", fmt_double(cutoff),
              "--approach", std::to_string(approach), "--block", std::to_string(options.block),
              "--leaf-size", std::to_string(leaf_size)};
    if (shared_tree) m.args.push_back("--shared-tree");
    engine.record(m);
    m.write(dir);
    std::cout << summary << " bytes_shuffled=" << run.bytes_shuffled << '\n';
  }
};

struct ThroughputCommand {
  std::size_t tasks = 0;
  std::size_t repeats = 1;
  EngineFlags engine;
  std::string out;

  void run() const {
    if (tasks == 0) throw UsageError("--tasks must be >= 1");
    const auto dir = prepare_out_dir(out);
    const auto registry = default_registry();
    std::vector<BenchRecord> records;
    for (std::size_t r = 0; r < repeats; ++r) {
      records.push_back(throughput_benchmark_cold(engine.config(), registry, tasks, r));
    }
    {
      Engine eng(engine.config(), registry);
      eng.await_workers();
      for (std::size_t r = 0; r < repeats; ++r) {
        records.push_back(throughput_benchmark(eng, tasks, r));
      }
    }
    write_bench(dir, records);

    Manifest m;
    m.subcommand = "throughput";
    m.parameters = {{"tasks", tasks}, {"repeats", repeats}};
    m.args = {"throughput", "--tasks", std::to_string(tasks), "--repeats",
              std::to_string(repeats)};
    engine.record(m);
    m.write(dir);
    for (const auto& r : records) {
      std::cout << r.op << " workers=" << r.workers << " tasks/s="
                << fmt_double(static_cast<double>(tasks) / r.wall_seconds) << '\n';
    }
  }
};

// ---------------------------------------------------------------------------
// `--config FILE`: key=value lines become "--key value" for every key not
// already given on the command line. "true"/"false" toggle flags.

std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> file;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (!file) return kept;

  std::ifstream in(*file);
  if (!in) throw UsageError("cannot read config file " + *file);
  auto given = [&](const std::string& flag) {
    return std::any_of(kept.begin(), kept.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*file + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (key.empty() || given(flag)) continue;
    if (value == "true") {
      kept.push_back(flag);
    } else if (value != "false") {
      kept.push_back(flag);
      kept.push_back(value);
    }
  }
  return kept;
}

int run_cli(std::vector<std::string> args);

int replay(const std::string& manifest_path, const std::string& out) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
  if (!j.contains("args") || !j["args"].is_array()) {
    throw FormatError(manifest_path + ": no args array");
  }
  std::vector<std::string> args{"trajan"};
  for (const auto& a : j["args"]) args.push_back(a.get<std::string>());
  if (!args.empty() && args[1] == "replay") throw UsageError("cannot replay a replay");
  args.insert(args.end(), {"-o", out});
  return run_cli(args);
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Trajectory analysis on a task-parallel engine", "trajan"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", kToolVersion);

  auto* generate = app.add_subcommand("generate", "Write synthetic inputs");
  generate->require_subcommand(1);

  GenerateBilayer bilayer;
  auto* gb = generate->add_subcommand("bilayer", "Two-leaflet membrane system");
  gb->add_option("--atoms", bilayer.atoms, "Atoms per leaflet")->required()->check(CLI::PositiveNumber);
  gb->add_option("--separation", bilayer.separation, "Sheet separation (nm)")->required();
  gb->add_option("--spacing", bilayer.spacing, "Lattice spacing (nm)")->capture_default_str();
  gb->add_option("--jitter", bilayer.jitter, "Max per-axis jitter (nm)")->capture_default_str();
  gb->add_option("--seed", bilayer.seed, "Seed (decimal)")->capture_default_str();
  gb->add_option("--cutoff", bilayer.cutoff, "Cutoff to validate against (default 1.5*spacing)");
  gb->add_option("-o,--out", bilayer.out, "Output directory")->required();

  GenerateEnsemble ensemble;
  auto* ge = generate->add_subcommand("ensemble", "Random-walk trajectory ensemble");
  ge->add_option("--trajectories", ensemble.trajectories)->required()->check(CLI::PositiveNumber);
  ge->add_option("--frames", ensemble.frames)->required()->check(CLI::PositiveNumber);
  ge->add_option("--atoms", ensemble.atoms)->required()->check(CLI::PositiveNumber);
  ge->add_option("--seed", ensemble.seed, "Seed (decimal)")->capture_default_str();
  ge->add_option("-o,--out", ensemble.out, "Output directory")->required();

  PsaCommand psa;
  auto* ps = app.add_subcommand("psa", "All-pairs Hausdorff distance matrix");
  ps->add_option("inputs", psa.inputs, "TRJB files or directories")->required();
  ps->add_option("--block", psa.block, "Trajectories per block (default: all)");
  ps->add_option("--variant", psa.variant, "naive or early-break")
      ->check(CLI::IsMember({"naive", "early-break"}))
      ->capture_default_str();
  ps->add_flag("--full", psa.full, "Compute all k^2 blocks instead of mirroring");
  psa.engine.add_to(*ps);
  ps->add_option("-o,--out", psa.out, "Output directory")->required();

  LeafletCommand leaflet;
  auto* lf = app.add_subcommand("leaflet", "Leaflet identification by connected components");
  lf->add_option("--input", leaflet.input, "System TRJB file")->required();
  lf->add_option("--cutoff", leaflet.cutoff, "Edge cutoff (nm)")->required();
  lf->add_option("--approach", leaflet.approach, "1, 2, 3 or 4")->capture_default_str();
  lf->add_option("--block", leaflet.block, "Atoms per partition (default: all)");
  lf->add_flag("--shared-tree", leaflet.shared_tree, "Approach 4: broadcast one global tree");
  lf->add_option("--leaf-size", leaflet.leaf_size)->check(CLI::PositiveNumber)->capture_default_str();
  leaflet.engine.add_to(*lf);
  lf->add_option("-o,--out", leaflet.out, "Output directory")->required();

  ThroughputCommand throughput;
  auto* tp = app.add_subcommand("throughput", "Zero-workload task throughput");
  tp->add_option("--tasks", throughput.tasks)->required();
  tp->add_option("--repeats", throughput.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  throughput.engine.add_to(*tp);
  tp->add_option("-o,--out", throughput.out, "Output directory")->required();

  std::string connect;
  std::uint64_t budget = EngineConfig{}.memory_budget;
  auto* wk = app.add_subcommand("worker", "Serve tasks for a scheduler");
  wk->add_option("--connect", connect, "Scheduler host:port")->required();
  wk->add_option("--budget", budget, "Memory budget (bytes)")->capture_default_str();

  std::string manifest, replay_out;
  auto* rp = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  rp->add_option("manifest", manifest)->required();
  rp->add_option("-o,--out", replay_out, "Output directory")->required();

  args = apply_config(std::move(args));
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (gb->parsed()) bilayer.run();
  else if (ge->parsed()) ensemble.run();
  else if (ps->parsed()) psa.run();
  else if (lf->parsed()) leaflet.run();
  else if (tp->parsed()) throughput.run();
  else if (wk->parsed()) return worker_serve(connect, budget, *default_registry());
  else if (rp->parsed()) return replay(manifest, replay_out);
  return kOk;
}

}  // namespace
}  // namespace trajan

int main(int argc, char** argv) {
  using namespace trajan;
  try {
    return run_cli(std::vector<std::string>(argv, argv + argc));
  } catch (const UsageError& e) {
    std::cerr << "trajan: " << e.what() << '\n';
    return kUsage;
  } catch (const ResourceError& e) {
    std::cerr << "trajan: resource limit: " << e.what() << '\n';
    return kResource;
  } catch (const std::exception& e) {
    std::cerr << "trajan: " << e.what() << '\n';
    return kRuntime;
  }
}
