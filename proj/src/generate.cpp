#include "trajan/generate.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "trajan/errors.hpp"
#include "trajan/rng.hpp"

namespace trajan {

namespace {

void check_counts(std::size_t n_traj, std::size_t n_frames, std::size_t n_atoms) {
  if (n_traj == 0 || n_frames == 0 || n_atoms == 0) {
    throw UsageError("ensemble counts must be >= 1 (got " + std::to_string(n_traj) + ", " +
                     std::to_string(n_frames) + ", " + std::to_string(n_atoms) + ")");
  }
}

Trajectory random_walk(std::size_t index, std::uint64_t stream_seed, std::size_t n_frames,
                       std::size_t n_atoms) {
  // ~1 atom per 8 nm^3 keeps configurations from different seeds well apart.
  const double box = 2.0 * std::cbrt(static_cast<double>(n_atoms));
  Xorshift64Star rng(stream_seed);
  char id[32];
  std::snprintf(id, sizeof id, "traj_%04zu", index);
  Trajectory traj;
  traj.id = id;
  traj.frames.resize(n_frames);

  auto& first = traj.frames[0].positions;
  first.resize(n_atoms);
  for (auto& p : first) {
    for (auto& c : p) c = static_cast<float>(rng.uniform(0.0, box));
  }
  for (std::size_t f = 1; f < n_frames; ++f) {
    auto& pos = traj.frames[f].positions;
    pos = traj.frames[f - 1].positions;
    for (auto& p : pos) {
      for (auto& c : p) {
        c = static_cast<float>(c + rng.uniform(-kEnsembleStep, kEnsembleStep));
      }
    }
  }
  return traj;
}

}  // namespace

std::vector<Trajectory> generate_ensemble(std::size_t n_traj, std::size_t n_frames,
                                          std::size_t n_atoms, std::uint64_t seed) {
  check_counts(n_traj, n_frames, n_atoms);
  SplitMix64 streams(seed);
  std::vector<Trajectory> out;
  out.reserve(n_traj);
  for (std::size_t t = 0; t < n_traj; ++t) {
    out.push_back(random_walk(t, streams.next(), n_frames, n_atoms));
  }
  return out;
}

Trajectory generate_ensemble_member(std::size_t index, std::size_t n_frames, std::size_t n_atoms,
                                    std::uint64_t seed) {
  check_counts(index + 1, n_frames, n_atoms);
  SplitMix64 streams(seed);
  std::uint64_t stream_seed = 0;
  for (std::size_t t = 0; t <= index; ++t) stream_seed = streams.next();
  return random_walk(index, stream_seed, n_frames, n_atoms);
}

double default_bilayer_cutoff(const BilayerSpec& spec) { return 1.5 * spec.lattice_spacing; }

namespace {

std::size_t lattice_side(std::size_t n) {
  auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  while (side * side < n) ++side;
  return side;
}

}  // namespace

void validate_bilayer(const BilayerSpec& spec, std::optional<double> cutoff) {
  const double c = cutoff.value_or(default_bilayer_cutoff(spec));
  const double s = spec.lattice_spacing;
  const double j = spec.jitter;
  auto fail = [](const std::string& msg) { throw UsageError("invalid bilayer spec: " + msg); };

  if (spec.atoms_per_leaflet == 0) fail("atoms_per_leaflet must be >= 1");
  if (!(s > 0.0) || !std::isfinite(s)) fail("lattice_spacing must be > 0");
  if (!(j >= 0.0) || !std::isfinite(j)) fail("jitter must be >= 0");
  if (!(j < s / 2)) fail("jitter must be < lattice_spacing / 2");
  if (!(c > 0.0) || !std::isfinite(c)) fail("cutoff must be > 0");
  if (!std::isfinite(spec.separation)) fail("separation must be finite");

  // Allowance for rounding the generated coordinates to single precision.
  const double extent = lattice_side(spec.atoms_per_leaflet) * s + spec.separation + 2 * j;
  const double slack = 8.0 * extent * 0x1.0p-24;

  if (!(spec.separation - 2 * j > c + slack)) {
    fail("separation " + std::to_string(spec.separation) + " must exceed 2*jitter + cutoff (" +
         std::to_string(2 * j + c) + ")");
  }
  if (spec.atoms_per_leaflet > 1) {
    const double worst_neighbor = std::sqrt((s + 2 * j) * (s + 2 * j) + 8 * j * j);
    if (!(worst_neighbor + slack <= c)) {
      fail("cutoff " + std::to_string(c) + " cannot connect lattice neighbours up to " +
           std::to_string(worst_neighbor) + " apart");
    }
  }
}

Bilayer generate_bilayer(const BilayerSpec& spec, std::optional<double> cutoff) {
  validate_bilayer(spec, cutoff);
  const std::size_t a = spec.atoms_per_leaflet;
  const std::size_t side = lattice_side(a);

  Xorshift64Star rng(spec.seed);
  Bilayer out;
  out.system.id = "bilayer";
  out.system.positions.resize(2 * a);
  for (std::size_t sheet = 0; sheet < 2; ++sheet) {
    const double z0 = sheet == 0 ? 0.0 : spec.separation;
    for (std::size_t i = 0; i < a; ++i) {
      const double x = static_cast<double>(i % side) * spec.lattice_spacing;
      const double y = static_cast<double>(i / side) * spec.lattice_spacing;
      auto& p = out.system.positions[sheet * a + i];
      p[0] = static_cast<float>(x + rng.uniform(-spec.jitter, spec.jitter));
      p[1] = static_cast<float>(y + rng.uniform(-spec.jitter, spec.jitter));
      p[2] = static_cast<float>(z0 + rng.uniform(-spec.jitter, spec.jitter));
    }
  }
  out.truth.n_components = 2;
  out.truth.assignment.assign(2 * a, 0);
  std::fill(out.truth.assignment.begin() + static_cast<std::ptrdiff_t>(a),
            out.truth.assignment.end(), 1u);
  return out;
}

}  // namespace trajan
