#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trajan/core.hpp"

namespace trajan {

// Ensemble of random-walk trajectories. Each trajectory starts from a
// uniform random configuration in a cube whose volume grows with n_atoms;
// every frame displaces each coordinate by at most kEnsembleStep nm.
// Pure function of its arguments. Ids are "traj_0000", "traj_0001", ...
inline constexpr double kEnsembleStep = 0.1;

std::vector<Trajectory> generate_ensemble(std::size_t n_traj, std::size_t n_frames,
                                          std::size_t n_atoms, std::uint64_t seed);

// Element `index` of generate_ensemble(index + 1, n_frames, n_atoms, seed),
// without materializing the others.
Trajectory generate_ensemble_member(std::size_t index, std::size_t n_frames, std::size_t n_atoms,
                                    std::uint64_t seed);

// Two flat, jittered square-lattice sheets. Sheet 0 holds atoms
// [0, atoms_per_leaflet) at z ~ 0; sheet 1 holds the rest at z ~ separation.
struct BilayerSpec {
  std::size_t atoms_per_leaflet = 0;
  double separation = 0.0;       // nm
  double lattice_spacing = 1.0;  // nm
  double jitter = 0.0;           // max per-axis perturbation, nm
  std::uint64_t seed = 0;
};

struct Bilayer {
  System system;
  ComponentSet truth;
};

// Cutoff used to validate a bilayer spec when none is given.
double default_bilayer_cutoff(const BilayerSpec& spec);

// Throws UsageError unless, at `cutoff`, each sheet is connected and no edge
// can cross between sheets. With no cutoff, 1.5 * lattice_spacing is used.
void validate_bilayer(const BilayerSpec& spec, std::optional<double> cutoff = std::nullopt);

Bilayer generate_bilayer(const BilayerSpec& spec, std::optional<double> cutoff = std::nullopt);

}  // namespace trajan
