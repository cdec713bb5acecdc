#include "trajan/core.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "trajan/errors.hpp"

namespace trajan {

std::vector<std::size_t> ComponentSet::sizes() const {
  std::vector<std::size_t> out(n_components, 0);
  for (auto c : assignment) ++out[c];
  return out;
}

std::vector<std::vector<VertexId>> ComponentSet::groups() const {
  std::vector<std::vector<VertexId>> out(n_components);
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    out[assignment[v]].push_back(static_cast<VertexId>(v));
  }
  return out;
}

ComponentSet canonicalize(const std::vector<std::uint32_t>& labels) {
  constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t max_label = 0;
  for (auto l : labels) max_label = std::max(max_label, l);

  std::vector<std::uint32_t> remap(labels.empty() ? 0 : max_label + 1, unset);
  ComponentSet out;
  out.assignment.resize(labels.size());
  std::uint32_t next = 0;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    auto& id = remap[labels[v]];
    if (id == unset) id = next++;
    out.assignment[v] = id;
  }
  out.n_components = next;
  return out;
}

namespace {

void check_positions(const std::vector<Vec3>& positions, const std::string& what) {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (float c : positions[i]) {
      if (!std::isfinite(c)) {
        throw DataError(what + ": non-finite coordinate at atom " + std::to_string(i));
      }
    }
  }
}

}  // namespace

void validate(const Frame& frame) {
  if (frame.positions.empty()) throw UsageError("frame has no atoms");
  check_positions(frame.positions, "frame");
}

void validate(const Trajectory& trajectory) {
  if (trajectory.frames.empty()) {
    throw UsageError("trajectory '" + trajectory.id + "' has no frames");
  }
  const auto n = trajectory.frames.front().n_atoms();
  for (std::size_t f = 0; f < trajectory.frames.size(); ++f) {
    const auto& frame = trajectory.frames[f];
    if (frame.n_atoms() != n) {
      throw UsageError("trajectory '" + trajectory.id + "' frame " + std::to_string(f) +
                       " has " + std::to_string(frame.n_atoms()) + " atoms, expected " +
                       std::to_string(n));
    }
    if (frame.positions.empty()) throw UsageError("frame has no atoms");
    check_positions(frame.positions, "trajectory '" + trajectory.id + "' frame " +
                                         std::to_string(f));
  }
}

void validate(const System& system) {
  if (system.positions.empty()) throw UsageError("system '" + system.id + "' has no atoms");
  check_positions(system.positions, "system '" + system.id + "'");
}

void validate(const EdgeList& graph) {
  std::set<std::pair<VertexId, VertexId>> seen;
  for (const auto& e : graph.edges) {
    if (e.u >= graph.n_vertices || e.v >= graph.n_vertices) {
      throw UsageError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                       ") out of range for " + std::to_string(graph.n_vertices) +
                       " vertices");
    }
    if (e.u == e.v) throw UsageError("self edge at vertex " + std::to_string(e.u));
    if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second) {
      throw UsageError("duplicate edge (" + std::to_string(e.u) + "," +
                       std::to_string(e.v) + ")");
    }
  }
}

}  // namespace trajan
