#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library kernels.

#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <utility>
#include <vector>

#include "trajan/core.hpp"
#include "trajan/rng.hpp"

namespace oracle {

using trajan::Trajectory;
using trajan::Vec3;

// Every unordered pair (u < v) within cutoff, boundary inclusive, using the
// single-precision squared-distance convention of the library.
inline std::set<std::pair<std::uint32_t, std::uint32_t>> edges(const std::vector<Vec3>& p,
                                                               double cutoff) {
  const float c = static_cast<float>(cutoff);
  const float c2 = c * c;
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t u = 0; u < p.size(); ++u) {
    for (std::uint32_t v = u + 1; v < p.size(); ++v) {
      float d2 = 0.0f;
      for (int k = 0; k < 3; ++k) {
        const float d = p[u][k] - p[v][k];
        d2 = d2 + d * d;
      }
      if (d2 <= c2) out.insert({u, v});
    }
  }
  return out;
}

// Breadth-first flood fill; labels numbered by smallest member.
inline std::vector<std::uint32_t> flood_fill(
    std::size_t n, const std::set<std::pair<std::uint32_t, std::uint32_t>>& edge_set) {
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (auto [u, v] : edge_set) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  constexpr auto unset = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> label(n, unset);
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != unset) continue;
    std::deque<std::uint32_t> q{static_cast<std::uint32_t>(s)};
    label[s] = next;
    while (!q.empty()) {
      const auto x = q.front();
      q.pop_front();
      for (auto y : adj[x]) {
        if (label[y] == unset) {
          label[y] = next;
          q.push_back(y);
        }
      }
    }
    ++next;
  }
  return label;
}

// Scalar d_rms with long double accumulation.
inline long double rms(const trajan::Frame& a, const trajan::Frame& b) {
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.positions.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const long double d = static_cast<long double>(a.positions[i][k]) - b.positions[i][k];
      sum += d * d;
    }
  }
  return std::sqrt(sum / static_cast<long double>(a.positions.size()));
}

// Textbook definition: both directed distances, each a max over mins.
inline double hausdorff(const Trajectory& p, const Trajectory& q) {
  auto directed = [](const Trajectory& a, const Trajectory& b) {
    long double worst = 0.0L;
    for (const auto& f : a.frames) {
      long double best = INFINITY;
      for (const auto& g : b.frames) best = std::min(best, rms(f, g));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return static_cast<double>(std::max(directed(p, q), directed(q, p)));
}

inline Trajectory random_trajectory(trajan::Xorshift64Star& rng, std::size_t frames,
                                    std::size_t atoms, double scale = 5.0) {
  Trajectory t;
  t.id = "t";
  t.frames.resize(frames);
  for (auto& f : t.frames) {
    f.positions.resize(atoms);
    for (auto& p : f.positions) {
      for (auto& c : p) c = static_cast<float>(rng.uniform(-scale, scale));
    }
  }
  return t;
}

}  // namespace oracle
