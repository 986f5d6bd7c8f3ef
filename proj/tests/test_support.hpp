#pragma once

// Shared generators and independent oracles. Oracles here deliberately avoid
// the library's own helpers so a bug cannot cancel itself out.

#include "kinetunnel/analytics.hpp"
#include "kinetunnel/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace kinetunnel::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Vec3 random_vec(Rng& rng, double lo, double hi) {
  return Vec3(uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi));
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n;
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-3) return v.normalized();
  }
}

/// Three points spanning a triangle of comfortable area.
struct Triple {
  Vec3 p1, p2, p3;
};

inline Triple random_triple(Rng& rng) {
  for (;;) {
    Triple t{random_vec(rng, -2, 2), random_vec(rng, -2, 2), random_vec(rng, -2, 2)};
    if ((t.p2 - t.p1).cross(t.p3 - t.p1).norm() > 0.05) return t;
  }
}

/// Exhaustive argmin with lowest-index tie break.
inline std::pair<std::size_t, double> brute_nearest(const std::vector<Vec3>& points, const Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    // Squared distances: two different ones can share a rounded square root.
    const double d = (points[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, std::sqrt(best_d)};
}

/// Nested-loop ERR: per-sample Euclidean distance, mean over samples, mean over repetitions.
inline double oracle_err(const RepetitionSet& reps) {
  long double total = 0.0L;
  for (std::size_t r = 0; r < reps.actual.size(); ++r) {
    long double rep = 0.0L;
    for (std::size_t i = 0; i < reps.actual[r].size(); ++i) {
      long double sq = 0.0L;
      for (int k = 0; k < 3; ++k) {
        const long double d = reps.actual[r][i][k] - reps.desired[r][i][k];
        sq += d * d;
      }
      rep += std::sqrt(sq);
    }
    total += rep / static_cast<long double>(reps.actual[r].size());
  }
  return static_cast<double>(total / static_cast<long double>(reps.actual.size()));
}

inline RepetitionSet random_repetitions(Rng& rng, std::size_t n_reps, std::size_t samples, double scale) {
  RepetitionSet reps;
  for (std::size_t r = 0; r < n_reps; ++r) {
    reps.actual.emplace_back();
    reps.desired.emplace_back();
    for (std::size_t i = 0; i < samples; ++i) {
      const Vec3 d = random_vec(rng, -0.5, 0.5);
      reps.desired.back().push_back(d);
      reps.actual.back().push_back(d + random_vec(rng, -scale, scale));
    }
  }
  return reps;
}

/// Two-sided exact signed-rank p-value by enumerating every sign pattern.
/// Ranks use average ties on |d|; zero differences are dropped.
inline double enumerated_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double v : diffs) {
    if (v != 0.0) d.push_back(v);
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
    i = j + 1;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i) observed += d[i] > 0 ? rank[i] : 0.0;
  const double centre = static_cast<double>(n * (n + 1)) / 4.0;
  const double dev = std::abs(observed - centre);
  std::uint64_t extreme = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1U) w += rank[i];
    }
    if (std::abs(w - centre) >= dev - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

/// Session calibrated to the identity frame, trajectory selected, tunnel started.
inline Session executing_session(const Trajectory& t, ConfidenceInterval ci,
                                 FeedbackMode mode = FeedbackMode::Overwrite, FeedbackConfig cfg = {}) {
  Session s(cfg);
  s.apply(command::Calibrate{Vec3(0, 0, 0)});
  s.apply(command::Calibrate{Vec3(1, 0, 0)});
  s.apply(command::Calibrate{Vec3(0, 1, 0)});
  s.apply(command::SelectTrajectory{t});
  s.apply(command::SetCI{ci});
  s.apply(command::SetMode{mode});
  s.apply(command::Start{});
  return s;
}

inline Trajectory straight_line(double length, double spacing = 0.01, const std::string& id = "line") {
  Trajectory t;
  t.id = id;
  t.spacing = spacing;
  const std::vector<Vec3> ends{Vec3::Zero(), Vec3(length, 0, 0)};
  t.via_points = resample_polyline(ends, spacing);
  return t;
}

}  // namespace kinetunnel::testing
