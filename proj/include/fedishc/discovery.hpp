#pragma once

// Server-side recursive source identification on global cumulants.
//
// Each round scores every active variable by the sum of its tau statistics,
// picks the source, records its influence coefficients alpha_j =
// C21(s, j) / C3(s), and removes its contribution from the remaining
// cumulants. The recorded alphas are total effects in the residual system;
// stacking them gives the unit lower-triangular mixing factor L (x = L e in
// discovered order), and the direct strengths are B = I - L^{-1}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "fedishc/cumulants.hpp"
#include "fedishc/error.hpp"
#include "fedishc/federation.hpp"
#include "fedishc/grid.hpp"

namespace fedishc {

enum class SelectionRule { argmin_mean, z_ratio };

inline std::string_view to_string(SelectionRule r) {
  return r == SelectionRule::argmin_mean ? "argmin-mean" : "z-ratio";
}

inline SelectionRule parse_selection_rule(std::string_view s) {
  if (s == "argmin-mean") return SelectionRule::argmin_mean;
  if (s == "z-ratio") return SelectionRule::z_ratio;
  throw InvalidArgument("unknown selection rule '" + std::string(s) + "'");
}

struct DiscoveryConfig {
  // Minimum |C3| of a selected source.
  double c3_guard = 1e-3;
  // With two or more replicates the source must also clear symmetry_z
  // bootstrap standard errors of its C3. Zero disables the check.
  double symmetry_z = 4.0;
  double edge_threshold = 0.05;
  SelectionRule selection_rule = SelectionRule::argmin_mean;
  // Level of the one-sided "score is zero" check reported per step.
  double significance = 0.05;

  void validate() const {
    for (double v : {c3_guard, symmetry_z, edge_threshold})
      if (!(v >= 0.0 && std::isfinite(v))) throw InvalidArgument("DiscoveryConfig: thresholds must be finite and >= 0");
    if (!(significance > 0.0 && significance < 1.0)) throw InvalidArgument("DiscoveryConfig: significance outside (0, 1)");
  }
};

inline constexpr std::size_t kMinReplicatesForZRatio = 10;

// |C3(x_i) C12(x_i, x_j) - C21(x_i, x_j) C12(x_j, x_i)|
inline double tau(const CumulantTable& t, std::size_t i, std::size_t j) {
  if (i == j) throw InvalidArgument("tau: i == j");
  return std::abs(t.c3(i) * t.c12(i, j) - t.c21(i, j) * t.c12(j, i));
}

// Sum of tau_sj over the other active variables, one entry per active[k].
inline std::vector<double> source_scores(const CumulantTable& t, std::span<const std::size_t> active) {
  if (active.size() < 2) throw InvalidArgument("source_scores: fewer than 2 active variables");
  std::vector<double> scores(active.size(), 0.0);
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = 0; b < active.size(); ++b)
      if (a != b) scores[a] += tau(t, active[a], active[b]);
  return scores;
}

struct SourceSelection {
  std::size_t index = 0;
  double mean_score = 0.0;
  double sd_score = 0.0;
  // mean / sd across replicates (0 when the mean is 0, +inf when sd is 0).
  double ratio = 0.0;
  // ratio below the one-sided normal quantile at the configured level
  bool zero_accepted = true;
};

namespace detail {

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double safe_ratio(double mean, double sd) {
  if (mean == 0.0) return 0.0;
  if (sd == 0.0) return std::numeric_limits<double>::infinity();
  return mean / sd;
}

// symmetry_z replicate standard errors of C3(s), or 0 with fewer than two
// replicates.
inline double c3_symmetry_threshold(const GlobalCumulantTable& g, std::size_t s, const DiscoveryConfig& cfg) {
  if (cfg.symmetry_z <= 0.0 || g.replicates.size() < 2) return 0.0;
  std::vector<double> c3(g.replicates.size());
  for (std::size_t b = 0; b < c3.size(); ++b) c3[b] = g.replicates[b].c3(s);
  return cfg.symmetry_z * sample_sd(c3);
}

}  // namespace detail

// Picks the next source among `active` (sorted ascending; ties go to the
// lowest index, i.e. the lowest global id).
//
// Guard: the winner's |C3| must reach c3_guard and, when `statistical_guard`
// is set, symmetry_z replicate standard errors. discover() sets it only for
// the first selection: later tables hold residual cumulants whose replicate
// spread reflects propagated estimation error rather than symmetric noise.
inline SourceSelection select_source_detailed(const GlobalCumulantTable& g, std::span<const std::size_t> active,
                                              const DiscoveryConfig& cfg, bool statistical_guard = true) {
  if (active.empty()) throw InvalidArgument("select_source: empty active set");
  if (g.replicates.empty()) throw InvalidArgument("select_source: no replicate tables");
  const std::size_t reps = g.replicates.size();
  SourceSelection sel;
  if (active.size() == 1) {
    sel.index = active.front();
    return sel;
  }
  if (cfg.selection_rule == SelectionRule::z_ratio && reps < kMinReplicatesForZRatio)
    throw InvalidArgument("select_source: z-ratio rule needs at least " + std::to_string(kMinReplicatesForZRatio) +
                          " replicates, got " + std::to_string(reps));

  // per_var[a][b]: score of active[a] in replicate b
  std::vector<std::vector<double>> per_var(active.size(), std::vector<double>(reps));
  for (std::size_t b = 0; b < reps; ++b) {
    const auto s = source_scores(g.replicates[b], active);
    for (std::size_t a = 0; a < active.size(); ++a) per_var[a][b] = s[a];
  }

  std::size_t best = 0;
  double best_key = std::numeric_limits<double>::infinity();
  std::vector<double> means(active.size()), sds(active.size());
  std::vector<double> pair(reps);
  for (std::size_t a = 0; a < active.size(); ++a) {
    means[a] = std::accumulate(per_var[a].begin(), per_var[a].end(), 0.0) / static_cast<double>(reps);
    sds[a] = detail::sample_sd(per_var[a]);
    double key = means[a];
    if (cfg.selection_rule == SelectionRule::z_ratio) {
      // Sum of per-pair mean/sd of tau_sj. Each tau_sj is homogeneous under
      // rescaling of a single variable, so the key is scale invariant.
      key = 0.0;
      for (std::size_t c = 0; c < active.size(); ++c) {
        if (c == a) continue;
        for (std::size_t b = 0; b < reps; ++b) pair[b] = tau(g.replicates[b], active[a], active[c]);
        const double m = std::accumulate(pair.begin(), pair.end(), 0.0) / static_cast<double>(reps);
        key += detail::safe_ratio(m, detail::sample_sd(pair));
      }
    }
    if (key < best_key) {
      best_key = key;
      best = a;
    }
  }

  sel.index = active[best];
  sel.mean_score = means[best];
  sel.sd_score = sds[best];
  sel.ratio = detail::safe_ratio(means[best], sds[best]);
  if (reps >= 2) {
    const boost::math::normal standard;
    sel.zero_accepted = sel.ratio < boost::math::quantile(standard, 1.0 - cfg.significance);
  }

  const double c3 = g.base.c3(sel.index);
  if (!(std::abs(c3) >= cfg.c3_guard) || c3 == 0.0)
    throw NearSymmetricNoise(g.base.variable_ids()[sel.index], c3, cfg.c3_guard, {});
  if (statistical_guard) {
    const double stat = detail::c3_symmetry_threshold(g, sel.index, cfg);
    if (std::abs(c3) < stat) throw NearSymmetricNoise(g.base.variable_ids()[sel.index], c3, stat, {});
  }
  return sel;
}

inline std::size_t select_source(const GlobalCumulantTable& g, std::span<const std::size_t> active,
                                 const DiscoveryConfig& cfg) {
  return select_source_detailed(g, active, cfg).index;
}

struct Elimination {
  // Same shape as the input; only cells among the remaining variables are
  // updated, cells touching the source or inactive variables are left as is.
  CumulantTable table;
  // alpha[j] = C21(s, j) / C3(s) for remaining j, 0 elsewhere.
  std::vector<double> alpha;
};

// Removes the source's contribution from every cumulant among active \ {s}:
//   C3'(j)     = C3(j)     - a_j^3     C3(s)
//   C12'(j, k) = C12(j, k) - a_j a_k^2 C3(s)
//   C21'(j, k) = C21(j, k) - a_j^2 a_k C3(s)
inline Elimination eliminate_source(const CumulantTable& t, std::size_t s, std::span<const std::size_t> active,
                                    double c3_guard = 0.0) {
  const double cs = t.c3(s);
  if (!(std::abs(cs) >= c3_guard) || cs == 0.0) throw NearSymmetricNoise(t.variable_ids()[s], cs, c3_guard, {});
  Elimination out{t, std::vector<double>(t.d(), 0.0)};
  std::vector<std::size_t> rest;
  for (std::size_t j : active)
    if (j != s) rest.push_back(j);
  for (std::size_t j : rest) out.alpha[j] = t.c21(s, j) / cs;
  for (std::size_t j : rest) {
    const double aj = out.alpha[j];
    out.table.set_c3(j, t.c3(j) - aj * aj * aj * cs);
    for (std::size_t k : rest) {
      if (k == j) continue;
      // c12(k, j) shares this storage cell
      out.table.set_c21(j, k, t.c21(j, k) - aj * aj * out.alpha[k] * cs);
    }
  }
  return out;
}

// B = I - L^{-1} by forward substitution on the unit lower-triangular L
// (discovered order), permuted back to global indexing:
// result(order[p], order[q]) = B_ordered(p, q).
inline RealGrid reconstruct_strengths(const RealGrid& mixing_lower, std::span<const std::size_t> order) {
  const std::size_t d = mixing_lower.rows();
  if (mixing_lower.cols() != d || order.size() != d)
    throw InvalidArgument("reconstruct_strengths: dimension mismatch");
  // Column-by-column solve of L X = I.
  RealGrid inv(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    inv(c, c) = 1.0;
    for (std::size_t r = c + 1; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t m = c; m < r; ++m) acc += mixing_lower(r, m) * inv(m, c);
      inv(r, c) = -acc;
    }
  }
  RealGrid b(d, d);
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = 0; q < p; ++q) b(order[p], order[q]) = -inv(p, q);
  return b;
}

struct CausalModel {
  std::vector<std::string> variable_ids;  // global ids
  std::vector<std::size_t> order;         // discovered order as global indices
  RealGrid mixing_lower;                  // in discovered order
  RealGrid strengths;                     // strengths(i, j): effect of x_j on x_i
  Grid<std::uint8_t> adjacency;           // adjacency(i, j): edge x_j -> x_i
  std::vector<SourceSelection> steps;

  std::size_t d() const noexcept { return variable_ids.size(); }

  std::vector<std::string> order_ids() const {
    std::vector<std::string> out;
    for (std::size_t i : order) out.push_back(variable_ids[i]);
    return out;
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (auto v : adjacency.data()) n += v != 0;
    return n;
  }

  friend bool operator==(const CausalModel& a, const CausalModel& b) {
    return a.variable_ids == b.variable_ids && a.order == b.order && a.mixing_lower == b.mixing_lower &&
           a.strengths == b.strengths && a.adjacency == b.adjacency;
  }
};

inline Grid<std::uint8_t> prune(const RealGrid& strengths, double edge_threshold) {
  Grid<std::uint8_t> adj(strengths.rows(), strengths.cols(), 0);
  for (std::size_t i = 0; i < strengths.rows(); ++i)
    for (std::size_t j = 0; j < strengths.cols(); ++j)
      adj(i, j) = i != j && strengths(i, j) != 0.0 && std::abs(strengths(i, j)) >= edge_threshold;
  return adj;
}

inline CausalModel discover(const GlobalCumulantTable& global, const DiscoveryConfig& cfg = {}) {
  cfg.validate();
  const std::size_t d = global.d();
  if (global.replicates.empty()) throw InvalidArgument("discover: no replicate tables");
  if (global.coverage.rows() == d)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (global.coverage(i, j).empty())
          throw AssumptionViolated(global.variable_ids()[std::min(i, j)], global.variable_ids()[std::max(i, j)]);

  CausalModel model;
  model.variable_ids = global.variable_ids();
  GlobalCumulantTable work = global;
  std::vector<std::size_t> active(d);
  std::iota(active.begin(), active.end(), 0);
  std::vector<std::vector<double>> alphas;  // alphas[t][j], step t

  while (!active.empty()) {
    SourceSelection sel;
    try {
      sel = select_source_detailed(work, active, cfg, model.order.empty());
    } catch (const NearSymmetricNoise& e) {
      std::vector<std::string> partial;
      for (std::size_t i : model.order) partial.push_back(model.variable_ids[i]);
      throw NearSymmetricNoise(e.variable(), e.c3(), e.threshold(), std::move(partial));
    }
    const std::size_t s = sel.index;
    model.order.push_back(s);
    model.steps.push_back(sel);
    if (active.size() == 1) break;

    auto base = eliminate_source(work.base, s, active);
    alphas.push_back(std::move(base.alpha));
    work.base = std::move(base.table);
    for (auto& rep : work.replicates) {
      // a replicate with an exactly vanishing C3 keeps its cells unchanged
      if (rep.c3(s) == 0.0) continue;
      rep = eliminate_source(rep, s, active).table;
    }
    active.erase(std::find(active.begin(), active.end(), s));
  }

  model.mixing_lower = RealGrid::identity(d);
  for (std::size_t t = 0; t < alphas.size(); ++t)
    for (std::size_t p = t + 1; p < d; ++p) model.mixing_lower(p, t) = alphas[t][model.order[p]];
  model.strengths = reconstruct_strengths(model.mixing_lower, model.order);
  model.adjacency = prune(model.strengths, cfg.edge_threshold);
  return model;
}

}  // namespace fedishc
