#pragma once

// Ground-truth LiNGAM systems: random DAGs, sampling, client partitions and
// exact population cumulants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedishc/cumulants.hpp"
#include "fedishc/error.hpp"
#include "fedishc/grid.hpp"

namespace fedishc {

// "x1".."xd", zero-padded so that lexicographic order equals numeric order.
inline std::vector<std::string> variable_names(std::size_t d) {
  const std::size_t width = std::to_string(d).size();
  std::vector<std::string> out;
  out.reserve(d);
  for (std::size_t i = 1; i <= d; ++i) {
    std::string num = std::to_string(i);
    out.push_back("x" + std::string(width - num.size(), '0') + num);
  }
  return out;
}

// strengths(i, j) is the direct effect of x_j on x_i; order is topological.
struct DagSpec {
  std::vector<std::string> variable_ids;
  RealGrid strengths;
  std::vector<std::size_t> order;

  std::size_t d() const noexcept { return variable_ids.size(); }

  void validate() const {
    const std::size_t n = d();
    if (strengths.rows() != n || strengths.cols() != n || order.size() != n)
      throw InvalidArgument("DagSpec: inconsistent dimensions");
    std::vector<std::size_t> pos(n, n);
    for (std::size_t p = 0; p < n; ++p) {
      if (order[p] >= n || pos[order[p]] != n) throw InvalidArgument("DagSpec: order is not a permutation");
      pos[order[p]] = p;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(strengths(i, j))) throw InvalidArgument("DagSpec: non-finite strength");
        if (strengths(i, j) != 0.0 && pos[j] >= pos[i])
          throw InvalidArgument("DagSpec: edge " + variable_ids[j] + " -> " + variable_ids[i] +
                                " points against the order");
      }
  }

  friend bool operator==(const DagSpec&, const DagSpec&) = default;
};

struct WeightRange {
  double lo = 0.5;
  double hi = 1.5;
};

inline constexpr double kWeightFloor = 0.3;

inline DagSpec random_dag(std::size_t d, double edge_prob, WeightRange weights, std::uint64_t seed) {
  if (d < 2) throw InvalidArgument("random_dag: need d >= 2");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw InvalidArgument("random_dag: edge_prob outside [0, 1]");
  if (!(weights.lo >= kWeightFloor && weights.hi >= weights.lo && std::isfinite(weights.hi)))
    throw InvalidArgument("random_dag: invalid weight range");

  std::mt19937_64 rng(seed);
  DagSpec dag{variable_names(d), RealGrid(d, d), std::vector<std::size_t>(d)};
  for (std::size_t i = 0; i < d; ++i) dag.order[i] = i;
  std::shuffle(dag.order.begin(), dag.order.end(), rng);

  std::bernoulli_distribution include(edge_prob);
  std::bernoulli_distribution negative(0.5);
  std::uniform_real_distribution<double> magnitude(weights.lo, weights.hi);
  for (std::size_t q = 1; q < d; ++q)
    for (std::size_t p = 0; p < q; ++p) {
      if (!include(rng)) continue;
      const double w = magnitude(rng);
      dag.strengths(dag.order[q], dag.order[p]) = negative(rng) ? -w : w;
    }
  return dag;
}

// x1 -> x2 -> ... with coefficients[k] the effect of x_{k+1} on x_{k+2}.
inline DagSpec chain_dag(const std::vector<double>& coefficients) {
  const std::size_t d = coefficients.size() + 1;
  DagSpec dag{variable_names(d), RealGrid(d, d), std::vector<std::size_t>(d)};
  for (std::size_t i = 0; i < d; ++i) dag.order[i] = i;
  for (std::size_t k = 0; k + 1 < d; ++k) dag.strengths(k + 1, k) = coefficients[k];
  return dag;
}

// A = (I - B)^{-1}, built row by row in topological order.
inline RealGrid mixing_matrix(const DagSpec& dag) {
  const std::size_t d = dag.d();
  RealGrid a(d, d);
  for (std::size_t v : dag.order) {
    a(v, v) = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double b = dag.strengths(v, j);
      if (b == 0.0) continue;
      for (std::size_t l = 0; l < d; ++l) a(v, l) += b * a(j, l);
    }
  }
  return a;
}

enum class NoiseFamily { uniform, exponential, gumbel, laplace_asymmetric, gaussian };

inline std::string_view to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::exponential: return "exponential";
    case NoiseFamily::gumbel: return "gumbel";
    case NoiseFamily::laplace_asymmetric: return "laplace-asymmetric";
    case NoiseFamily::gaussian: return "gaussian";
  }
  return "unknown";
}

inline NoiseFamily parse_noise_family(std::string_view name) {
  for (auto f : {NoiseFamily::uniform, NoiseFamily::exponential, NoiseFamily::gumbel,
                 NoiseFamily::laplace_asymmetric, NoiseFamily::gaussian})
    if (to_string(f) == name) return f;
  if (name == "exp") return NoiseFamily::exponential;
  throw InvalidArgument("unknown noise family '" + std::string(name) + "'");
}

// Third cumulant of the centered noise at the given scale.
//   exponential: scale * (Exp(1) - 1)               -> 2 s^3
//   gumbel:      scale * (Gumbel(0, 1) - gamma)     -> 2 zeta(3) s^3
//   laplace-asymmetric: scale * (E1 - E2 / 2 - 1/2) -> (2 - 1/4) s^3
//   uniform:     scale * U(-1, 1); gaussian: scale * N(0, 1) -> 0
inline double noise_third_cumulant(NoiseFamily f, double scale) {
  constexpr double kZeta3 = 1.2020569031595942;
  const double s3 = scale * scale * scale;
  switch (f) {
    case NoiseFamily::exponential: return 2.0 * s3;
    case NoiseFamily::gumbel: return 2.0 * kZeta3 * s3;
    case NoiseFamily::laplace_asymmetric: return 1.75 * s3;
    case NoiseFamily::uniform:
    case NoiseFamily::gaussian: return 0.0;
  }
  return 0.0;
}

inline double noise_variance(NoiseFamily f, double scale) {
  const double s2 = scale * scale;
  switch (f) {
    case NoiseFamily::exponential: return s2;
    case NoiseFamily::gumbel: return std::numbers::pi * std::numbers::pi / 6.0 * s2;
    case NoiseFamily::laplace_asymmetric: return 1.25 * s2;
    case NoiseFamily::uniform: return s2 / 3.0;
    case NoiseFamily::gaussian: return s2;
  }
  return 0.0;
}

struct NoiseSpec {
  std::vector<NoiseFamily> family;
  std::vector<double> scale;

  static NoiseSpec uniform_spec(std::size_t d, NoiseFamily f, double s = 1.0) {
    return {std::vector<NoiseFamily>(d, f), std::vector<double>(d, s)};
  }

  std::size_t d() const noexcept { return family.size(); }

  void validate() const {
    if (family.size() != scale.size()) throw InvalidArgument("NoiseSpec: family/scale length mismatch");
    for (double s : scale)
      if (!(s > 0.0 && std::isfinite(s))) throw InvalidArgument("NoiseSpec: scale must be positive");
  }

  // The skew-based pipeline needs a nonzero third cumulant on every noise term.
  void validate_skewed() const {
    validate();
    for (std::size_t i = 0; i < family.size(); ++i)
      if (noise_third_cumulant(family[i], scale[i]) == 0.0)
        throw InvalidArgument("NoiseSpec: family '" + std::string(to_string(family[i])) +
                              "' has zero third cumulant");
  }

  std::vector<double> third_cumulants() const {
    std::vector<double> out(d());
    for (std::size_t i = 0; i < d(); ++i) out[i] = noise_third_cumulant(family[i], scale[i]);
    return out;
  }
};

namespace detail {

inline double draw_noise(NoiseFamily f, std::mt19937_64& rng) {
  constexpr double kEulerGamma = 0.57721566490153286;
  switch (f) {
    case NoiseFamily::uniform: return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    case NoiseFamily::exponential: return std::exponential_distribution<double>(1.0)(rng) - 1.0;
    case NoiseFamily::gumbel: return std::extreme_value_distribution<double>(0.0, 1.0)(rng) - kEulerGamma;
    case NoiseFamily::laplace_asymmetric: {
      std::exponential_distribution<double> e(1.0);
      const double a = e(rng);
      const double b = e(rng);
      return a - 0.5 * b - 0.5;
    }
    case NoiseFamily::gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
  }
  return 0.0;
}

}  // namespace detail

// X = BX + E, solved by substitution along the topological order.
inline SampleMatrix sample_lingam(const DagSpec& dag, const NoiseSpec& noise, std::size_t n,
                                  std::uint64_t seed) {
  dag.validate();
  noise.validate();
  if (noise.d() != dag.d()) throw InvalidArgument("sample_lingam: noise/DAG dimension mismatch");
  if (n < 2) throw InvalidArgument("sample_lingam: need n >= 2");

  const std::size_t d = dag.d();
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> cols(d, std::vector<double>(n));
  for (std::size_t v = 0; v < d; ++v)
    for (auto& x : cols[v]) x = noise.scale[v] * detail::draw_noise(noise.family[v], rng);

  for (std::size_t v : dag.order)
    for (std::size_t j = 0; j < d; ++j) {
      const double b = dag.strengths(v, j);
      if (b == 0.0) continue;
      for (std::size_t r = 0; r < n; ++r) cols[v][r] += b * cols[j][r];
    }
  return SampleMatrix(dag.variable_ids, std::move(cols));
}

// Cum(x_i, x_j, x_k) = sum_l A_il A_jl A_kl C3(e_l) over independent sources.
inline CumulantTable population_cumulants(const DagSpec& dag, const std::vector<double>& noise_c3) {
  dag.validate();
  const std::size_t d = dag.d();
  if (noise_c3.size() != d) throw InvalidArgument("population_cumulants: noise_c3 length mismatch");
  const RealGrid a = mixing_matrix(dag);
  CumulantTable table(dag.variable_ids);
  for (std::size_t i = 0; i < d; ++i) {
    double c3 = 0.0;
    for (std::size_t l = 0; l < d; ++l) c3 += a(i, l) * a(i, l) * a(i, l) * noise_c3[l];
    table.set_c3(i, c3);
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      double c = 0.0;
      for (std::size_t l = 0; l < d; ++l) c += a(i, l) * a(i, l) * a(j, l) * noise_c3[l];
      table.set_c21(i, j, c);
    }
  }
  return table;
}

inline RealGrid population_covariance(const DagSpec& dag, const std::vector<double>& noise_var) {
  const std::size_t d = dag.d();
  const RealGrid a = mixing_matrix(dag);
  RealGrid cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t l = 0; l < d; ++l) cov(i, j) += a(i, l) * a(j, l) * noise_var[l];
  return cov;
}

enum class PartitionMode { horizontal, vertical, hybrid };

inline std::string_view to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::horizontal: return "horizontal";
    case PartitionMode::vertical: return "vertical";
    case PartitionMode::hybrid: return "hybrid";
  }
  return "unknown";
}

inline PartitionMode parse_partition_mode(std::string_view name) {
  for (auto m : {PartitionMode::horizontal, PartitionMode::vertical, PartitionMode::hybrid})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown partition mode '" + std::string(name) + "'");
}

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct PartitionSpec {
  PartitionMode mode = PartitionMode::horizontal;
  std::vector<std::vector<std::string>> variable_sets;
  std::vector<RowRange> sample_ranges;

  std::size_t k() const noexcept { return variable_sets.size(); }
  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct ClientDataset {
  std::string client_id;
  SampleMatrix samples;
};

inline std::string client_name(std::size_t k) { return "client" + std::to_string(k + 1); }

// Every variable held somewhere and every pair co-held by some client.
// Names the first uncovered pair in `all_ids` order.
inline void check_pairwise_coverage(const std::vector<std::vector<std::string>>& variable_sets,
                                    const std::vector<std::string>& all_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all_ids.size(); ++i) index.emplace(all_ids[i], i);
  const std::size_t d = all_ids.size();
  Grid<unsigned char> covered(d, d, 0);
  for (const auto& set : variable_sets) {
    std::vector<std::size_t> idx;
    for (const auto& id : set) {
      auto it = index.find(id);
      if (it == index.end()) throw InvalidArgument("unknown variable id " + id);
      idx.push_back(it->second);
    }
    for (std::size_t a : idx)
      for (std::size_t b : idx) covered(a, b) = 1;
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j)
      if (!covered(i, j)) throw AssumptionViolated(all_ids[i], all_ids[j]);
}

inline std::vector<ClientDataset> partition(const SampleMatrix& samples, const PartitionSpec& spec) {
  if (spec.k() == 0 || spec.sample_ranges.size() != spec.k())
    throw InvalidArgument("partition: need one variable set and one row range per client");
  check_pairwise_coverage(spec.variable_sets, samples.variable_ids());

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < samples.d(); ++i) index.emplace(samples.variable_ids()[i], i);

  std::vector<ClientDataset> out;
  out.reserve(spec.k());
  for (std::size_t k = 0; k < spec.k(); ++k) {
    const RowRange rows = spec.sample_ranges[k];
    if (rows.end > samples.n() || rows.begin >= rows.end)
      throw InvalidArgument("partition: row range out of bounds for " + client_name(k));
    if (rows.size() < 2) throw InvalidArgument("partition: " + client_name(k) + " has fewer than 2 samples");
    std::vector<std::vector<double>> cols;
    for (const auto& id : spec.variable_sets[k]) {
      auto col = samples.column(index.at(id));
      cols.emplace_back(col.begin() + static_cast<std::ptrdiff_t>(rows.begin),
                        col.begin() + static_cast<std::ptrdiff_t>(rows.end));
    }
    out.push_back({client_name(k), SampleMatrix(spec.variable_sets[k], std::move(cols))});
  }
  return out;
}

namespace detail {

inline std::vector<RowRange> split_rows(std::size_t n, std::size_t k) {
  std::vector<RowRange> out;
  for (std::size_t c = 0; c < k; ++c) out.push_back({n * c / k, n * (c + 1) / k});
  return out;
}

}  // namespace detail

// Horizontal: all variables, disjoint row blocks. Vertical: all rows, random
// variable subsets. Hybrid: both. Subsets have ceil(2d/3) members and are
// redrawn until every pair is co-held.
inline PartitionSpec make_partition(PartitionMode mode, std::size_t k, const std::vector<std::string>& ids,
                                    std::size_t n, std::uint64_t seed,
                                    std::optional<std::size_t> subset_size = std::nullopt) {
  if (k == 0) throw InvalidArgument("make_partition: need at least one client");
  const std::size_t d = ids.size();
  PartitionSpec spec;
  spec.mode = mode;
  spec.sample_ranges = mode == PartitionMode::vertical ? std::vector<RowRange>(k, RowRange{0, n})
                                                       : detail::split_rows(n, k);
  if (mode == PartitionMode::horizontal || k == 1) {
    spec.variable_sets.assign(k, ids);
    return spec;
  }

  const std::size_t size = std::clamp<std::size_t>(subset_size.value_or((2 * d + 2) / 3), 2, d);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(d);
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    spec.variable_sets.clear();
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < d; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::size_t> chosen(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(size));
      std::sort(chosen.begin(), chosen.end());
      std::vector<std::string> set;
      for (std::size_t i : chosen) set.push_back(ids[i]);
      spec.variable_sets.push_back(std::move(set));
    }
    try {
      check_pairwise_coverage(spec.variable_sets, ids);
      return spec;
    } catch (const AssumptionViolated&) {
    }
  }
  throw InvalidArgument("make_partition: could not draw " + std::to_string(k) + " subsets of size " +
                        std::to_string(size) + " covering every pair of " + std::to_string(d) + " variables");
}

// Three clients over x1..x5 holding (x1,x2,x3,x4), (x2,x3,x4,x5) and
// (x1,x3,x4,x5), each on its own third of the rows.
inline PartitionSpec three_client_example(std::size_t n) {
  PartitionSpec spec;
  spec.mode = PartitionMode::hybrid;
  spec.variable_sets = {{"x1", "x2", "x3", "x4"}, {"x2", "x3", "x4", "x5"}, {"x1", "x3", "x4", "x5"}};
  spec.sample_ranges = detail::split_rows(n, 3);
  return spec;
}

}  // namespace fedishc
