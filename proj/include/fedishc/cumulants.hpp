#pragma once

// Sample cumulants and the per-client third-order cumulant table.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "fedishc/error.hpp"
#include "fedishc/grid.hpp"

namespace fedishc {

// n observations of d variables, stored column by column.
class SampleMatrix {
 public:
  SampleMatrix() = default;

  SampleMatrix(std::vector<std::string> variable_ids, std::vector<std::vector<double>> columns)
      : variable_ids_(std::move(variable_ids)), columns_(std::move(columns)) {
    validate();
  }

  std::size_t n() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t d() const noexcept { return columns_.size(); }

  const std::vector<std::string>& variable_ids() const noexcept { return variable_ids_; }
  std::span<const double> column(std::size_t j) const { return columns_.at(j); }
  const std::vector<std::vector<double>>& columns() const noexcept { return columns_; }
  double at(std::size_t row, std::size_t col) const { return columns_.at(col).at(row); }

  friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

 private:
  void validate() const {
    if (variable_ids_.size() != columns_.size())
      throw InvalidArgument("SampleMatrix: " + std::to_string(variable_ids_.size()) +
                            " ids for " + std::to_string(columns_.size()) + " columns");
    if (columns_.empty()) throw InvalidArgument("SampleMatrix: no variables");
    const std::size_t rows = columns_.front().size();
    if (rows < 2) throw InvalidArgument("SampleMatrix: need at least 2 samples");
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (!seen.insert(variable_ids_[j]).second)
        throw InvalidArgument("SampleMatrix: duplicate variable id " + variable_ids_[j]);
      if (columns_[j].size() != rows)
        throw InvalidArgument("SampleMatrix: ragged column " + variable_ids_[j]);
      for (double v : columns_[j])
        if (!std::isfinite(v))
          throw InvalidArgument("SampleMatrix: non-finite value in " + variable_ids_[j]);
    }
  }

  std::vector<std::string> variable_ids_;
  std::vector<std::vector<double>> columns_;
};

// Third-order cumulants of d variables: C3(x_i) and the joint cumulants
// Cum(x_i, x_i, x_j). The other joint cumulant, Cum(x_i, x_j, x_j), is the
// same number with the roles swapped, so only one grid is stored and the
// mirror relation c21(i, j) == c12(j, i) holds by construction.
class CumulantTable {
 public:
  CumulantTable() = default;
  explicit CumulantTable(std::vector<std::string> variable_ids)
      : variable_ids_(std::move(variable_ids)),
        c3_(variable_ids_.size(), 0.0),
        c21_(variable_ids_.size(), variable_ids_.size(), 0.0) {}

  std::size_t d() const noexcept { return variable_ids_.size(); }
  const std::vector<std::string>& variable_ids() const noexcept { return variable_ids_; }

  double c3(std::size_t i) const { return c3_.at(i); }
  void set_c3(std::size_t i, double v) { c3_.at(i) = v; }
  const std::vector<double>& c3_values() const noexcept { return c3_; }

  // Cum(x_i, x_i, x_j)
  double c21(std::size_t i, std::size_t j) const { return c21_(i, j); }
  void set_c21(std::size_t i, std::size_t j, double v) { c21_(i, j) = v; }

  // Cum(x_i, x_j, x_j)
  double c12(std::size_t i, std::size_t j) const { return c21_(j, i); }
  void set_c12(std::size_t i, std::size_t j, double v) { c21_(j, i) = v; }

  const RealGrid& c21_grid() const noexcept { return c21_; }

  RealGrid c12_grid() const {
    RealGrid g(d(), d());
    for (std::size_t i = 0; i < d(); ++i)
      for (std::size_t j = 0; j < d(); ++j) g(i, j) = c21_(j, i);
    return g;
  }

  // The d x (2d - 1) layout a client ships: row i holds C3(x_i) at column i,
  // C_{1,2}(x_i, x_j) for j != i in the remaining first-d columns, then
  // C_{2,1}(x_i, x_j) for j != i in ascending j.
  RealGrid cumulant_matrix() const {
    const std::size_t n = d();
    RealGrid m(n, n == 0 ? 0 : 2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t tail = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          m(i, j) = c3_[i];
          continue;
        }
        m(i, j) = c12(i, j);
        m(i, tail++) = c21(i, j);
      }
    }
    return m;
  }

  bool all_finite() const {
    for (double v : c3_)
      if (!std::isfinite(v)) return false;
    for (double v : c21_.data())
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const CumulantTable&, const CumulantTable&) = default;

 private:
  std::vector<std::string> variable_ids_;
  std::vector<double> c3_;
  RealGrid c21_;
};

// Bootstrap replicates of a client's table plus the full-sample table.
struct ReplicateSet {
  CumulantTable base;
  std::vector<CumulantTable> replicates;
  std::uint64_t seed = 0;

  std::size_t count() const noexcept { return replicates.size(); }
  friend bool operator==(const ReplicateSet&, const ReplicateSet&) = default;
};

namespace detail {

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline std::vector<double> centered(std::span<const double> x) {
  const double m = mean(x);
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) out[r] = x[r] - m;
  return out;
}

inline std::vector<double> centered_rows(std::span<const double> x, std::span<const std::size_t> rows) {
  double s = 0.0;
  for (std::size_t r : rows) s += x[r];
  const double m = s / static_cast<double>(rows.size());
  std::vector<double> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = x[rows[k]] - m;
  return out;
}

// Visits every set partition of {0, ..., k-1} as a block label per element.
template <typename Fn>
void for_each_partition(std::size_t k, Fn&& fn) {
  std::vector<std::size_t> label(k, 0);
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t blocks) -> void {
    if (pos == k) {
      fn(label, blocks);
      return;
    }
    for (std::size_t b = 0; b <= blocks; ++b) {
      label[pos] = b;
      self(self, pos + 1, b == blocks ? blocks + 1 : blocks);
    }
  };
  if (k > 0) recurse(recurse, 0, 0);
}

inline void fill_table(CumulantTable& table, const std::vector<std::vector<double>>& cols) {
  const std::size_t d = cols.size();
  const double n = static_cast<double>(cols.front().size());
  for (std::size_t i = 0; i < d; ++i) {
    const auto& xi = cols[i];
    double s3 = 0.0;
    for (double v : xi) s3 += v * v * v;
    table.set_c3(i, s3 / n);
    for (std::size_t j = 0; j < d; ++j) {
      if (j == i) continue;
      const auto& xj = cols[j];
      double s = 0.0;
      for (std::size_t r = 0; r < xi.size(); ++r) s += xi[r] * xi[r] * xj[r];
      table.set_c21(i, j, s / n);
    }
  }
}

}  // namespace detail

// Joint sample cumulant Cum(args[0], ..., args[k-1]) of any order k >= 1,
// via the moment-partition formula on mean-centered data. Arguments may
// repeat the same column.
inline double sample_cumulant(std::span<const std::span<const double>> args) {
  if (args.empty()) throw InvalidArgument("sample_cumulant: no arguments");
  const std::size_t n = args.front().size();
  for (auto a : args)
    if (a.size() != n) throw InvalidArgument("sample_cumulant: length mismatch");
  if (n < 2) throw InvalidArgument("sample_cumulant: need at least 2 samples");
  if (args.size() == 1) return detail::mean(args.front());

  std::vector<std::vector<double>> cols;
  cols.reserve(args.size());
  for (auto a : args) cols.push_back(detail::centered(a));

  const std::size_t k = args.size();
  std::vector<double> factorial(k + 1, 1.0);
  for (std::size_t i = 1; i <= k; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  double total = 0.0;
  detail::for_each_partition(k, [&](const std::vector<std::size_t>& label, std::size_t blocks) {
    double term = 1.0;
    for (std::size_t b = 0; b < blocks && term != 0.0; ++b) {
      std::size_t members = 0;
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double prod = 1.0;
        for (std::size_t e = 0; e < k; ++e)
          if (label[e] == b) prod *= cols[e][r];
        acc += prod;
      }
      for (std::size_t e = 0; e < k; ++e) members += label[e] == b;
      // centered data: singleton blocks contribute zero
      term *= members == 1 ? 0.0 : acc / static_cast<double>(n);
    }
    const double sign = (blocks % 2 == 1) ? 1.0 : -1.0;
    total += sign * factorial[blocks - 1] * term;
  });
  return total;
}

// C_{m,n}(x_i, x_j): x_i repeated m times, x_j repeated n times, m + n == 3.
inline double joint_cumulant(int m, int n, std::span<const double> xi, std::span<const double> xj) {
  if (m < 0 || n < 0 || m + n != 3)
    throw InvalidArgument("joint_cumulant: orders must satisfy m + n == 3");
  if (xi.size() != xj.size()) throw InvalidArgument("joint_cumulant: length mismatch");
  if (xi.size() < 2) throw InvalidArgument("joint_cumulant: need at least 2 samples");
  const auto ci = detail::centered(xi);
  const auto cj = detail::centered(xj);
  double s = 0.0;
  for (std::size_t r = 0; r < ci.size(); ++r) {
    double p = 1.0;
    for (int a = 0; a < m; ++a) p *= ci[r];
    for (int b = 0; b < n; ++b) p *= cj[r];
    s += p;
  }
  return s / static_cast<double>(ci.size());
}

inline CumulantTable estimate_cumulant_table(const SampleMatrix& samples) {
  if (samples.n() < 2) throw InvalidArgument("estimate_cumulant_table: fewer than 2 samples");
  std::vector<std::vector<double>> cols;
  cols.reserve(samples.d());
  for (std::size_t j = 0; j < samples.d(); ++j) {
    cols.push_back(detail::centered(samples.column(j)));
    if (std::all_of(cols.back().begin(), cols.back().end(), [](double v) { return v == 0.0; }))
      throw InvalidArgument("estimate_cumulant_table: zero-variance column " + samples.variable_ids()[j]);
  }
  CumulantTable table(samples.variable_ids());
  detail::fill_table(table, cols);
  return table;
}

// Table over a row subset (with repetition allowed), recentred on that subset.
inline CumulantTable estimate_cumulant_table(const SampleMatrix& samples,
                                             std::span<const std::size_t> rows) {
  if (rows.size() < 2) throw InvalidArgument("estimate_cumulant_table: fewer than 2 samples");
  std::vector<std::vector<double>> cols;
  cols.reserve(samples.d());
  for (std::size_t j = 0; j < samples.d(); ++j)
    cols.push_back(detail::centered_rows(samples.column(j), rows));
  CumulantTable table(samples.variable_ids());
  detail::fill_table(table, cols);
  return table;
}

// Row-wise resampling with replacement at full size n.
inline ReplicateSet bootstrap_tables(const SampleMatrix& samples, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("bootstrap_tables: need at least one replicate");
  ReplicateSet set;
  set.seed = seed;
  set.base = estimate_cumulant_table(samples);
  set.replicates.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.n() - 1);
  std::vector<std::size_t> rows(samples.n());
  for (std::size_t b = 0; b < count; ++b) {
    for (auto& r : rows) r = pick(rng);
    set.replicates.push_back(estimate_cumulant_table(samples, rows));
  }
  return set;
}

// Biased (1/n) covariance matrix.
inline RealGrid covariance_matrix(const SampleMatrix& samples) {
  const std::size_t d = samples.d();
  std::vector<std::vector<double>> cols;
  cols.reserve(d);
  for (std::size_t j = 0; j < d; ++j) cols.push_back(detail::centered(samples.column(j)));
  const double inv_n = 1.0 / static_cast<double>(samples.n());
  RealGrid cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < samples.n(); ++r) s += cols[i][r] * cols[j][r];
      cov(i, j) = cov(j, i) = s * inv_n;
    }
  return cov;
}

// Pearson correlation from a covariance grid. Throws on a zero-variance entry.
inline RealGrid correlation_from_covariance(const RealGrid& cov, const std::vector<std::string>& ids = {}) {
  const std::size_t d = cov.rows();
  for (std::size_t i = 0; i < d; ++i)
    if (!(cov(i, i) > 0.0))
      throw InvalidArgument("zero-variance variable " + (i < ids.size() ? ids[i] : std::to_string(i)));
  RealGrid corr(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    corr(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j)
      corr(i, j) = corr(j, i) = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
  }
  return corr;
}

inline RealGrid second_moment_matrix(const SampleMatrix& samples) {
  return correlation_from_covariance(covariance_matrix(samples), samples.variable_ids());
}

}  // namespace fedishc
