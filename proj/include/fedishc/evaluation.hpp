#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedishc/datagen.hpp"
#include "fedishc/discovery.hpp"
#include "fedishc/error.hpp"

namespace fedishc {

struct EvalReport {
  std::size_t shd = 0;
  double edge_precision = 0.0;
  double edge_recall = 0.0;
  double edge_f1 = 0.0;
  bool order_valid = true;
  double strength_rmse = 0.0;
  double strength_max_abs_err = 0.0;
};

// Directed edges present in `strengths` with |b| > threshold.
inline Grid<std::uint8_t> true_adjacency(const DagSpec& truth, double threshold = 0.0) {
  const std::size_t d = truth.d();
  Grid<std::uint8_t> adj(d, d, 0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) adj(i, j) = i != j && std::abs(truth.strengths(i, j)) > threshold;
  return adj;
}

// SHD counts each unordered pair whose edge state differs once, so a
// reversal costs 1.
inline EvalReport evaluate(const CausalModel& est, const DagSpec& truth, double edge_threshold_truth = 0.0) {
  if (est.variable_ids != truth.variable_ids) throw InvalidArgument("evaluate: variable sets differ");
  const std::size_t d = truth.d();
  const auto t = true_adjacency(truth, edge_threshold_truth);
  const auto& e = est.adjacency;

  EvalReport r;
  std::size_t tp = 0, est_edges = 0, true_edges = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      est_edges += e(i, j);
      true_edges += t(i, j);
      tp += e(i, j) && t(i, j);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (e(i, j) != t(i, j) || e(j, i) != t(j, i)) ++r.shd;

  r.edge_precision = est_edges == 0 ? (true_edges == 0 ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(est_edges);
  r.edge_recall = true_edges == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(true_edges);
  const double pr = r.edge_precision + r.edge_recall;
  r.edge_f1 = pr == 0.0 ? 0.0 : 2.0 * r.edge_precision * r.edge_recall / pr;

  std::vector<std::size_t> pos(d, d);
  for (std::size_t p = 0; p < est.order.size(); ++p) pos[est.order[p]] = p;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (t(i, j) && pos[j] > pos[i]) r.order_valid = false;

  double ss = 0.0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      const double err = std::abs(est.strengths(i, j) - truth.strengths(i, j));
      ss += err * err;
      r.strength_max_abs_err = std::max(r.strength_max_abs_err, err);
      ++cells;
    }
  r.strength_rmse = cells == 0 ? 0.0 : std::sqrt(ss / static_cast<double>(cells));
  return r;
}

}  // namespace fedishc
