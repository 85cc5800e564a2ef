#pragma once

// One-round protocol: variable registry, client uploads and the
// sample-size-weighted aggregation into global cumulants.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fedishc/cumulants.hpp"
#include "fedishc/datagen.hpp"
#include "fedishc/error.hpp"
#include "fedishc/grid.hpp"

namespace fedishc {

class VariableRegistry {
 public:
  VariableRegistry() = default;

  explicit VariableRegistry(const std::vector<std::vector<std::string>>& variable_sets) {
    if (variable_sets.empty()) throw InvalidArgument("build_registry: no clients");
    std::map<std::string, std::size_t> sorted;
    for (std::size_t k = 0; k < variable_sets.size(); ++k) {
      if (variable_sets[k].empty()) throw InvalidArgument("build_registry: client " + std::to_string(k) + " is empty");
      std::unordered_set<std::string> seen;
      for (const auto& id : variable_sets[k]) {
        if (!seen.insert(id).second)
          throw InvalidArgument("build_registry: duplicate id " + id + " within client " + std::to_string(k));
        sorted.emplace(id, 0);
      }
    }
    for (auto& [id, idx] : sorted) {
      idx = global_ids_.size();
      global_ids_.push_back(id);
      index_.emplace(id, idx);
    }
    for (const auto& set : variable_sets) {
      std::vector<std::size_t> map;
      for (const auto& id : set) map.push_back(index_.at(id));
      local_to_global_.push_back(std::move(map));
    }
  }

  std::size_t d() const noexcept { return global_ids_.size(); }
  std::size_t clients() const noexcept { return local_to_global_.size(); }
  const std::vector<std::string>& global_ids() const noexcept { return global_ids_; }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidArgument("unregistered variable " + id);
    return it->second;
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  // Local column position -> global index, for the client registered k-th.
  const std::vector<std::size_t>& local_to_global(std::size_t client) const { return local_to_global_.at(client); }

 private:
  std::vector<std::string> global_ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> local_to_global_;
};

inline VariableRegistry build_registry(const std::vector<std::vector<std::string>>& variable_sets) {
  return VariableRegistry(variable_sets);
}

// What one client sends: its sample count, its variables, the replicate
// cumulant tensor, and its second-moment matrix (used only by the Gaussian
// diagnostics).
struct ClientUpload {
  std::string client_id;
  std::uint64_t n_k = 0;
  std::vector<std::string> variable_ids;
  ReplicateSet tensor;
  RealGrid covariance;

  void validate() const {
    if (n_k < 2) throw InvalidArgument("upload " + client_id + ": n_k < 2");
    if (tensor.replicates.empty()) throw InvalidArgument("upload " + client_id + ": no replicates");
    if (tensor.base.variable_ids() != variable_ids)
      throw InvalidArgument("upload " + client_id + ": base table variables differ from upload");
    for (const auto& r : tensor.replicates)
      if (r.variable_ids() != variable_ids)
        throw InvalidArgument("upload " + client_id + ": replicate variables differ from upload");
    const std::size_t d = variable_ids.size();
    if (covariance.rows() != d || covariance.cols() != d)
      throw InvalidArgument("upload " + client_id + ": covariance has wrong shape");
  }

  friend bool operator==(const ClientUpload&, const ClientUpload&) = default;
};

// Client side of the protocol.
inline ClientUpload make_upload(const ClientDataset& data, std::size_t replicates, std::uint64_t seed) {
  ClientUpload up;
  up.client_id = data.client_id;
  up.n_k = data.samples.n();
  up.variable_ids = data.samples.variable_ids();
  up.tensor = bootstrap_tables(data.samples, replicates, seed);
  up.covariance = covariance_matrix(data.samples);
  return up;
}

struct GlobalCumulantTable {
  CumulantTable base;
  std::vector<CumulantTable> replicates;
  // Client ids contributing to each (i, j) cell, sorted.
  Grid<std::vector<std::string>> coverage;
  // Sum of n_k over the contributing clients.
  Grid<std::uint64_t> weights_used;
  RealGrid covariance;

  std::size_t d() const noexcept { return base.d(); }
  const std::vector<std::string>& variable_ids() const noexcept { return base.variable_ids(); }
};

// Weights n_k / sum n for one cell. The last weight is the complement
// of the others so the weights sum to 1.
inline std::vector<double> cell_weights(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> w(counts.size());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < counts.size(); ++k) {
    w[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    acc += w[k];
  }
  if (!counts.empty()) w.back() = 1.0 - acc;
  return w;
}

inline GlobalCumulantTable aggregate(std::vector<ClientUpload> uploads, const VariableRegistry& registry) {
  if (uploads.empty()) throw InvalidArgument("aggregate: no uploads");
  std::sort(uploads.begin(), uploads.end(),
            [](const ClientUpload& a, const ClientUpload& b) { return a.client_id < b.client_id; });
  for (std::size_t k = 1; k < uploads.size(); ++k)
    if (uploads[k].client_id == uploads[k - 1].client_id)
      throw InvalidArgument("aggregate: duplicate client id " + uploads[k].client_id);
  const std::size_t reps = uploads.front().tensor.count();
  for (const auto& up : uploads) {
    up.validate();
    if (up.tensor.count() != reps)
      throw InvalidArgument("aggregate: mismatched replicate counts (" + std::to_string(up.tensor.count()) +
                            " from " + up.client_id + ", expected " + std::to_string(reps) + ")");
  }

  const std::size_t d = registry.d();
  const auto& ids = registry.global_ids();

  // For each client, global index -> local position (or npos).
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::vector<std::size_t>> local(uploads.size(), std::vector<std::size_t>(d, npos));
  for (std::size_t k = 0; k < uploads.size(); ++k)
    for (std::size_t p = 0; p < uploads[k].variable_ids.size(); ++p)
      local[k][registry.index_of(uploads[k].variable_ids[p])] = p;

  GlobalCumulantTable global;
  global.base = CumulantTable(ids);
  global.replicates.assign(reps, CumulantTable(ids));
  global.coverage = Grid<std::vector<std::string>>(d, d);
  global.weights_used = Grid<std::uint64_t>(d, d, 0);
  global.covariance = RealGrid(d, d);

  std::vector<std::size_t> holders;
  std::vector<std::uint64_t> counts;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      holders.clear();
      counts.clear();
      for (std::size_t k = 0; k < uploads.size(); ++k)
        if (local[k][i] != npos && local[k][j] != npos) {
          holders.push_back(k);
          counts.push_back(uploads[k].n_k);
        }
      if (holders.empty()) {
        const auto& a = ids[std::min(i, j)];
        const auto& b = ids[std::max(i, j)];
        throw AssumptionViolated(a, b);
      }
      for (std::size_t k : holders) global.coverage(i, j).push_back(uploads[k].client_id);
      std::uint64_t total = 0;
      for (auto c : counts) total += c;
      global.weights_used(i, j) = total;
      const auto w = cell_weights(counts);

      auto combine = [&](auto&& cell) {
        double acc = 0.0;
        for (std::size_t h = 0; h < holders.size(); ++h) acc += w[h] * cell(holders[h]);
        return acc;
      };
      auto li = [&](std::size_t k) { return local[k][i]; };
      auto lj = [&](std::size_t k) { return local[k][j]; };

      global.covariance(i, j) = combine([&](std::size_t k) { return uploads[k].covariance(li(k), lj(k)); });
      if (i == j) {
        global.base.set_c3(i, combine([&](std::size_t k) { return uploads[k].tensor.base.c3(li(k)); }));
        for (std::size_t b = 0; b < reps; ++b)
          global.replicates[b].set_c3(
              i, combine([&](std::size_t k) { return uploads[k].tensor.replicates[b].c3(li(k)); }));
      } else {
        global.base.set_c21(i, j, combine([&](std::size_t k) { return uploads[k].tensor.base.c21(li(k), lj(k)); }));
        for (std::size_t b = 0; b < reps; ++b)
          global.replicates[b].set_c21(
              i, j, combine([&](std::size_t k) { return uploads[k].tensor.replicates[b].c21(li(k), lj(k)); }));
      }
    }
  return global;
}

// Global table for a single trusted table (population oracles, tests): the
// same table serves as base and as every replicate.
inline GlobalCumulantTable replicate_table(const CumulantTable& table, std::size_t replicates = 1,
                                           std::uint64_t n = 0) {
  const std::size_t d = table.d();
  GlobalCumulantTable g;
  g.base = table;
  g.replicates.assign(replicates, table);
  g.coverage = Grid<std::vector<std::string>>(d, d, std::vector<std::string>{"oracle"});
  g.weights_used = Grid<std::uint64_t>(d, d, n);
  g.covariance = RealGrid::identity(d);
  return g;
}

struct CommunicationCost {
  std::string client_id;
  std::size_t d_k = 0;
  std::size_t replicates = 0;
  std::uint64_t scalars = 0;      // d_k (2 d_k - 1) B + 1
  std::uint64_t encoded_bytes = 0;
};

inline std::uint64_t scalar_count(std::size_t d_k, std::size_t replicates) {
  return static_cast<std::uint64_t>(d_k) * (2 * d_k - 1) * replicates + 1;
}

}  // namespace fedishc
