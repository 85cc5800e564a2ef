#pragma once

// On-disk artifacts: per-client CSV files with a manifest, ground-truth DAGs,
// discovered graphs (json / dot / csv-edges) and reports. JSON output is
// canonical: sorted keys, shortest round-trip number formatting.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedishc/datagen.hpp"
#include "fedishc/discovery.hpp"
#include "fedishc/error.hpp"
#include "fedishc/evaluation.hpp"
#include "fedishc/federation.hpp"
#include "fedishc/gaussian.hpp"

namespace fedishc::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, std::string_view text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

inline void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

inline json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw IoError("invalid JSON in " + p.string() + ": " + e.what());
  }
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---- client CSV ---------------------------------------------------------

inline std::string to_csv(const SampleMatrix& m) {
  std::string out;
  for (std::size_t j = 0; j < m.d(); ++j) {
    if (j) out += ',';
    out += m.variable_ids()[j];
  }
  out += '\n';
  for (std::size_t r = 0; r < m.n(); ++r) {
    for (std::size_t j = 0; j < m.d(); ++j) {
      if (j) out += ',';
      out += format_double(m.at(r, j));
    }
    out += '\n';
  }
  return out;
}

inline SampleMatrix from_csv(std::string_view text, const std::string& source = "csv") {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cols;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (ids.empty()) {
      for (auto f : fields) ids.emplace_back(f);
      cols.resize(ids.size());
      continue;
    }
    if (fields.size() != ids.size())
      throw IoError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(ids.size()) + " fields");
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      const auto f = fields[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
        throw IoError(source + ":" + std::to_string(line_no) + ": bad number '" + std::string(f) + "'");
      cols[j].push_back(v);
    }
  }
  if (ids.empty()) throw IoError(source + ": empty file");
  try {
    return SampleMatrix(std::move(ids), std::move(cols));
  } catch (const InvalidArgument& e) {
    throw IoError(source + ": " + e.what());
  }
}

// ---- manifest -----------------------------------------------------------

struct ClientEntry {
  std::string client_id;
  std::string file;
  std::vector<std::string> variable_ids;
  std::uint64_t n_k = 0;
};

struct Manifest {
  std::string mode = "horizontal";
  std::uint64_t seed = 0;
  std::vector<std::string> variable_ids;
  std::vector<ClientEntry> clients;
  std::string truth_file;  // empty when unknown
};

inline json to_json(const Manifest& m) {
  json clients = json::array();
  for (const auto& c : m.clients)
    clients.push_back({{"client_id", c.client_id}, {"file", c.file}, {"variable_ids", c.variable_ids}, {"n_k", c.n_k}});
  json j = {{"mode", m.mode}, {"seed", m.seed}, {"variable_ids", m.variable_ids}, {"clients", clients}};
  if (!m.truth_file.empty()) j["truth"] = m.truth_file;
  return j;
}

inline Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    m.mode = j.value("mode", "unknown");
    m.seed = j.value("seed", std::uint64_t{0});
    m.variable_ids = j.value("variable_ids", std::vector<std::string>{});
    for (const auto& c : j.at("clients"))
      m.clients.push_back({c.at("client_id").get<std::string>(), c.at("file").get<std::string>(),
                           c.value("variable_ids", std::vector<std::string>{}), c.value("n_k", std::uint64_t{0})});
    m.truth_file = j.value("truth", std::string{});
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline void write_dataset(const fs::path& dir, const std::vector<ClientDataset>& clients, Manifest manifest) {
  fs::create_directories(dir);
  manifest.clients.clear();
  for (const auto& c : clients) {
    const std::string file = c.client_id + ".csv";
    write_file(dir / file, to_csv(c.samples));
    manifest.clients.push_back({c.client_id, file, c.samples.variable_ids(), c.samples.n()});
  }
  write_json(dir / "manifest.json", to_json(manifest));
}

inline std::vector<ClientDataset> read_dataset(const fs::path& dir, Manifest* manifest_out = nullptr) {
  const Manifest m = manifest_from_json(read_json(dir / "manifest.json"));
  std::vector<ClientDataset> out;
  for (const auto& c : m.clients) {
    auto samples = from_csv(read_file(dir / c.file), c.file);
    if (!c.variable_ids.empty() && samples.variable_ids() != c.variable_ids)
      throw IoError(c.file + ": header disagrees with manifest");
    out.push_back({c.client_id, std::move(samples)});
  }
  if (manifest_out) *manifest_out = m;
  return out;
}

// ---- ground truth -------------------------------------------------------

inline json to_json(const DagSpec& dag) {
  return {{"variable_ids", dag.variable_ids}, {"strengths", dag.strengths.nested()}, {"order", dag.order}};
}

inline RealGrid grid_from(const json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) throw IoError("matrix has wrong shape");
  RealGrid g(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw IoError("matrix has wrong shape");
    for (std::size_t c = 0; c < cols; ++c) g(r, c) = j[r][c].get<double>();
  }
  return g;
}

inline DagSpec dag_from_json(const json& j) {
  try {
    DagSpec dag;
    dag.variable_ids = j.at("variable_ids").get<std::vector<std::string>>();
    const std::size_t d = dag.variable_ids.size();
    dag.strengths = grid_from(j.at("strengths"), d, d);
    dag.order = j.at("order").get<std::vector<std::size_t>>();
    dag.validate();
    return dag;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed DAG: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

// ---- discovered graph ---------------------------------------------------

inline json to_json(const CausalModel& m) {
  std::vector<std::vector<int>> adj(m.d(), std::vector<int>(m.d()));
  for (std::size_t i = 0; i < m.d(); ++i)
    for (std::size_t j = 0; j < m.d(); ++j) adj[i][j] = m.adjacency(i, j);
  json edges = json::array();
  for (std::size_t i = 0; i < m.d(); ++i)
    for (std::size_t j = 0; j < m.d(); ++j)
      if (m.adjacency(i, j)) edges.push_back({{"src", m.variable_ids[j]}, {"dst", m.variable_ids[i]}, {"strength", m.strengths(i, j)}});
  json steps = json::array();
  for (std::size_t t = 0; t < m.steps.size(); ++t)
    steps.push_back({{"source", m.variable_ids[m.order[t]]},
                     {"score_mean", m.steps[t].mean_score},
                     {"score_sd", m.steps[t].sd_score},
                     {"zero_accepted", m.steps[t].zero_accepted}});
  return {{"variable_ids", m.variable_ids},
          {"order", m.order_ids()},
          {"strengths", m.strengths.nested()},
          {"mixing_lower", m.mixing_lower.nested()},
          {"adjacency", adj},
          {"edges", edges},
          {"steps", steps}};
}

inline CausalModel model_from_json(const json& j) {
  try {
    CausalModel m;
    m.variable_ids = j.at("variable_ids").get<std::vector<std::string>>();
    const std::size_t d = m.variable_ids.size();
    for (const auto& id : j.at("order").get<std::vector<std::string>>()) {
      auto it = std::find(m.variable_ids.begin(), m.variable_ids.end(), id);
      if (it == m.variable_ids.end()) throw IoError("order names unknown variable " + id);
      m.order.push_back(static_cast<std::size_t>(it - m.variable_ids.begin()));
    }
    m.strengths = grid_from(j.at("strengths"), d, d);
    m.mixing_lower = grid_from(j.at("mixing_lower"), d, d);
    m.adjacency = Grid<std::uint8_t>(d, d, 0);
    const auto& adj = j.at("adjacency");
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) m.adjacency(i, k) = adj.at(i).at(k).get<int>() != 0;
    for (std::size_t t = 0; t < m.order.size() && j.contains("steps") && t < j["steps"].size(); ++t) {
      const auto& s = j["steps"][t];
      SourceSelection sel;
      sel.index = m.order[t];
      sel.mean_score = s.value("score_mean", 0.0);
      sel.sd_score = s.value("score_sd", 0.0);
      sel.zero_accepted = s.value("zero_accepted", true);
      m.steps.push_back(sel);
    }
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed graph: ") + e.what());
  }
}

inline std::string to_dot(const CausalModel& m) {
  std::ostringstream out;
  out << "digraph fedishc {\n";
  for (const auto& id : m.variable_ids) out << "  \"" << id << "\";\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < m.d(); ++i)
    for (std::size_t j = 0; j < m.d(); ++j)
      if (m.adjacency(i, j))
        out << "  \"" << m.variable_ids[j] << "\" -> \"" << m.variable_ids[i] << "\" [label=\"" << m.strengths(i, j)
            << "\"];\n";
  out << "}\n";
  return out.str();
}

inline std::string to_csv_edges(const CausalModel& m) {
  std::string out = "src,dst,strength\n";
  for (std::size_t i = 0; i < m.d(); ++i)
    for (std::size_t j = 0; j < m.d(); ++j)
      if (m.adjacency(i, j)) out += m.variable_ids[j] + "," + m.variable_ids[i] + "," + format_double(m.strengths(i, j)) + "\n";
  return out;
}

enum class GraphFormat { json, dot, csv_edges };

inline GraphFormat parse_graph_format(std::string_view s) {
  if (s == "json") return GraphFormat::json;
  if (s == "dot") return GraphFormat::dot;
  if (s == "csv-edges" || s == "csv") return GraphFormat::csv_edges;
  throw InvalidArgument("unknown graph format '" + std::string(s) + "'");
}

inline std::string_view file_name(GraphFormat f) {
  switch (f) {
    case GraphFormat::json: return "graph.json";
    case GraphFormat::dot: return "graph.dot";
    case GraphFormat::csv_edges: return "edges.csv";
  }
  return "graph";
}

inline void export_graph(const CausalModel& m, GraphFormat f, const fs::path& path) {
  switch (f) {
    case GraphFormat::json: write_json(path, to_json(m)); return;
    case GraphFormat::dot: write_file(path, to_dot(m)); return;
    case GraphFormat::csv_edges: write_file(path, to_csv_edges(m)); return;
  }
}

// ---- reports ------------------------------------------------------------

inline json to_json(const EvalReport& r) {
  return {{"shd", r.shd},
          {"edge_precision", r.edge_precision},
          {"edge_recall", r.edge_recall},
          {"edge_f1", r.edge_f1},
          {"order_valid", r.order_valid},
          {"strength_rmse", r.strength_rmse},
          {"strength_max_abs_err", r.strength_max_abs_err}};
}

inline json to_json(const std::vector<CommunicationCost>& costs) {
  json clients = json::array();
  std::uint64_t scalars = 0, bytes = 0;
  for (const auto& c : costs) {
    clients.push_back({{"client_id", c.client_id},
                       {"d_k", c.d_k},
                       {"replicates", c.replicates},
                       {"scalars", c.scalars},
                       {"encoded_bytes", c.encoded_bytes}});
    scalars += c.scalars;
    bytes += c.encoded_bytes;
  }
  return {{"clients", clients}, {"total_scalars", scalars}, {"total_encoded_bytes", bytes}};
}

inline json to_json(const GaussianReport& r, const std::vector<std::string>& ids, const RealGrid* corr) {
  json vars = json::array();
  for (std::size_t i = 0; i < ids.size(); ++i)
    vars.push_back({{"id", ids[i]}, {"c3", r.c3[i]}, {"threshold", r.threshold[i]}, {"gaussian", r.flags[i] != 0}});
  json j = {{"variables", vars}, {"all_gaussian", r.all_gaussian}};
  if (corr) j["correlation"] = corr->nested();
  return j;
}

}  // namespace fedishc::io
