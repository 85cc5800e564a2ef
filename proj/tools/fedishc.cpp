// fedishc: generate partitioned LiNGAM data, run the one-round federated
// protocol and the cumulant-based discovery, evaluate against ground truth.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedishc/fedishc.hpp"

namespace fs = std::filesystem;
using namespace fedishc;

namespace {

enum Exit : int {
  kOk = 0,
  kGeneric = 1,
  kAssumption = 2,
  kNearSymmetric = 3,
  kIo = 4,
  kGaussianMode = 5,
};

// FEDISHC_LOG: quiet | warn (default) | info | debug
int log_level() {
  static const int level = [] {
    const char* v = std::getenv("FEDISHC_LOG");
    const std::string s = v ? v : "warn";
    if (s == "quiet") return 0;
    if (s == "info") return 2;
    if (s == "debug") return 3;
    return 1;
  }();
  return level;
}

void log(int level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "fedishc: " << msg << "\n";
}

struct GaussianModeExit {
  std::string message;
};

struct GenerateOptions {
  std::size_t d = 5;
  double edge_prob = 0.4;
  std::string noise = "exponential";
  std::size_t n = 10000;
  std::size_t clients = 3;
  std::string mode = "hybrid";
  std::uint64_t seed = 1;
  bool chain = false;
  double weight_lo = 0.5;
  double weight_hi = 1.5;
  std::size_t subset_size = 0;  // 0: default
};

struct DiscoverOptions {
  std::size_t replicates = 30;
  std::string rule = "argmin-mean";
  double c3_guard = 1e-3;
  double symmetry_z = 4.0;
  double edge_threshold = 0.05;
  double significance = 0.05;
  std::size_t threads = 0;
  std::string transport = "in-process";
  std::vector<std::string> formats{"json"};
  bool gaussian_preflight = false;
  std::optional<std::uint64_t> seed;
};

void add_generate_flags(CLI::App* app, GenerateOptions& g) {
  app->add_option("--d", g.d, "number of variables")->check(CLI::Range(2, 10000));
  app->add_option("--edge-prob", g.edge_prob, "edge probability of the random DAG")->check(CLI::Range(0.0, 1.0));
  app->add_option("--noise", g.noise, "uniform|exponential|gumbel|laplace-asymmetric|gaussian");
  app->add_option("--n", g.n, "total number of samples")->check(CLI::PositiveNumber);
  app->add_option("--K,--clients", g.clients, "number of clients")->check(CLI::PositiveNumber);
  app->add_option("--mode", g.mode, "horizontal|vertical|hybrid");
  app->add_option("--seed", g.seed, "master seed");
  app->add_flag("--chain", g.chain, "x1 -> x2 -> ... chain instead of a random DAG");
  app->add_option("--weight-lo", g.weight_lo, "smallest |b|");
  app->add_option("--weight-hi", g.weight_hi, "largest |b|");
  app->add_option("--subset-size", g.subset_size, "variables per client in vertical/hybrid mode");
}

void add_discover_flags(CLI::App* app, DiscoverOptions& o) {
  app->add_option("--replicates,-B", o.replicates, "bootstrap replicates per client")->check(CLI::PositiveNumber);
  app->add_option("--rule", o.rule, "argmin-mean|z-ratio");
  app->add_option("--c3-guard", o.c3_guard, "absolute floor on |C3| of a selected source");
  app->add_option("--symmetry-z", o.symmetry_z, "replicate standard errors |C3| must clear (0 disables)");
  app->add_option("--edge-threshold", o.edge_threshold, "prune |b| below this");
  app->add_option("--significance", o.significance, "level for the per-step zero test and CI decisions");
  app->add_option("--threads", o.threads, "client workers (0: all cores)");
  app->add_option("--transport", o.transport, "in-process|socket");
  app->add_option("--format", o.formats, "json|dot|csv-edges (repeatable)");
  app->add_flag("--gaussian-preflight", o.gaussian_preflight,
                "stop with the gaussian-mode status when every variable looks Gaussian");
}

DagSpec make_dag(const GenerateOptions& g) {
  const WeightRange w{g.weight_lo, g.weight_hi};
  if (!g.chain) return random_dag(g.d, g.edge_prob, w, g.seed);
  std::mt19937_64 rng(g.seed);
  std::uniform_real_distribution<double> mag(w.lo, w.hi);
  std::bernoulli_distribution neg(0.5);
  std::vector<double> coeffs(g.d - 1);
  for (auto& c : coeffs) {
    const double m = mag(rng);
    c = neg(rng) ? -m : m;
  }
  return chain_dag(coeffs);
}

void generate(const GenerateOptions& g, const fs::path& out) {
  const auto dag = make_dag(g);
  const auto noise = NoiseSpec::uniform_spec(g.d, parse_noise_family(g.noise));
  const auto mode = parse_partition_mode(g.mode);
  const auto samples = sample_lingam(dag, noise, g.n, g.seed + 1);
  const auto spec = make_partition(mode, g.clients, samples.variable_ids(), samples.n(), g.seed + 2,
                                   g.subset_size ? std::optional(g.subset_size) : std::nullopt);
  const auto clients = partition(samples, spec);

  io::Manifest m;
  m.mode = std::string(to_string(mode));
  m.seed = g.seed;
  m.variable_ids = samples.variable_ids();
  m.truth_file = "truth.json";
  io::write_dataset(out, clients, m);
  io::write_json(out / "truth.json", io::to_json(dag));
  log(2, "wrote " + std::to_string(clients.size()) + " clients to " + out.string());
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

nlohmann::json gaussian_json(const GlobalCumulantTable& g, const GaussianReport& r) {
  std::optional<RealGrid> corr;
  try {
    corr = federated_correlation(g);
  } catch (const InvalidArgument&) {
  }
  return io::to_json(r, g.variable_ids(), corr ? &*corr : nullptr);
}

std::vector<std::string> flagged_ids(const GlobalCumulantTable& g, const GaussianReport& r) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < r.flags.size(); ++i)
    if (r.flags[i]) out.push_back(g.variable_ids()[i]);
  return out;
}

void discover_dataset(const fs::path& data, const fs::path& result, const DiscoverOptions& o) {
  io::Manifest manifest;
  const auto clients = io::read_dataset(data, &manifest);
  DiscoveryConfig cfg;
  cfg.c3_guard = o.c3_guard;
  cfg.symmetry_z = o.symmetry_z;
  cfg.edge_threshold = o.edge_threshold;
  cfg.significance = o.significance;
  cfg.selection_rule = parse_selection_rule(o.rule);
  cfg.validate();
  std::vector<io::GraphFormat> formats;
  for (const auto& f : o.formats) formats.push_back(io::parse_graph_format(f));

  ProtocolOptions popt;
  popt.replicates = o.replicates;
  popt.seed = o.seed.value_or(manifest.seed);
  popt.threads = o.threads;
  popt.transport = parse_transport(o.transport);
  const auto proto = run_protocol(clients, popt);
  log(2, "aggregated " + std::to_string(proto.uploads.size()) + " uploads over " +
             std::to_string(proto.global.d()) + " variables");

  fs::create_directories(result);
  std::vector<CommunicationCost> costs;
  std::uint64_t total_n = 0;
  for (const auto& u : proto.uploads) {
    costs.push_back(communication_cost(u));
    total_n += u.n_k;
  }
  io::write_json(result / "comm.json", io::to_json(costs));

  const auto gauss = detect_gaussian(proto.global, total_n);
  io::write_json(result / "gaussian.json", gaussian_json(proto.global, gauss));
  if (o.gaussian_preflight && gauss.all_gaussian)
    throw GaussianModeExit{"every variable has a third cumulant indistinguishable from zero (" +
                           join(flagged_ids(proto.global, gauss)) +
                           "); the model is not identifiable, see gaussian.json for the correlation matrix"};

  CausalModel model;
  try {
    model = discover(proto.global, cfg);
  } catch (const NearSymmetricNoise& e) {
    const auto flagged = flagged_ids(proto.global, gauss);
    throw NearSymmetricNoise(e.variable(), e.c3(), e.threshold(), e.partial_order(),
                             "flagged as symmetric: " + (flagged.empty() ? std::string("none") : join(flagged)));
  }
  for (auto f : formats) io::export_graph(model, f, result / io::file_name(f));
  if (std::find(formats.begin(), formats.end(), io::GraphFormat::json) == formats.end())
    io::export_graph(model, io::GraphFormat::json, result / "graph.json");
  log(2, "order: " + join(model.order_ids()));
}

void eval_dataset(const fs::path& graph, const fs::path& truth, const fs::path& report, double threshold) {
  const auto model = io::model_from_json(io::read_json(graph));
  const auto dag = io::dag_from_json(io::read_json(truth));
  const auto r = evaluate(model, dag, threshold);
  io::write_json(report, io::to_json(r));
  std::cout << "shd=" << r.shd << " f1=" << r.edge_f1 << " order_valid=" << (r.order_valid ? "true" : "false")
            << " rmse=" << r.strength_rmse << "\n";
}

fs::path truth_path(const fs::path& data) {
  const auto m = io::manifest_from_json(io::read_json(data / "manifest.json"));
  if (m.truth_file.empty()) throw IoError("manifest has no ground truth; pass --truth");
  return data / m.truth_file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated causal discovery from third-order cumulants"};
  app.set_config("--config", "", "TOML/INI file; command-line flags take precedence");
  app.require_subcommand(1);

  GenerateOptions gen;
  DiscoverOptions disc;
  fs::path out = "fedishc_out", data, result, graph, truth, report;
  double truth_threshold = 0.0;

  auto* g = app.add_subcommand("generate", "sample a LiNGAM system and split it across clients");
  add_generate_flags(g, gen);
  g->add_option("--out", out, "dataset directory");

  auto* d = app.add_subcommand("discover", "run the federated protocol and discovery on a dataset");
  add_discover_flags(d, disc);
  d->add_option("--data", data, "dataset directory (manifest.json + client CSVs)")->required();
  d->add_option("--result", result, "output directory (default <data>/result)");
  d->add_option("--seed", disc.seed, "bootstrap seed (default: manifest seed)");

  auto* e = app.add_subcommand("eval", "compare a discovered graph with the ground truth");
  e->add_option("--data", data, "dataset directory");
  e->add_option("--graph", graph, "graph.json (default <data>/result/graph.json)");
  e->add_option("--truth", truth, "truth.json (default from the manifest)");
  e->add_option("--report", report, "output (default next to the graph)");
  e->add_option("--truth-threshold", truth_threshold, "ignore true edges with |b| at or below this");

  auto* r = app.add_subcommand("run", "generate, discover and evaluate in one go");
  add_generate_flags(r, gen);
  add_discover_flags(r, disc);
  r->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*g) {
      generate(gen, out);
    } else if (*d) {
      discover_dataset(data, result.empty() ? data / "result" : result, disc);
    } else if (*e) {
      if (data.empty() && (graph.empty() || truth.empty())) throw InvalidArgument("eval needs --data or --graph and --truth");
      if (graph.empty()) graph = data / "result" / "graph.json";
      if (truth.empty()) truth = truth_path(data);
      eval_dataset(graph, truth, report.empty() ? graph.parent_path() / "report.json" : report, truth_threshold);
    } else if (*r) {
      generate(gen, out);
      if (!disc.seed) disc.seed = gen.seed;
      discover_dataset(out, out / "result", disc);
      eval_dataset(out / "result" / "graph.json", out / "truth.json", out / "result" / "report.json", 0.0);
    }
  } catch (const GaussianModeExit& x) {
    std::cerr << "fedishc: gaussian mode: " << x.message << "\n";
    return kGaussianMode;
  } catch (const AssumptionViolated& x) {
    std::cerr << "fedishc: assumption violated: " << x.what() << "\n";
    return kAssumption;
  } catch (const NearSymmetricNoise& x) {
    std::cerr << "fedishc: near-symmetric noise: " << x.what() << "\n";
    return kNearSymmetric;
  } catch (const IoError& x) {
    std::cerr << "fedishc: i/o error: " << x.what() << "\n";
    return kIo;
  } catch (const DecodeError& x) {
    std::cerr << "fedishc: i/o error: " << x.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& x) {
    std::cerr << "fedishc: i/o error: " << x.what() << "\n";
    return kIo;
  } catch (const std::exception& x) {
    std::cerr << "fedishc: error: " << x.what() << "\n";
    return kGeneric;
  }
  return kOk;
}
