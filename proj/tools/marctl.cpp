// marctl: command-line front end for the mar library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mar/mar.hpp"

namespace {

using namespace mar;
using nlohmann::json;

constexpr int exit_usage = 2;
constexpr int exit_failure = 1;

// Options shared by every leaf command.
struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string format = "json";
  std::string output;
};

struct Context {
  std::string command;
  std::string config_hash = "none";
};

Context g_ctx;

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  sub->add_option("--config", c.config, "JSON config file (default: $MAR_CONFIG)");
  sub->add_option("--format", c.format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  sub->add_option("--output", c.output, "output file (default: stdout)");
}

// Writes to --output or stdout.
template <typename Fn>
void with_output(const Common& c, Fn&& fn) {
  if (c.output.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(c.output);
  if (!out) throw error("cannot open '" + c.output + "' for writing");
  fn(out);
  if (!out) throw error("write to '" + c.output + "' failed");
}

io::MetricsReport new_report(const Common& c) {
  io::MetricsReport r;
  r.meta["command"] = g_ctx.command;
  r.meta["seed"] = std::to_string(c.seed);
  r.meta["config_hash"] = g_ctx.config_hash;
  return r;
}

void emit(const Common& c, const io::MetricsReport& r) {
  with_output(c, [&](std::ostream& out) { io::write_report(out, r, io::parse_format(c.format)); });
}

void add_warnings(io::MetricsReport& r, const std::vector<std::string>& warnings) {
  for (std::size_t i = 0; i < warnings.size(); ++i) r.meta["warning" + std::to_string(i)] = warnings[i];
}

// Row table output: CSV with a header, or JSON {"meta":..., "rows": [...]}.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  json extra = json::object();
};

void emit_table(const Common& c, const Table& t) {
  with_output(c, [&](std::ostream& out) {
    if (io::parse_format(c.format) == io::Format::csv) {
      for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
      out << '\n';
      for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << io::format_double(row[i]);
        out << '\n';
      }
      return;
    }
    json doc;
    doc["meta"] = {{"command", g_ctx.command}, {"seed", std::to_string(c.seed)}, {"config_hash", g_ctx.config_hash}};
    doc["summary"] = t.extra;
    doc["rows"] = json::array();
    for (const auto& row : t.rows) {
      json o = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (std::isfinite(row[i])) {
          o[t.columns[i]] = row[i];
        } else {
          o[t.columns[i]] = nullptr;
        }
      }
      doc["rows"].push_back(o);
    }
    out << doc.dump(2) << '\n';
  });
}

int max_label(const std::vector<int>& labels) {
  if (labels.empty()) throw invalid_argument("dataset is empty");
  return *std::max_element(labels.begin(), labels.end());
}

std::size_t distinct(const std::vector<int>& labels) { return std::set<int>(labels.begin(), labels.end()).size(); }

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw invalid_argument("bad number '" + tok + "' in list '" + s + "'");
    }
  }
  return out;
}

// Clustering and retrieval scores of a representation.
void representation_metrics(io::MetricsReport& r, const Matrix& z, const std::vector<int>& labels,
                            std::size_t topk, std::uint64_t seed) {
  const std::size_t k = distinct(labels);
  if (k >= 2 && static_cast<std::size_t>(z.rows()) >= k) {
    const metrics::KMeansResult km = metrics::kmeans(z, k, 10, seed);
    r.values["clustering_accuracy"] = metrics::clustering_accuracy(km.assignments, labels);
    r.values["nmi"] = metrics::nmi(km.assignments, labels);
  }
  if (topk > 0) r.values["precision_at_k"] = metrics::precision_at_k(z, z, labels, labels, topk, true);
}

void angle_metrics(io::MetricsReport& r, const Matrix& rows, double gamma) {
  if (rows.rows() < 2) return;
  const MarBreakdown b = mar_breakdown(rows, gamma);
  const std::vector<double> angles = pairwise_angles(rows);
  r.values["mean_angle"] = b.mean_angle;
  r.values["angle_variance"] = b.angle_variance;
  r.values["omega"] = b.omega;
  r.values["min_angle"] = *std::min_element(angles.begin(), angles.end());
}

// ---------------------------------------------------------------------------
// reg

struct RegOpts {
  Common common;
  std::string input;
  double gamma = 1.0;
  double det_clamp = 1e-6;
};

int run_reg_eval(const RegOpts& o) {
  const Matrix a = io::load_matrix_csv(o.input);
  io::MetricsReport r = new_report(o.common);
  angle_metrics(r, a, o.gamma);
  const Matrix u = project_rows_unit(a);
  r.values["gram_det"] = gram_det(u);
  r.values["surrogate"] = surrogate(u, o.gamma);
  emit(o.common, r);
  return 0;
}

int run_reg_grad(const RegOpts& o) {
  const Matrix u = project_rows_unit(io::load_matrix_csv(o.input));
  const Matrix g = surrogate_gradient(u, {o.gamma, o.det_clamp});
  with_output(o.common, [&](std::ostream& out) { io::write_matrix_csv(out, g); });
  return 0;
}

// ---------------------------------------------------------------------------
// opt

struct OptOpts {
  Common common;
  std::string input;
  std::string save;
  int k = 3;
  int d = 3;
  OptimizerConfig cfg;
};

int run_opt(OptOpts o) {
  Matrix a0;
  if (!o.input.empty()) {
    a0 = io::load_matrix_csv(o.input);
  } else {
    std::mt19937_64 rng(o.common.seed);
    a0 = verify::random_gaussian(o.k, o.d, rng);
  }
  o.cfg.seed = o.common.seed;
  ZeroLoss loss;
  io::MetricsReport r = new_report(o.common);
  if (a0.rows() >= 2) r.values["initial_mean_angle"] = mar_breakdown(a0, o.cfg.gamma).mean_angle;
  const OptimizeResult res = optimize(loss, a0, o.cfg);
  angle_metrics(r, res.a, o.cfg.gamma);
  r.values["iterations"] = static_cast<double>(res.trace.size());
  r.values["converged"] = res.converged ? 1.0 : 0.0;
  if (!res.trace.empty()) r.values["final_objective"] = res.trace.back();
  add_warnings(r, res.warnings);
  if (!o.save.empty()) {
    std::ofstream out(o.save);
    if (!out) throw error("cannot open '" + o.save + "' for writing");
    io::write_matrix_csv(out, res.a);
  }
  emit(o.common, r);
  return 0;
}

// ---------------------------------------------------------------------------
// dml

struct DmlOpts {
  Common common;
  std::string data;
  std::string train;
  std::string model;
  std::size_t pairs = 1000;
  std::size_t topk = 0;
  dml::DmlConfig cfg;
};

int run_dml_train(const DmlOpts& o) {
  const io::DenseDataset ds = io::load_dense_csv(o.data);
  const dml::TrainResult res = dml::train_mar_dml(ds.X, ds.labels, o.cfg, {o.pairs, o.pairs, o.common.seed});
  io::ModelFile mf = io::dml_model(res.a);
  mf.meta = {{"lambda", o.cfg.lambda}, {"gamma", o.cfg.gamma}, {"seed", o.common.seed}};
  io::save_model(o.model, mf);
  io::MetricsReport r = new_report(o.common);
  angle_metrics(r, res.a, o.cfg.gamma);
  if (!res.trace.empty()) r.values["final_objective"] = res.trace.back();
  r.values["iterations"] = static_cast<double>(res.trace.size());
  add_warnings(r, res.warnings);
  emit(o.common, r);
  return 0;
}

int run_dml_eval(const DmlOpts& o) {
  const Matrix a = io::dml_from_model(io::load_model(o.model));
  const io::DenseDataset ds = io::load_dense_csv(o.data);
  if (ds.dim() != a.cols()) throw invalid_argument("dml eval: data dimension does not match the model");
  const Matrix z = dml::transform(a, ds.X);
  const dml::IndexPairs idx = dml::sample_index_pairs(ds.labels, {o.pairs, o.pairs, o.common.seed});
  std::vector<double> dist;
  std::vector<bool> similar;
  for (const auto& [i, j] : idx.similar) {
    dist.push_back((z.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(j))).squaredNorm());
    similar.push_back(true);
  }
  for (const auto& [i, j] : idx.dissimilar) {
    dist.push_back((z.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(j))).squaredNorm());
    similar.push_back(false);
  }
  io::MetricsReport r = new_report(o.common);
  r.values["average_precision"] = metrics::average_precision_pairs(dist, similar);
  representation_metrics(r, z, ds.labels, o.topk, o.common.seed);
  if (!o.train.empty()) {
    const io::DenseDataset tr = io::load_dense_csv(o.train);
    r.values["knn_accuracy"] = metrics::knn_accuracy(dml::transform(a, tr.X), tr.labels, z, ds.labels, 3);
  }
  angle_metrics(r, a, o.cfg.gamma);
  add_warnings(r, idx.warnings);
  emit(o.common, r);
  return 0;
}

// ---------------------------------------------------------------------------
// rbm

struct RbmOpts {
  Common common;
  std::string docs;
  std::string model;
  long vocab = 0;
  std::size_t topk = 0;
  std::size_t top = 10;
  rbm::RbmTrainConfig cfg;
};

int run_rbm_train(RbmOpts o) {
  const rbm::DocBatch batch = io::load_sparse_docs(o.docs, o.vocab);
  o.cfg.seed = o.common.seed;
  const rbm::RbmTrainResult res = rbm::train_mar_rbm(batch, o.cfg);
  io::ModelFile mf = io::to_model(res.params);
  mf.meta = {{"lambda", o.cfg.lambda}, {"gamma", o.cfg.gamma}, {"seed", o.common.seed}};
  io::save_model(o.model, mf);
  io::MetricsReport r = new_report(o.common);
  angle_metrics(r, rbm::hidden_unit_vectors(res.params), o.cfg.gamma);
  add_warnings(r, res.warnings);
  emit(o.common, r);
  return 0;
}

int run_rbm_eval(const RbmOpts& o) {
  const rbm::RsmParams p = io::rbm_from_model(io::load_model(o.model));
  const rbm::DocBatch batch = io::load_sparse_docs(o.docs, p.vocab());
  io::MetricsReport r = new_report(o.common);
  r.values["perplexity"] = rbm::perplexity(batch, p);
  r.values["mean_log_likelihood"] = rbm::mean_log_likelihood(batch, p);
  angle_metrics(r, rbm::hidden_unit_vectors(p), o.cfg.gamma);
  std::vector<int> labels;
  bool labeled = true;
  for (const auto& d : batch.docs) {
    if (!d.label) {
      labeled = false;
      break;
    }
    labels.push_back(*d.label);
  }
  if (labeled) representation_metrics(r, rbm::hidden_representations(batch, p), labels, o.topk, o.common.seed);
  emit(o.common, r);
  return 0;
}

int run_rbm_topics(const RbmOpts& o) {
  const rbm::RsmParams p = io::rbm_from_model(io::load_model(o.model));
  const auto words = rbm::top_words(p, o.top);
  with_output(o.common, [&](std::ostream& out) {
    for (std::size_t k = 0; k < words.size(); ++k) {
      out << k << '\t';
      for (std::size_t i = 0; i < words[k].size(); ++i) out << (i ? " " : "") << words[k][i];
      out << '\n';
    }
  });
  return 0;
}

// ---------------------------------------------------------------------------
// nn

struct NnOpts {
  Common common;
  std::string data;
  std::string test;
  std::string model;
  std::string lambdas = "0,0.01,0.1,1,10,100";
  nn::NnTrainConfig cfg;
};

int run_nn_train(NnOpts o) {
  const io::DenseDataset ds = io::load_dense_csv(o.data);
  o.cfg.seed = o.common.seed;
  const nn::NnTrainResult res = nn::train_nn(ds.X, ds.labels, max_label(ds.labels) + 1, o.cfg);
  io::ModelFile mf = io::to_model(res.params);
  mf.meta = {{"lambda", o.cfg.lambda}, {"gamma", o.cfg.gamma}, {"seed", o.common.seed}};
  io::save_model(o.model, mf);
  io::MetricsReport r = new_report(o.common);
  r.values["train_accuracy"] = nn::accuracy(res.params, ds.X, ds.labels);
  if (!res.trace.empty()) r.values["final_objective"] = res.trace.back();
  angle_metrics(r, res.params.hidden_W, o.cfg.gamma);
  add_warnings(r, res.warnings);
  emit(o.common, r);
  return 0;
}

int run_nn_eval(const NnOpts& o) {
  const nn::MlpParams p = io::nn_from_model(io::load_model(o.model));
  const io::DenseDataset ds = io::load_dense_csv(o.data);
  io::MetricsReport r = new_report(o.common);
  r.values["accuracy"] = nn::accuracy(p, ds.X, ds.labels);
  r.values["cross_entropy"] = nn::loss_and_grad(p, ds.X, ds.labels, {}).cross_entropy;
  angle_metrics(r, p.hidden_W, o.cfg.gamma);
  emit(o.common, r);
  return 0;
}

int run_nn_sweep(NnOpts o) {
  const io::DenseDataset tr = io::load_dense_csv(o.data);
  const io::DenseDataset te = io::load_dense_csv(o.test);
  const std::vector<double> grid = parse_list(o.lambdas);
  if (grid.empty()) throw invalid_argument("nn sweep: empty lambda grid");
  const int classes = std::max(max_label(tr.labels), max_label(te.labels)) + 1;
  o.cfg.seed = o.common.seed;
  Table t;
  t.columns = {"lambda", "test_accuracy", "mean_angle"};
  std::size_t best = 0;
  for (double l : grid) {
    nn::NnTrainConfig c = o.cfg;
    c.lambda = l;
    const nn::NnTrainResult res = nn::train_nn(tr.X, tr.labels, classes, c);
    const double acc = nn::accuracy(res.params, te.X, te.labels);
    const double angle = res.params.hidden() >= 2 ? mar_breakdown(res.params.hidden_W).mean_angle : 0.0;
    t.rows.push_back({l, acc, angle});
    if (acc > t.rows[best][1]) best = t.rows.size() - 1;
  }
  const double best_acc = t.rows[best][1];
  t.extra["best_lambda"] = t.rows[best][0];
  t.extra["best_accuracy"] = best_acc;
  t.extra["interior"] = best_acc > t.rows.front()[1] && best_acc > t.rows.back()[1];
  emit_table(o.common, t);
  return 0;
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsOpts {
  Common common;
  bounds::BoundInputs in;
  std::optional<double> theta;
  std::optional<double> mu;
  std::optional<double> sigma;
  std::vector<std::string> layers;
  std::string grid;
  double grid_start = 0.1;
  double grid_stop = 1.5;
  double grid_step = 0.1;
};

std::vector<bounds::LayerSpec> parse_layers(const std::vector<std::string>& specs) {
  std::vector<bounds::LayerSpec> out;
  for (const auto& s : specs) {
    const std::vector<double> v = parse_list(s);
    if (v.size() != 3 && v.size() != 4) throw invalid_argument("layer '" + s + "': expected m,C3,theta[,tau]");
    out.push_back({v[0], v[1], v[2], v.size() == 4 ? v[3] : 1.0});
  }
  return out;
}

// Fills theta from mu/sigma when it is not given explicitly.
bounds::BoundInputs resolve_inputs(const BoundsOpts& o, io::MetricsReport* r) {
  bounds::BoundInputs in = o.in;
  in.mu = o.mu;
  in.sigma = o.sigma;
  if (o.theta) {
    in.theta = *o.theta;
  } else if (o.mu && o.sigma) {
    const bounds::ThetaEstimate est = bounds::theta_lower_bound(*o.mu, *o.sigma, in.tau);
    in.theta = est.negative ? 0.0 : est.theta;
    if (r) {
      r->values["theta_estimate"] = est.theta;
      if (est.negative) r->meta["warning_theta"] = "angle lower bound is negative; clamped to 0";
    }
  }
  in.validate();
  return in;
}

int run_bounds_eval(const BoundsOpts& o) {
  io::MetricsReport r = new_report(o.common);
  const bounds::BoundInputs in = resolve_inputs(o, &r);
  r.values["theta"] = in.theta;
  r.values["j"] = bounds::j_single(in);
  r.values["rademacher"] = bounds::rademacher_single(in);
  const bounds::Bound sq = bounds::estimation_bound_squared(in);
  r.values["estimation_squared"] = sq.bound;
  r.values["probability"] = sq.probability;
  r.values["estimation_logistic"] = bounds::estimation_bound_logistic(in).bound;
  r.values["estimation_hinge"] = bounds::estimation_bound_hinge(in).bound;
  const bounds::CrossEntropyConstants ce = bounds::cross_entropy_constants(in);
  r.values["cross_entropy_lipschitz"] = ce.lipschitz;
  r.values["cross_entropy_loss_bound"] = ce.loss_bound;
  const bounds::ApproximationBound ab = bounds::approximation_bound(in);
  r.values["approximation"] = ab.bound;
  r.values["barron_term"] = ab.barron_term;
  r.values["angle_term"] = ab.angle_term;
  r.values["m_cap"] = ab.m_cap;
  r.values["feasible"] = ab.feasible() ? 1.0 : 0.0;
  if (!o.layers.empty()) {
    const auto layers = parse_layers(o.layers);
    r.values["j_multilayer"] = bounds::j_multilayer(layers, in.C4, in.L, in.C1, in.h0);
    const bounds::Bound ml = bounds::estimation_bound_multilayer(layers, in);
    r.values["estimation_multilayer"] = ml.bound;
    r.values["probability_multilayer"] = ml.probability;
  }
  emit(o.common, r);
  return 0;
}

std::vector<double> theta_grid(const BoundsOpts& o) {
  if (!o.grid.empty()) return parse_list(o.grid);
  if (!(o.grid_step > 0.0)) throw invalid_argument("bounds scan: grid step must be positive");
  std::vector<double> g;
  const auto count = static_cast<long>(std::floor((o.grid_stop - o.grid_start) / o.grid_step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    g.push_back(std::round((o.grid_start + static_cast<double>(i) * o.grid_step) * 1e12) / 1e12);
  }
  return g;
}

int run_bounds_scan(const BoundsOpts& o) {
  BoundsOpts copy = o;
  if (!copy.theta) copy.theta = 0.0;  // the grid supplies theta
  const bounds::BoundInputs in = resolve_inputs(copy, nullptr);
  const bounds::ScanResult s = bounds::tradeoff_scan(in, theta_grid(o));
  Table t;
  t.columns = {"theta", "estimation", "approximation", "sum", "feasible"};
  for (const auto& row : s.rows) t.rows.push_back({row.theta, row.estimation, row.approximation, row.sum, row.feasible ? 1.0 : 0.0});
  t.extra["estimation_nonincreasing"] = s.estimation_nonincreasing;
  t.extra["approximation_nondecreasing"] = s.approximation_nondecreasing;
  if (s.best) t.extra["best_theta"] = s.rows[*s.best].theta;
  t.extra["best_interior"] = s.best_interior;
  emit_table(o.common, t);
  return 0;
}

// ---------------------------------------------------------------------------
// synth, verify

struct SynthOpts {
  Common common;
  synth::LongtailSpec spec;
  std::string mode = "features";
};

int run_synth(SynthOpts o) {
  o.spec.mode = o.mode == "docs" ? synth::Mode::docs : synth::Mode::features;
  o.spec.seed = o.common.seed;
  const synth::LongtailData d = synth::synth_longtail(o.spec);
  with_output(o.common, [&](std::ostream& out) {
    if (o.spec.mode == synth::Mode::docs) {
      io::write_sparse_docs(out, d.docs);
    } else {
      io::write_dense_csv(out, d.dense);
    }
  });
  return 0;
}

struct VerifyOpts {
  Common common;
  std::size_t trials = 200;
};

int run_verify_cmd(const VerifyOpts& o) {
  const verify::VerifyReport rep = verify::run_verify(o.common.seed, o.trials);
  io::MetricsReport r = new_report(o.common);
  r.meta["trials"] = std::to_string(o.trials);
  for (const auto& s : rep.suites) {
    r.values[s.name + ".passed"] = static_cast<double>(s.passed);
    r.values[s.name + ".worst_margin"] = s.worst_margin;
  }
  r.values["all_passed"] = rep.all_passed() ? 1.0 : 0.0;
  emit(o.common, r);
  if (!rep.all_passed()) {
    std::cerr << "verify: property failures detected\n";
    return exit_failure;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Config injection: keys of a JSON object become flags of the selected
// command, placed before the user's own arguments. Flags the user passes
// explicitly are not injected.

CLI::App* find_leaf(CLI::App& app, const std::vector<std::string>& args, std::size_t& pos) {
  CLI::App* cur = &app;
  pos = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i].empty() || args[i][0] == '-') continue;
    CLI::App* next = nullptr;
    for (CLI::App* s : cur->get_subcommands({})) {
      if (s->get_name() == args[i]) next = s;
    }
    if (next == nullptr) continue;
    cur = next;
    pos = i + 1;
  }
  return cur;
}

std::optional<std::string> config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  if (const char* env = std::getenv("MAR_CONFIG"); env != nullptr && *env != '\0') return std::string(env);
  return std::nullopt;
}

std::string scalar_text(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return io::format_double(v.get<double>());
  throw parse_error("config key '" + key + "': unsupported value", 0);
}

bool user_passed(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

void inject_config(CLI::App& app, std::vector<std::string>& args, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  g_ctx.config_hash = [&] {
    std::ostringstream h;
    h << std::hex << std::hash<std::string>{}(text);
    return h.str();
  }();
  json cfg;
  try {
    cfg = json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error(std::string("config: ") + e.what(), 0);
  }
  if (!cfg.is_object()) throw parse_error("config: top level must be an object", 0);

  std::size_t pos = 0;
  CLI::App* leaf = find_leaf(app, args, pos);
  if (leaf == &app) return;

  // Sections named after the command path override flat keys.
  json merged = json::object();
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (!it.value().is_object()) merged[it.key()] = it.value();
  }
  std::vector<std::string> path_names;
  for (CLI::App* a = leaf; a != nullptr && a != &app; a = a->get_parent()) path_names.insert(path_names.begin(), a->get_name());
  const json* section = &cfg;
  for (const auto& name : path_names) {
    if (!section->contains(name) || !(*section)[name].is_object()) break;
    section = &(*section)[name];
    for (auto it = section->begin(); it != section->end(); ++it) {
      if (!it.value().is_object()) merged[it.key()] = it.value();
    }
  }

  std::vector<std::string> injected;
  for (auto it = merged.begin(); it != merged.end(); ++it) {
    const std::string key = it.key() == "layers" ? "layer" : it.key();
    const std::string flag = "--" + key;
    if (key == "config") continue;
    if (leaf->get_option_no_throw(flag) == nullptr) throw parse_error("config: unknown key '" + it.key() + "' for this command", 0);
    if (user_passed(args, flag)) continue;
    const json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) injected.push_back(flag);
    } else if (v.is_array()) {
      for (const json& e : v) {
        injected.push_back(flag);
        if (e.is_object()) {
          // layer objects: {"m":..,"C3":..,"theta":..,"tau":..}
          injected.push_back(scalar_text(e.at("m"), key) + "," + scalar_text(e.at("C3"), key) + "," +
                             scalar_text(e.at("theta"), key) + "," + scalar_text(e.value("tau", json(1.0)), key));
        } else {
          injected.push_back(scalar_text(e, key));
        }
      }
    } else {
      injected.push_back(flag);
      injected.push_back(scalar_text(v, key));
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marctl: mutual angular regularization toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  // reg
  RegOpts reg;
  auto* reg_cmd = app.add_subcommand("reg", "regularizer and surrogate")->require_subcommand(1);
  auto* reg_eval = reg_cmd->add_subcommand("eval", "angles, regularizer and surrogate of a matrix (rows = components)");
  auto* reg_grad = reg_cmd->add_subcommand("grad", "surrogate gradient of the row-normalized matrix, as CSV");
  for (auto* s : {reg_eval, reg_grad}) {
    add_common(s, reg.common);
    s->add_option("--input", reg.input, "matrix CSV")->required();
    s->add_option("--gamma", reg.gamma)->capture_default_str();
  }
  reg_grad->add_option("--det-clamp", reg.det_clamp)->capture_default_str();
  reg_eval->callback([&] { action = [&] { return run_reg_eval(reg); }; });
  reg_grad->callback([&] { action = [&] { return run_reg_grad(reg); }; });

  // opt
  OptOpts opt;
  opt.cfg.lambda = 1.0;
  auto* opt_cmd = app.add_subcommand("opt", "alternating optimizer")->require_subcommand(1);
  auto* opt_run = opt_cmd->add_subcommand("run", "maximize the regularizer alone from a start matrix");
  add_common(opt_run, opt.common);
  opt_run->add_option("--input", opt.input, "start matrix CSV (default: Gaussian K x D)");
  opt_run->add_option("--save", opt.save, "write the final matrix as CSV");
  opt_run->add_option("--k", opt.k)->capture_default_str();
  opt_run->add_option("--d", opt.d)->capture_default_str();
  opt_run->add_option("--lambda", opt.cfg.lambda)->capture_default_str();
  opt_run->add_option("--gamma", opt.cfg.gamma)->capture_default_str();
  opt_run->add_option("--outer-iters", opt.cfg.outer_iters)->capture_default_str();
  opt_run->add_option("--inner-g-iters", opt.cfg.inner_g_iters)->capture_default_str();
  opt_run->add_option("--inner-a-iters", opt.cfg.inner_a_iters)->capture_default_str();
  opt_run->add_option("--step-a", opt.cfg.step_a)->capture_default_str();
  opt_run->add_option("--step-g", opt.cfg.step_g)->capture_default_str();
  opt_run->add_option("--rel-tol", opt.cfg.rel_tol)->capture_default_str();
  opt_run->callback([&] { action = [&] { return run_opt(opt); }; });

  // dml
  DmlOpts dmlo;
  auto* dml_cmd = app.add_subcommand("dml", "distance metric learning")->require_subcommand(1);
  auto* dml_train = dml_cmd->add_subcommand("train", "learn a projection from labeled dense data");
  auto* dml_eval = dml_cmd->add_subcommand("eval", "pair AP, clustering and retrieval in the learned space");
  for (auto* s : {dml_train, dml_eval}) {
    add_common(s, dmlo.common);
    s->add_option("--data", dmlo.data, "dense CSV")->required();
    s->add_option("--model", dmlo.model, "model file")->required();
    s->add_option("--pairs", dmlo.pairs, "pairs per type")->capture_default_str();
    s->add_option("--gamma", dmlo.cfg.gamma)->capture_default_str();
  }
  dml_train->add_option("--k", dmlo.cfg.K)->capture_default_str();
  dml_train->add_option("--lambda", dmlo.cfg.lambda)->capture_default_str();
  dml_train->add_option("--hinge-weight", dmlo.cfg.hinge_weight)->capture_default_str();
  dml_train->add_option("--margin", dmlo.cfg.margin)->capture_default_str();
  dml_train->add_option("--outer-iters", dmlo.cfg.optimizer.outer_iters)->capture_default_str();
  dml_train->add_option("--inner-g-iters", dmlo.cfg.optimizer.inner_g_iters)->capture_default_str();
  dml_train->add_option("--inner-a-iters", dmlo.cfg.optimizer.inner_a_iters)->capture_default_str();
  dml_eval->add_option("--train", dmlo.train, "training CSV for k-NN accuracy");
  dml_eval->add_option("--topk", dmlo.topk, "precision@k (0 = skip)")->capture_default_str();
  dml_train->callback([&] { action = [&] { return run_dml_train(dmlo); }; });
  dml_eval->callback([&] { action = [&] { return run_dml_eval(dmlo); }; });

  // rbm
  RbmOpts rbmo;
  auto* rbm_cmd = app.add_subcommand("rbm", "replicated-softmax RBM")->require_subcommand(1);
  auto* rbm_train = rbm_cmd->add_subcommand("train", "CD-1 training on sparse documents");
  auto* rbm_eval = rbm_cmd->add_subcommand("eval", "exact perplexity and representation quality");
  auto* rbm_topics = rbm_cmd->add_subcommand("topics", "top words per hidden unit");
  for (auto* s : {rbm_train, rbm_eval, rbm_topics}) {
    add_common(s, rbmo.common);
    s->add_option("--model", rbmo.model, "model file")->required();
  }
  for (auto* s : {rbm_train, rbm_eval}) {
    s->add_option("--docs", rbmo.docs, "sparse documents")->required();
    s->add_option("--gamma", rbmo.cfg.gamma)->capture_default_str();
  }
  rbm_train->add_option("--vocab", rbmo.vocab, "vocabulary size (0 = infer)")->capture_default_str();
  rbm_train->add_option("--k", rbmo.cfg.K, "hidden units")->capture_default_str();
  rbm_train->add_option("--lambda", rbmo.cfg.lambda)->capture_default_str();
  rbm_train->add_option("--lr", rbmo.cfg.lr)->capture_default_str();
  rbm_train->add_option("--minibatch", rbmo.cfg.minibatch)->capture_default_str();
  rbm_train->add_option("--epochs", rbmo.cfg.epochs)->capture_default_str();
  rbm_eval->add_option("--topk", rbmo.topk, "precision@k (0 = skip)")->capture_default_str();
  rbm_topics->add_option("--top", rbmo.top)->capture_default_str();
  rbm_train->callback([&] { action = [&] { return run_rbm_train(rbmo); }; });
  rbm_eval->callback([&] { action = [&] { return run_rbm_eval(rbmo); }; });
  rbm_topics->callback([&] { action = [&] { return run_rbm_topics(rbmo); }; });

  // nn
  NnOpts nno;
  auto* nn_cmd = app.add_subcommand("nn", "one-hidden-layer network")->require_subcommand(1);
  auto* nn_train = nn_cmd->add_subcommand("train", "SGD training on dense data");
  auto* nn_eval = nn_cmd->add_subcommand("eval", "accuracy and hidden-unit angles");
  auto* nn_sweep = nn_cmd->add_subcommand("sweep", "held-out accuracy over a lambda grid");
  for (auto* s : {nn_train, nn_eval, nn_sweep}) {
    add_common(s, nno.common);
    s->add_option("--data", nno.data, "dense CSV (training data for sweep)")->required();
    s->add_option("--gamma", nno.cfg.gamma)->capture_default_str();
  }
  for (auto* s : {nn_train, nn_eval}) s->add_option("--model", nno.model, "model file")->required();
  for (auto* s : {nn_train, nn_sweep}) {
    s->add_option("--hidden", nno.cfg.m, "hidden units")->capture_default_str();
    s->add_option("--lr", nno.cfg.lr)->capture_default_str();
    s->add_option("--minibatch", nno.cfg.minibatch)->capture_default_str();
    s->add_option("--epochs", nno.cfg.epochs)->capture_default_str();
  }
  nn_train->add_option("--lambda", nno.cfg.lambda)->capture_default_str();
  nn_sweep->add_option("--test", nno.test, "held-out dense CSV")->required();
  nn_sweep->add_option("--lambdas", nno.lambdas, "comma-separated grid")->capture_default_str();
  nn_train->callback([&] { action = [&] { return run_nn_train(nno); }; });
  nn_eval->callback([&] { action = [&] { return run_nn_eval(nno); }; });
  nn_sweep->callback([&] { action = [&] { return run_nn_sweep(nno); }; });

  // bounds
  BoundsOpts bo;
  auto* bounds_cmd = app.add_subcommand("bounds", "generalization bound calculators")->require_subcommand(1);
  auto* bounds_eval = bounds_cmd->add_subcommand("eval", "every bound at one input set");
  auto* bounds_scan = bounds_cmd->add_subcommand("scan", "estimation/approximation tradeoff over theta");
  for (auto* s : {bounds_eval, bounds_scan}) {
    add_common(s, bo.common);
    s->add_option("--m", bo.in.m, "hidden units")->capture_default_str();
    s->add_option("--n", bo.in.n, "training samples")->capture_default_str();
    s->add_option("--L", bo.in.L, "activation Lipschitz constant")->capture_default_str();
    s->add_option("--C1", bo.in.C1)->capture_default_str();
    s->add_option("--C2", bo.in.C2)->capture_default_str();
    s->add_option("--C3", bo.in.C3)->capture_default_str();
    s->add_option("--C4", bo.in.C4)->capture_default_str();
    s->add_option("--h0", bo.in.h0)->capture_default_str();
    s->add_option("--tau", bo.in.tau)->capture_default_str();
    s->add_option("--delta", bo.in.delta)->capture_default_str();
    s->add_option("--C", bo.in.C, "Barron constant")->capture_default_str();
    s->add_option("--classes", bo.in.Kclasses)->capture_default_str();
    s->add_option("--mu", bo.mu, "mean pairwise angle");
    s->add_option("--sigma", bo.sigma, "pairwise angle variance");
  }
  bounds_eval->add_option("--theta", bo.theta, "angle lower bound (default: from mu/sigma, else 0)");
  bounds_eval->add_option("--layer", bo.layers, "hidden layer m,C3,theta[,tau]; repeat per layer");
  bounds_scan->add_option("--grid", bo.grid, "comma-separated theta values");
  bounds_scan->add_option("--grid-start", bo.grid_start)->capture_default_str();
  bounds_scan->add_option("--grid-stop", bo.grid_stop)->capture_default_str();
  bounds_scan->add_option("--grid-step", bo.grid_step)->capture_default_str();
  bounds_eval->callback([&] { action = [&] { return run_bounds_eval(bo); }; });
  bounds_scan->callback([&] { action = [&] { return run_bounds_scan(bo); }; });

  // synth
  SynthOpts so;
  auto* synth_cmd = app.add_subcommand("synth", "power-law synthetic data (dense CSV or sparse docs)");
  add_common(synth_cmd, so.common);
  synth_cmd->add_option("--mode", so.mode)->check(CLI::IsMember({"docs", "features"}))->capture_default_str();
  synth_cmd->add_option("--topics", so.spec.n_topics)->capture_default_str();
  synth_cmd->add_option("--exponent", so.spec.exponent)->capture_default_str();
  synth_cmd->add_option("--n", so.spec.n)->capture_default_str();
  synth_cmd->add_option("--dim", so.spec.dim, "feature dimension or vocabulary size")->capture_default_str();
  synth_cmd->add_option("--doc-length", so.spec.doc_length)->capture_default_str();
  synth_cmd->add_option("--focus", so.spec.focus)->capture_default_str();
  synth_cmd->add_option("--separation", so.spec.separation)->capture_default_str();
  synth_cmd->add_option("--noise", so.spec.noise)->capture_default_str();
  synth_cmd->callback([&] { action = [&] { return run_synth(so); }; });

  // verify
  VerifyOpts vo;
  auto* verify_cmd = app.add_subcommand("verify", "run the property suites");
  add_common(verify_cmd, vo.common);
  verify_cmd->add_option("--trials", vo.trials)->capture_default_str();
  verify_cmd->callback([&] { action = [&] { return run_verify_cmd(vo); }; });

  if (argc < 2) {
    std::cerr << app.help();
    return exit_usage;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (auto path = config_path(args)) inject_config(app, args, *path);
  } catch (const mar::error& e) {
    std::cerr << "marctl: " << e.what() << '\n';
    return exit_usage;
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  g_ctx.command.clear();
  for (CLI::App* a = &app; a != nullptr;) {
    auto subs = a->get_subcommands();
    if (subs.empty()) break;
    a = subs.front();
    g_ctx.command += (g_ctx.command.empty() ? "" : " ") + a->get_name();
  }

  try {
    return action ? action() : exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "marctl: " << e.what() << '\n';
    return exit_failure;
  }
}
