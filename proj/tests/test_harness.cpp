#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mar/mar.hpp"

using namespace mar;
namespace fs = std::filesystem;

namespace {

bounds::BoundInputs pinned(double theta = 0.5) {
  bounds::BoundInputs in;
  in.m = 4;
  in.n = 1000;
  in.L = 0.25;
  in.C1 = 2;
  in.C2 = 1;
  in.C3 = 2;
  in.C4 = 2;
  in.h0 = 0.5;
  in.delta = 0.05;
  in.C = 0.02;
  in.theta = theta;
  return in;
}

void expect_rel(double got, double want, double tol = 1e-10) {
  EXPECT_LE(std::abs(got - want), tol * std::abs(want)) << "got " << got << " want " << want;
}

std::vector<double> theta_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 15; ++i) g.push_back(0.1 * i);
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// bounds; reference values from an independent 40-digit evaluation

TEST(Bounds, PinnedSingleLayerValues) {
  const bounds::BoundInputs in = pinned();
  expect_rel(bounds::j_single(in), 33.778805401938157314);
  expect_rel(bounds::rademacher_single(in), 0.3162277660168379332);
  expect_rel(bounds::estimation_bound_squared(in).bound, 21.218740233575051021);
  expect_rel(bounds::estimation_bound_logistic(in).bound, 1.7606061034446563637);
  expect_rel(bounds::estimation_bound_hinge(in).bound, 1.8500162060899138591);
  EXPECT_DOUBLE_EQ(bounds::estimation_bound_squared(in).probability, 0.95);
}

TEST(Bounds, PinnedCrossEntropyConstants) {
  const auto ce = bounds::cross_entropy_constants(pinned());
  expect_rel(ce.lipschitz, 0.99999105053030274744);
  expect_rel(ce.loss_bound, 11.623916279136586356);
}

TEST(Bounds, CrossEntropyLossBoundDoesNotOverflow) {
  bounds::BoundInputs in = pinned(0.0);
  in.C1 = 1e3;
  in.Kclasses = 10;
  const auto ce = bounds::cross_entropy_constants(in);
  EXPECT_TRUE(std::isfinite(ce.loss_bound));
  expect_rel(ce.loss_bound, std::log(9.0) + 2.0 * std::sqrt(bounds::j_single(in)), 1e-12);
}

TEST(Bounds, PinnedApproximationBound) {
  const auto ab = bounds::approximation_bound(pinned());
  expect_rel(ab.barron_term, 0.038990798286465164109);
  expect_rel(ab.angle_term, 1.28);
  expect_rel(ab.bound, 1.3189907982864651641);
  EXPECT_EQ(ab.m_cap, 6.0);
  EXPECT_TRUE(ab.feasible());
}

TEST(Bounds, ApproximationLimits) {
  const auto zero = bounds::approximation_bound(pinned(0.0));
  EXPECT_EQ(zero.angle_term, 0.0);
  EXPECT_EQ(zero.bound, zero.barron_term);
  EXPECT_TRUE(std::isinf(zero.m_cap));
  const auto wide = bounds::approximation_bound(pinned(1.0));  // 3 m theta >= pi
  expect_rel(wide.angle_term, 4.0 * 4 * 0.02 * 2 * 2, 1e-15);
  EXPECT_FALSE(wide.m_cap_ok);
}

TEST(Bounds, FeasibilityFlags) {
  bounds::BoundInputs in = pinned();
  in.C1 = 0.2;
  in.C4 = 0.01;
  const auto ab = bounds::approximation_bound(in);
  EXPECT_FALSE(ab.c1c3_ok);
  EXPECT_FALSE(ab.c4_ok);
}

TEST(Bounds, ThetaFromMoments) {
  const auto t = bounds::theta_lower_bound(1.2, 0.01, 0.9);
  expect_rel(t.theta, 0.8837722339831620668);
  EXPECT_FALSE(t.negative);
  EXPECT_TRUE(bounds::theta_lower_bound(0.1, 0.5, 0.9).negative);
  EXPECT_THROW(bounds::theta_lower_bound(1.0, 0.1, 1.0), invalid_argument);
}

TEST(Bounds, SingleLayerRecursionMatchesExactly) {
  for (double theta : {0.0, 0.3, 0.9, 1.5}) {
    const bounds::BoundInputs in = pinned(theta);
    const std::vector<bounds::LayerSpec> one{{in.m, in.C3, in.theta, in.tau}};
    EXPECT_EQ(bounds::j_multilayer(one, in.C4, in.L, in.C1, in.h0), bounds::j_single(in));
    EXPECT_EQ(bounds::estimation_bound_multilayer(one, in).bound, bounds::estimation_bound_squared(in).bound);
  }
}

TEST(Bounds, TwoLayerPinnedValues) {
  const std::vector<bounds::LayerSpec> layers{{4, 2, 0.5, 0.9}, {3, 1.5, 0.3, 0.8}};
  const bounds::BoundInputs in = pinned();
  expect_rel(bounds::j_multilayer(layers, in.C4, in.L, in.C1, in.h0), 29.706855103193075502);
  const auto b = bounds::estimation_bound_multilayer(layers, in);
  expect_rel(b.bound, 27.598442374038026434);
  EXPECT_NEAR(b.probability, 0.95 * 0.9 * 0.8, 1e-15);
}

TEST(Bounds, EstimationMonotoneInThetaAndN) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 157; ++i) {
    const double b = bounds::estimation_bound_squared(pinned(0.01 * i)).bound;
    EXPECT_LE(b, prev);
    prev = b;
  }
  bounds::BoundInputs in = pinned();
  prev = std::numeric_limits<double>::infinity();
  for (double n : {10.0, 100.0, 1e3, 1e4, 1e5}) {
    in.n = n;
    EXPECT_LT(bounds::estimation_bound_squared(in).bound, prev);
    prev = bounds::estimation_bound_squared(in).bound;
  }
}

TEST(Bounds, TradeoffScanPinned) {
  const auto s = bounds::tradeoff_scan(pinned(), theta_grid());
  ASSERT_EQ(s.rows.size(), 15u);
  EXPECT_TRUE(s.estimation_nonincreasing);
  EXPECT_TRUE(s.approximation_nondecreasing);
  ASSERT_TRUE(s.best.has_value());
  EXPECT_NEAR(s.rows[*s.best].theta, 0.7, 1e-12);
  EXPECT_TRUE(s.best_interior);
}

TEST(Bounds, EmptyScan) {
  const auto s = bounds::tradeoff_scan(pinned(), {});
  EXPECT_TRUE(s.rows.empty());
  EXPECT_FALSE(s.best.has_value());
}

TEST(Bounds, InvalidInputs) {
  bounds::BoundInputs in = pinned();
  in.theta = 2.0;
  EXPECT_THROW(bounds::j_single(in), invalid_argument);
  in = pinned();
  in.n = 0;
  EXPECT_THROW(bounds::approximation_bound(in), invalid_argument);
}

// ---------------------------------------------------------------------------
// metrics

TEST(Metrics, PrecisionAtK) {
  Matrix x(4, 1);
  x << 0, 1, 3, 7;
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(metrics::precision_at_k(x, x, y, y, 1, true), 0.75);
  EXPECT_DOUBLE_EQ(metrics::precision_at_k(x, x, y, y, 2, true), 0.375);
  const std::vector<int> unique{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(metrics::precision_at_k(x, x, unique, unique, 1, true), 0.0);
  const std::vector<int> same(4, 5);
  EXPECT_DOUBLE_EQ(metrics::precision_at_k(x, x, same, same, 3, true), 1.0);
  EXPECT_THROW(metrics::precision_at_k(x, x, y, y, 4, true), invalid_argument);
}

TEST(Metrics, AveragePrecision) {
  EXPECT_DOUBLE_EQ(metrics::average_precision_pairs({1, 2, 3, 4}, {true, true, false, false}), 1.0);
  // brute force over all orderings of the tied blocks
  EXPECT_NEAR(metrics::average_precision_pairs({1, 2, 3, 4}, {false, false, true, true}), 0.41666666666666663, 1e-15);
  EXPECT_NEAR(metrics::average_precision_pairs({0.1, 0.2, 0.2, 0.3, 0.3, 0.3}, {true, false, true, true, false, false}),
              0.8166666666666669, 1e-14);
  EXPECT_NEAR(metrics::average_precision_pairs({1, 1, 1, 1, 1}, {true, false, false, true, false}), 0.5925, 1e-14);
  EXPECT_THROW(metrics::average_precision_pairs({1, 2}, {true, true}), invalid_argument);
}

TEST(Metrics, KMeans) {
  Matrix x(6, 2);
  x << 0, 0, 0.1, 0, 0, 0.1, 10, 10, 10.1, 10, 10, 10.1;
  const auto km = metrics::kmeans(x, 2, 10, 3);
  EXPECT_EQ(metrics::clustering_accuracy(km.assignments, {0, 0, 0, 1, 1, 1}), 1.0);
  const auto one = metrics::kmeans(x, 1);
  for (int a : one.assignments) EXPECT_EQ(a, 0);
  EXPECT_EQ(metrics::kmeans(x, 2, 5, 9).assignments, metrics::kmeans(x, 2, 5, 9).assignments);
  EXPECT_THROW(metrics::kmeans(x, 7), invalid_argument);
}

TEST(Metrics, ClusteringAccuracyAndNmi) {
  const std::vector<int> t{0, 0, 1, 1, 2, 2};
  EXPECT_EQ(metrics::clustering_accuracy(t, t), 1.0);
  EXPECT_NEAR(metrics::nmi(t, t), 1.0, 1e-15);
  EXPECT_EQ(metrics::clustering_accuracy({2, 2, 0, 0, 1, 1}, t), 1.0);
  EXPECT_EQ(metrics::clustering_accuracy({0, 0, 0, 0}, {0, 1, 0, 1}), 0.5);
  EXPECT_EQ(metrics::nmi({0, 0, 0, 0}, {0, 1, 0, 1}), 0.0);
  EXPECT_NEAR(metrics::clustering_accuracy({0, 0, 1, 1, 2, 2}, {1, 1, 0, 0, 0, 1}), 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(metrics::nmi({0, 0, 1, 1, 2, 2}, {1, 1, 0, 0, 0, 1}), 0.5295405780575618, 1e-14);
  EXPECT_THROW(metrics::nmi({0}, {0, 1}), invalid_argument);
}

TEST(Metrics, Knn) {
  Matrix train(3, 1), test(1, 1);
  train << 0, 1, 2;
  test << 0.4;
  const std::vector<int> labels{0, 1, 1};
  EXPECT_EQ(metrics::knn_predict(train, labels, test, 1)[0], 0);
  EXPECT_EQ(metrics::knn_predict(train, labels, test, 3)[0], 1);
  Matrix train2(2, 1);
  train2 << 0, 1;
  Matrix q(1, 1);
  q << 0.8;
  EXPECT_EQ(metrics::knn_predict(train2, {0, 1}, q, 2)[0], 1);  // tie: nearest label
  EXPECT_EQ(metrics::knn_accuracy(train, labels, train, labels, 1), 1.0);
  EXPECT_THROW(metrics::knn_predict(train, labels, test, 4), invalid_argument);
}

// ---------------------------------------------------------------------------
// file formats

TEST(Io, DenseCsv) {
  std::istringstream in("label,a,b\n1,0.5,-2\n0,3,4e-1\n");
  const io::DenseDataset ds = io::read_dense_csv(in);
  ASSERT_EQ(ds.X.rows(), 2);
  EXPECT_EQ(ds.labels, (std::vector<int>{1, 0}));
  EXPECT_EQ(ds.X(0, 1), -2.0);
  EXPECT_EQ(ds.X(1, 1), 0.4);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  std::ostringstream out;
  io::write_dense_csv(out, ds);
  std::istringstream back(out.str());
  EXPECT_EQ(io::read_dense_csv(back).X, ds.X);
}

TEST(Io, DenseCsvErrorsNameLine) {
  std::istringstream in("label,a\n1,0.5\n2,x\n");
  try {
    io::read_dense_csv(in);
    FAIL();
  } catch (const parse_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream neg("label,a\n-1,0\n");
  EXPECT_THROW(io::read_dense_csv(neg), parse_error);
}

TEST(Io, SparseDocs) {
  std::istringstream in("3\t0:2 4:1\n\t1:1\n");
  const rbm::DocBatch b = io::read_sparse_docs(in, 5);
  ASSERT_EQ(b.docs.size(), 2u);
  EXPECT_EQ(*b.docs[0].label, 3);
  EXPECT_EQ(b.docs[0].length(), 3u);
  EXPECT_EQ(b.docs[0].counts, (std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 2}, {4, 1}}));
  EXPECT_FALSE(b.docs[1].label.has_value());
  std::ostringstream out;
  io::write_sparse_docs(out, b);
  EXPECT_EQ(out.str(), "3\t0:2 4:1\n\t1:1\n");
}

TEST(Io, SparseDocsErrors) {
  for (const char* bad : {"1 0:2\n", "1\t0:0\n", "1\t0:2 0:1\n", "1\t9:1\n", "1\ta:1\n"}) {
    std::istringstream in(bad);
    EXPECT_THROW(io::read_sparse_docs(in, 5), parse_error) << bad;
  }
  std::istringstream in("1\t2:1\n");
  EXPECT_EQ(io::read_sparse_docs(in).vocab, 3);
}

TEST(Io, ModelRoundTripIsExact) {
  std::mt19937_64 rng(1);
  nn::MlpParams p = nn::init_params(3, 2, 4, rng);
  p.out_b << 0.1, 1.0 / 3.0, -2e-300, 7.0;
  io::ModelFile mf = io::to_model(p);
  mf.meta["note"] = "x";
  std::stringstream s;
  io::write_model(s, mf);
  const io::ModelFile back = io::read_model(s);
  EXPECT_EQ(back.kind, "nn");
  EXPECT_EQ(back.meta["note"], "x");
  const nn::MlpParams q = io::nn_from_model(back);
  EXPECT_EQ(q.hidden_W, p.hidden_W);
  EXPECT_EQ(q.out_b, p.out_b);
  EXPECT_THROW(io::rbm_from_model(back), error);
}

TEST(Io, ReportFormats) {
  io::MetricsReport r;
  r.values["nmi"] = 0.25;
  r.meta["seed"] = "3";
  std::ostringstream j, c;
  io::write_report(j, r, io::Format::json);
  io::write_report(c, r, io::Format::csv);
  const auto doc = nlohmann::json::parse(j.str());
  EXPECT_EQ(doc["metrics"]["nmi"], 0.25);
  EXPECT_EQ(doc["meta"]["seed"], "3");
  EXPECT_EQ(c.str(), "key,value\nmeta.seed,3\nnmi,0.25\n");
  EXPECT_THROW(io::parse_format("xml"), invalid_argument);
}

// ---------------------------------------------------------------------------
// synthetic data

TEST(Synth, LongtailSizes) {
  const auto flat = synth::longtail_sizes(4, 0.0, 100);
  for (auto s : flat) EXPECT_EQ(s, 25u);
  const auto tail = synth::longtail_sizes(10, 1.5, 1000);
  std::size_t total = 0;
  for (auto s : tail) total += s;
  EXPECT_EQ(total, 1000u);
  EXPECT_GE(tail.front(), 10 * tail.back());
  EXPECT_THROW(synth::longtail_sizes(1, 1.0, 10), invalid_argument);
}

TEST(Synth, GeneratedLabelsFollowSizes) {
  synth::LongtailSpec sp;
  sp.n = 1000;
  sp.mode = synth::Mode::docs;
  sp.dim = 40;
  const auto d = synth::synth_longtail(sp);
  std::vector<std::size_t> counts(10, 0);
  for (int l : d.labels) ++counts[static_cast<std::size_t>(l)];
  EXPECT_GE(counts[0], 10 * counts[9]);
  EXPECT_EQ(d.docs.docs.size(), 1000u);
  for (const auto& doc : d.docs.docs) EXPECT_EQ(doc.length(), sp.doc_length);
}

TEST(Synth, Deterministic) {
  synth::LongtailSpec sp;
  sp.n = 50;
  sp.dim = 5;
  sp.n_topics = 3;
  EXPECT_EQ(synth::synth_longtail(sp).dense.X, synth::synth_longtail(sp).dense.X);
  sp.seed = 1;
  const auto other = synth::synth_longtail(sp).dense.X;
  sp.seed = 0;
  EXPECT_NE(synth::synth_longtail(sp).dense.X, other);
}

// ---------------------------------------------------------------------------
// command-line tool

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

fs::path scratch() {
  const fs::path p = fs::path(MAR_TEST_TMP) / "cli";
  fs::create_directories(p);
  return p;
}

CliRun run(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = env + " \"" MARCTL_PATH "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string path(const std::string& name) { return (scratch() / name).string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("verify --no-such-flag").code, 2);
  EXPECT_EQ(run("bounds").code, 2);
}

TEST(Cli, RuntimeFailure) {
  EXPECT_EQ(run("reg eval --input /nonexistent/a.csv").code, 1);
}

TEST(Cli, VerifyPasses) {
  const CliRun r = run("verify --seed 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["metrics"]["all_passed"], 1.0);
}

TEST(Cli, BoundsScanOnPinnedConfig) {
  const CliRun r = run("bounds scan --config \"" MAR_TEST_DATA "/bounds_pinned.json\" --format csv");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "theta,estimation,approximation,sum,feasible");
  std::vector<double> est, app;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string f;
    std::vector<double> v;
    while (std::getline(row, f, ',')) v.push_back(std::stod(f));
    est.push_back(v[1]);
    app.push_back(v[2]);
  }
  ASSERT_EQ(est.size(), 15u);
  for (std::size_t i = 1; i < est.size(); ++i) {
    EXPECT_LE(est[i], est[i - 1]);
    EXPECT_GE(app[i], app[i - 1]);
  }
}

TEST(Cli, ConfigFromEnvironmentAndOverride) {
  const std::string env = "MAR_CONFIG=\"" MAR_TEST_DATA "/bounds_pinned.json\"";
  const CliRun a = run("bounds eval --theta 0.5", env);
  ASSERT_EQ(a.code, 0);
  const auto ja = nlohmann::json::parse(a.out);
  EXPECT_NEAR(ja["metrics"]["estimation_squared"].get<double>(), 21.218740233575051021, 1e-9);
  const CliRun b = run("bounds eval --theta 0.5 --n 4000", env);
  ASSERT_EQ(b.code, 0);
  EXPECT_LT(nlohmann::json::parse(b.out)["metrics"]["estimation_squared"].get<double>(),
            ja["metrics"]["estimation_squared"].get<double>());
}

TEST(Cli, ConfigUnknownKeyIsUsageError) {
  {
    std::ofstream cfg(path("bad.json"));
    cfg << "{\"no_such_key\": 1}";
  }
  EXPECT_EQ(run("bounds eval --config \"" + path("bad.json") + "\"").code, 2);
}

TEST(Cli, DmlEndToEndIsDeterministic) {
  ASSERT_EQ(run("synth --topics 3 --n 120 --dim 6 --seed 2 --output \"" + path("dense.csv") + "\"").code, 0);
  const std::string train = "dml train --data \"" + path("dense.csv") + "\" --model \"" + path("dml.json") +
                            "\" --k 3 --lambda 0.1 --pairs 200 --outer-iters 5 --seed 1";
  const CliRun a = run(train);
  ASSERT_EQ(a.code, 0);
  std::ifstream m1(path("dml.json"));
  std::stringstream s1;
  s1 << m1.rdbuf();
  const CliRun b = run(train);
  std::ifstream m2(path("dml.json"));
  std::stringstream s2;
  s2 << m2.rdbuf();
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(s1.str(), s2.str());
  const CliRun e = run("dml eval --data \"" + path("dense.csv") + "\" --model \"" + path("dml.json") +
                       "\" --train \"" + path("dense.csv") + "\" --topk 5 --format csv");
  ASSERT_EQ(e.code, 0);
  for (const char* key : {"average_precision,", "clustering_accuracy,", "nmi,", "knn_accuracy,", "precision_at_k,"}) {
    EXPECT_NE(e.out.find(key), std::string::npos) << key;
  }
}

TEST(Cli, RbmEndToEnd) {
  ASSERT_EQ(run("synth --mode docs --topics 2 --n 40 --dim 4 --doc-length 3 --output \"" + path("docs.txt") + "\"").code, 0);
  ASSERT_EQ(run("rbm train --docs \"" + path("docs.txt") + "\" --model \"" + path("rbm.json") +
                "\" --k 2 --lambda 0.5 --lr 0.05 --minibatch 5 --epochs 3")
                .code,
            0);
  const CliRun e = run("rbm eval --docs \"" + path("docs.txt") + "\" --model \"" + path("rbm.json") + "\"");
  ASSERT_EQ(e.code, 0);
  const double ppl = nlohmann::json::parse(e.out)["metrics"]["perplexity"].get<double>();
  EXPECT_GE(ppl, 1.0);
  EXPECT_LE(ppl, 4.5);
  const CliRun t = run("rbm topics --model \"" + path("rbm.json") + "\" --top 2");
  ASSERT_EQ(t.code, 0);
  EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 2);
}

TEST(Cli, NnEndToEnd) {
  ASSERT_EQ(run("synth --topics 3 --n 90 --dim 4 --seed 4 --output \"" + path("nn.csv") + "\"").code, 0);
  ASSERT_EQ(run("nn train --data \"" + path("nn.csv") + "\" --model \"" + path("nn.json") +
                "\" --hidden 3 --lambda 0.1 --epochs 5 --minibatch 10")
                .code,
            0);
  const CliRun e = run("nn eval --data \"" + path("nn.csv") + "\" --model \"" + path("nn.json") + "\"");
  ASSERT_EQ(e.code, 0);
  const double acc = nlohmann::json::parse(e.out)["metrics"]["accuracy"].get<double>();
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  const CliRun s = run("nn sweep --data \"" + path("nn.csv") + "\" --test \"" + path("nn.csv") +
                       "\" --hidden 3 --epochs 2 --lambdas 0,1 --format csv");
  ASSERT_EQ(s.code, 0);
  EXPECT_EQ(s.out.rfind("lambda,test_accuracy,mean_angle\n", 0), 0u);
}

TEST(Cli, RegAndOpt) {
  {
    std::ofstream a(path("a.csv"));
    a << "1,0,0\n0.6,0.8,0\n0,0.6,0.8\n";
  }
  const CliRun e = run("reg eval --input \"" + path("a.csv") + "\"");
  ASSERT_EQ(e.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(e.out)["metrics"]["surrogate"].get<double>(), -0.07340002638083665, 1e-12);
  const CliRun g = run("reg grad --input \"" + path("a.csv") + "\"");
  ASSERT_EQ(g.code, 0);
  std::istringstream gin(g.out);
  EXPECT_EQ(io::read_matrix_csv(gin).rows(), 3);
  const CliRun o = run("opt run --k 3 --d 3 --lambda 1 --seed 5");
  ASSERT_EQ(o.code, 0);
  EXPECT_GE(nlohmann::json::parse(o.out)["metrics"]["mean_angle"].get<double>(), half_pi - 1e-2);
}
