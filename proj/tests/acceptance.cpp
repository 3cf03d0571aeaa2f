// Acceptance checks AC1..AC11. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "mar/mar.hpp"

using namespace mar;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void run(const char* id, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_s) {
    o.ok = false;
    o.detail += " over time limit";
  }
  if (!o.ok) ++failures;
  std::printf("%s %s %s (%.2fs, limit %gs)\n", o.ok ? "PASS" : "FAIL", id, o.detail.c_str(), secs, limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Matrix random_orthonormal(Eigen::Index k, Eigen::Index d, std::mt19937_64& rng) {
  const Matrix g = verify::random_gaussian(d, k, rng);
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, k);
  return q.transpose();
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  std::mt19937_64 rng(1);
  std::size_t violations = 0, checks = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) {
    const Matrix a = verify::random_config(rng, 6, 10);
    for (double gamma : {0.5, 1.0, 2.0}) {
      const double margin = verify::check_lower_bound(a, gamma);
      worst = std::min(worst, margin);
      violations += margin < 0.0;
      ++checks;
    }
  }
  std::size_t eq_fail = 0;
  for (int k = 2; k <= 6; ++k) {
    for (int d = k; d <= 10; ++d) {
      const Matrix q = random_orthonormal(k, d, rng);
      for (double gamma : {0.5, 1.0, 2.0}) {
        const double s = surrogate(q, gamma);
        const double w = mar_omega(q, gamma);
        eq_fail += std::abs(s - half_pi) > 1e-9 || std::abs(w - half_pi) > 1e-9;
      }
    }
  }
  return {violations == 0 && eq_fail == 0,
          fmt("%g/%g lower-bound checks, worst margin %.3g", static_cast<double>(checks - violations),
              static_cast<double>(checks), worst) +
              fmt(", orthonormal equality failures %g", static_cast<double>(eq_fail))};
}

Outcome ac2() {
  double worst = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double theta = half_pi * i / 100.0;
    Matrix a(2, 2);
    a << 1.0, 0.0, std::cos(theta), std::sin(theta);
    for (double gamma : {0.5, 1.0, 2.0}) {
      const double want = theta - gamma * (half_pi - theta) * (half_pi - theta);
      worst = std::max(worst, std::abs(surrogate(a, gamma) - want));
      worst = std::max(worst, std::abs(mar_omega(a, gamma) - theta));
    }
  }
  return {worst <= 1e-9, fmt("max abs error %.3g over 100 angles", worst)};
}

Outcome ac3() {
  std::mt19937_64 rng(3);
  std::size_t passed = 0;
  for (int t = 0; t < 200; ++t) passed += verify::check_ascent(verify::random_config(rng)).passed;
  return {passed == 200, fmt("%g/200 configurations", static_cast<double>(passed))};
}

Outcome ac4() {
  std::mt19937_64 rng(4);
  std::size_t det_fail = 0, dir_fail = 0;
  for (int t = 0; t < 500; ++t) {
    const Matrix a = verify::random_config(rng);
    det_fail += verify::check_det_expansion(a) < 0.0;
    dir_fail += verify::check_gradient_direction(a) < 0.0;
  }
  return {det_fail == 0 && dir_fail == 0,
          fmt("500 instances, det failures %g, direction failures %g", static_cast<double>(det_fail),
              static_cast<double>(dir_fail))};
}

Outcome ac5() {
  std::mt19937_64 rng(5);
  double worst_s = 0.0, worst_d = 0.0, worst_n = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Matrix a = verify::random_config_with_det(rng, 0.05, 0.95);
    worst_s = std::max(worst_s, 1e-5 - verify::check_surrogate_fd(a));
  }
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<int> dd(2, 8);
    const int d = dd(rng);
    std::uniform_int_distribution<int> kd(1, d);
    dml::PairSet ps;
    ps.similar = 0.4 * verify::random_gaussian(6, d, rng);
    ps.dissimilar = 0.4 * verify::random_gaussian(8, d, rng);
    dml::DmlConfig cfg;
    cfg.hinge_weight = 3.0;
    const Matrix a = verify::random_gaussian(kd(rng), d, rng);
    const Matrix fd = verify::central_difference([&](const Matrix& x) { return dml::dml_objective(x, ps, cfg); }, a);
    worst_d = std::max(worst_d, verify::relative_error(dml::dml_gradient(a, ps, cfg), fd));
  }
  for (int t = 0; t < 50; ++t) {
    std::uniform_int_distribution<int> dd(3, 6), md(2, 3), cd(2, 4);
    const int d = dd(rng), m = md(rng), c = cd(rng);
    nn::MlpParams p = nn::init_params(d, m, c, rng);
    p.hidden_b = verify::random_gaussian(m, 1, rng);
    p.out_b = verify::random_gaussian(c, 1, rng);
    const Matrix x = verify::random_gaussian(7, d, rng);
    std::vector<int> y;
    std::uniform_int_distribution<int> yd(0, c - 1);
    for (int i = 0; i < 7; ++i) y.push_back(yd(rng));
    const nn::LossOptions opt{0.7, 1.0, 1e-6};
    const nn::LossGrad lg = nn::loss_and_grad(p, x, y, opt);
    auto f_hidden = [&](const Matrix& w) {
      nn::MlpParams q = p;
      q.hidden_W = w;
      return nn::loss_and_grad(q, x, y, opt).objective;
    };
    auto f_out = [&](const Matrix& w) {
      nn::MlpParams q = p;
      q.out_W = w;
      return nn::loss_and_grad(q, x, y, opt).objective;
    };
    worst_n = std::max(worst_n, verify::relative_error(lg.grad.hidden_W, verify::central_difference(f_hidden, p.hidden_W)));
    worst_n = std::max(worst_n, verify::relative_error(lg.grad.out_W, verify::central_difference(f_out, p.out_W)));
  }
  return {worst_s < 1e-5 && worst_d < 1e-4 && worst_n < 1e-4,
          fmt("max rel error: surrogate %.3g, dml %.3g, nn %.3g", worst_s, worst_d, worst_n)};
}

Outcome ac6() {
  std::mt19937_64 rng(6);
  bool ok = true;
  std::string detail;
  for (int k = 2; k <= 4; ++k) {
    const Matrix a0 = verify::random_gaussian(k, k, rng);
    ZeroLoss zero;
    OptimizerConfig cfg;
    cfg.lambda = 1.0;
    cfg.seed = 6;
    const OptimizeResult r = optimize(zero, a0, cfg);
    const double angle = mar_breakdown(r.a).mean_angle;
    ok = ok && angle >= half_pi - 1e-2;
    detail += fmt("K=D=%g mean angle %.6f; ", k, angle);
  }
  return {ok, detail};
}

Outcome ac7() {
  std::mt19937_64 rng(7);
  double worst_sum = 0.0;
  int instances = 0;
  std::uniform_int_distribution<int> jd(2, 7), dd(1, 8), kd(1, 4);
  while (instances < 20) {
    const int j = jd(rng), len = dd(rng), k = kd(rng);
    if (rbm::composition_count(static_cast<std::uint32_t>(len), j) > 1e4) continue;
    rbm::RsmParams p(j, k);
    p.W = 0.7 * verify::random_gaussian(j, k, rng);
    p.vis_bias = 0.7 * verify::random_gaussian(j, 1, rng);
    p.hid_bias = 0.7 * verify::random_gaussian(k, 1, rng);
    rbm::PartitionCache logz(p);
    double total = 0.0;
    rbm::for_each_composition(static_cast<std::uint32_t>(len), j, [&](const Vector& n) {
      total += std::exp(rbm::log_prob_counts(rbm::Document::from_dense(n), p, logz));
    });
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    ++instances;
  }

  double worst_uniform = 0.0, worst_alpha = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int j = jd(rng), k = kd(rng);
    rbm::DocBatch batch;
    batch.vocab = j;
    std::uniform_int_distribution<int> cnt(0, 3);
    for (int i = 0; i < 6; ++i) {
      Vector n(j);
      for (int w = 0; w < j; ++w) n(w) = cnt(rng);
      if (n.sum() == 0.0) n(0) = 1.0;
      batch.docs.push_back(rbm::Document::from_dense(n));
    }
    worst_uniform = std::max(worst_uniform, std::abs(rbm::perplexity(batch, rbm::RsmParams(j, k)) - j) / j);
    rbm::RsmParams p(j, k);
    p.vis_bias = verify::random_gaussian(j, 1, rng);
    p.hid_bias = verify::random_gaussian(k, 1, rng);
    Vector q = p.vis_bias.array().exp();
    q /= q.sum();
    double ll = 0.0, words = 0.0;
    for (const auto& d : batch.docs) {
      for (const auto& [w, c] : d.counts) ll += c * std::log(q(w));
      words += d.length();
    }
    const double want = std::exp(-ll / words);
    worst_alpha = std::max(worst_alpha, std::abs(rbm::perplexity(batch, p) - want) / want);
  }
  return {worst_sum <= 1e-10 && worst_uniform <= 1e-12 && worst_alpha <= 1e-8,
          fmt("sum-to-one err %.3g, uniform rel err %.3g, bias-only rel err %.3g", worst_sum, worst_uniform,
              worst_alpha)};
}

// ---------------------------------------------------------------------------
// directional effects on long-tail synthetic data

double pair_ap(const Matrix& a, const Matrix& x, const std::vector<int>& y, std::uint64_t seed) {
  const dml::IndexPairs idx = dml::sample_index_pairs(y, {2000, 2000, seed});
  std::vector<double> d;
  std::vector<bool> s;
  for (const auto& [i, j] : idx.similar) {
    d.push_back(dml::pair_distance(a, x.row(i).transpose(), x.row(j).transpose()));
    s.push_back(true);
  }
  for (const auto& [i, j] : idx.dissimilar) {
    d.push_back(dml::pair_distance(a, x.row(i).transpose(), x.row(j).transpose()));
    s.push_back(false);
  }
  return metrics::average_precision_pairs(d, s);
}

rbm::DocBatch slice(const rbm::DocBatch& b, std::size_t s, std::size_t e) {
  rbm::DocBatch o;
  o.vocab = b.vocab;
  o.docs.assign(b.docs.begin() + static_cast<std::ptrdiff_t>(s), b.docs.begin() + static_cast<std::ptrdiff_t>(e));
  return o;
}

std::vector<int> label_slice(const std::vector<int>& y, std::size_t s, std::size_t e) {
  return {y.begin() + static_cast<std::ptrdiff_t>(s), y.begin() + static_cast<std::ptrdiff_t>(e)};
}

Outcome ac8() {
  // (a) DML, K = 10
  int dml_wins = 0;
  std::string detail = "dml AP plain/mar:";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::LongtailSpec sp;
    sp.n_topics = 20;
    sp.exponent = 1.5;
    sp.n = 600;
    sp.dim = 30;
    sp.seed = seed;
    sp.separation = 3.0;
    sp.noise = 1.0;
    const auto data = synth::synth_longtail(sp);
    const Matrix xtr = data.dense.X.topRows(400), xte = data.dense.X.bottomRows(200);
    const auto ytr = label_slice(data.labels, 0, 400), yte = label_slice(data.labels, 400, 600);
    dml::DmlConfig c;
    c.K = 10;
    c.hinge_weight = 10.0;
    c.optimizer.outer_iters = 50;
    c.optimizer.inner_a_iters = 20;
    c.optimizer.inner_g_iters = 20;
    c.lambda = 0.0;
    const auto plain = dml::train_mar_dml(xtr, ytr, c, {1000, 1000, seed});
    c.lambda = 0.1;
    const auto reg = dml::train_mar_dml(xtr, ytr, c, {1000, 1000, seed});
    const double a0 = pair_ap(plain.a, xte, yte, 1000 + seed), a1 = pair_ap(reg.a, xte, yte, 1000 + seed);
    dml_wins += a1 >= a0;
    detail += fmt(" %.4f/%.4f", a0, a1);
  }

  // (b) RBM, lambda chosen on validation perplexity
  int ppl_wins = 0, angle_wins = 0;
  detail += fmt("; dml wins %g/5; rbm ppl plain/mar:", dml_wins);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::LongtailSpec sp;
    sp.mode = synth::Mode::docs;
    sp.n_topics = 4;
    sp.exponent = 1.5;
    sp.n = 500;
    sp.dim = 8;
    sp.doc_length = 4;
    sp.focus = 0.8;
    sp.seed = seed;
    const auto d = synth::synth_longtail(sp);
    const auto tr = slice(d.docs, 0, 300), va = slice(d.docs, 300, 400), te = slice(d.docs, 400, 500);
    rbm::RbmTrainConfig c;
    c.K = 4;
    c.lr = 0.05;
    c.minibatch = 10;
    c.epochs = 50;
    c.seed = seed;
    c.lambda = 0.0;
    const auto plain = rbm::train_mar_rbm(tr, c);
    double best_val = std::numeric_limits<double>::infinity();
    rbm::RsmParams best;
    for (double l : {0.1, 1.0, 10.0}) {
      c.lambda = l;
      const auto r = rbm::train_mar_rbm(tr, c);
      const double v = rbm::perplexity(va, r.params);
      if (v < best_val) {
        best_val = v;
        best = r.params;
      }
    }
    const double p0 = rbm::perplexity(te, plain.params), p1 = rbm::perplexity(te, best);
    const double g0 = mar_breakdown(rbm::hidden_unit_vectors(plain.params)).mean_angle;
    const double g1 = mar_breakdown(rbm::hidden_unit_vectors(best)).mean_angle;
    ppl_wins += p1 <= p0;
    angle_wins += g1 > g0;
    detail += fmt(" %.4f/%.4f", p0, p1);
  }

  // (c) NN lambda sweep
  int interior = 0;
  detail += fmt("; rbm ppl wins %g/5, angle wins %g/5; nn best lambda:", ppl_wins, angle_wins);
  const std::vector<double> grid{0.0, 0.01, 0.1, 1.0, 10.0, 100.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::LongtailSpec sp;
    sp.n_topics = 10;
    sp.exponent = 1.5;
    sp.n = 1300;
    sp.dim = 20;
    sp.seed = seed;
    sp.separation = 2.0;
    sp.noise = 1.0;
    const auto d = synth::synth_longtail(sp);
    const Matrix xtr = d.dense.X.topRows(300), xte = d.dense.X.bottomRows(1000);
    const auto ytr = label_slice(d.labels, 0, 300), yte = label_slice(d.labels, 300, 1300);
    std::vector<double> acc;
    for (double l : grid) {
      nn::NnTrainConfig c;
      c.m = 10;
      c.lambda = l;
      c.lr = 0.3;
      c.epochs = 100;
      c.minibatch = 20;
      c.seed = seed;
      acc.push_back(nn::accuracy(nn::train_nn(xtr, ytr, 10, c).params, xte, yte));
    }
    const auto b = static_cast<std::size_t>(std::max_element(acc.begin(), acc.end()) - acc.begin());
    interior += acc[b] > acc.front() && acc[b] > acc.back();
    detail += fmt(" %g", grid[b]);
  }
  detail += fmt("; nn interior %g/5", interior);
  return {dml_wins >= 4 && ppl_wins >= 3 && angle_wins == 5 && interior >= 3, detail};
}

// ---------------------------------------------------------------------------

Outcome ac9() {
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
  in.theta = 0.5;
  double worst = 0.0;
  auto rel = [&](double got, double want) { worst = std::max(worst, std::abs(got - want) / std::abs(want)); };
  rel(bounds::j_single(in), 33.778805401938157314);
  rel(bounds::rademacher_single(in), 0.3162277660168379332);
  rel(bounds::estimation_bound_squared(in).bound, 21.218740233575051021);
  rel(bounds::estimation_bound_logistic(in).bound, 1.7606061034446563637);
  rel(bounds::estimation_bound_hinge(in).bound, 1.8500162060899138591);
  const auto ce = bounds::cross_entropy_constants(in);
  rel(ce.lipschitz, 0.99999105053030274744);
  rel(ce.loss_bound, 11.623916279136586356);
  const auto ab = bounds::approximation_bound(in);
  rel(ab.barron_term, 0.038990798286465164109);
  rel(ab.bound, 1.3189907982864651641);
  rel(bounds::theta_lower_bound(1.2, 0.01, 0.9).theta, 0.8837722339831620668);
  const std::vector<bounds::LayerSpec> two{{4, 2, 0.5, 0.9}, {3, 1.5, 0.3, 0.8}};
  rel(bounds::j_multilayer(two, in.C4, in.L, in.C1, in.h0), 29.706855103193075502);
  rel(bounds::estimation_bound_multilayer(two, in).bound, 27.598442374038026434);

  bool exact = true;
  for (int i = 0; i <= 15; ++i) {
    bounds::BoundInputs x = in;
    x.theta = 0.1 * i;
    const std::vector<bounds::LayerSpec> one{{x.m, x.C3, x.theta, x.tau}};
    exact = exact && bounds::estimation_bound_multilayer(one, x).bound == bounds::estimation_bound_squared(x).bound &&
            bounds::j_multilayer(one, x.C4, x.L, x.C1, x.h0) == bounds::j_single(x);
  }

  std::vector<double> grid;
  for (int i = 1; i <= 15; ++i) grid.push_back(0.1 * i);
  const auto s = bounds::tradeoff_scan(in, grid);
  const bool scan_ok = s.estimation_nonincreasing && s.approximation_nondecreasing && s.best_interior;
  return {worst <= 1e-10 && exact && scan_ok,
          fmt("max rel error %.3g, P=1 exact %g, ", worst, exact) +
              fmt("scan monotone %g, best theta %.2f interior %g", s.estimation_nonincreasing && s.approximation_nondecreasing,
                  s.best ? s.rows[*s.best].theta : -1.0, s.best_interior)};
}

Outcome ac10() {
  std::mt19937_64 rng(10);
  std::size_t exceed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 10000; ++t) {
    const double m = verify::check_output_bound(verify::random_constrained_network(rng));
    worst = std::min(worst, m);
    exceed += m < 0.0;
  }
  return {exceed == 0, fmt("10000 networks, %g exceed the bound, tightest margin %.3g", static_cast<double>(exceed), worst)};
}

Outcome ac11() {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dd(2, 10);
  std::size_t violations = 0;
  for (int t = 0; t < 100000; ++t) {
    const Matrix u = verify::random_unit_rows(3, dd(rng), rng);
    violations += verify::check_triangle(u.row(0).transpose(), u.row(1).transpose(), u.row(2).transpose()) < 0.0;
  }
  return {violations == 0, fmt("100000 triples, %g violations", static_cast<double>(violations))};
}

}  // namespace

int main() {
  run("AC1", 5, ac1);
  run("AC2", 1, ac2);
  run("AC3", 10, ac3);
  run("AC4", 5, ac4);
  run("AC5", 30, ac5);
  run("AC6", 10, ac6);
  run("AC7", 30, ac7);
  run("AC8", 300, ac8);
  run("AC9", 1, ac9);
  run("AC10", 30, ac10);
  run("AC11", 5, ac11);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
