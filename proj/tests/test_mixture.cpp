// Copyright 2026 The gpdyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpdyn/evaluation.hpp"
#include "gpdyn/mixture.hpp"
#include "gpdyn/rng.hpp"
#include "gpdyn/simulator.hpp"

using namespace gpdyn;

namespace {

// A small dataset with hand-placed labels and identity scaling, convenient
// for exercising the likelihood machinery directly.
Dataset toy_dataset(const std::vector<double>& theta,
                    const std::vector<double>& tau) {
  Dataset d;
  d.layout = FeatureLayout::kThreeState;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    Sample s;
    s.index = static_cast<std::int64_t>(i);
    s.theta = theta[i];
    s.tau = tau[i];
    d.samples.push_back(s);
  }
  return d;
}

MixtureState toy_state(const Dataset& d, int nominal, bool disturbance,
                       std::vector<int> labels, double pi = 0.9) {
  MixtureState st;
  st.nominal_modes = nominal;
  st.disturbance_mode = disturbance;
  st.stay_probability = pi;
  for (int k = 0; k < nominal; ++k) st.theta.emplace_back(1.0, 1.0, 0.1);
  st.labels = std::move(labels);
  st.scaling = FeatureScaling::identity(feature_dim(d.layout));
  return st;
}

double log_gauss(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) -
         0.5 * (x - mean) * (x - mean) / var;
}

Dataset two_payload_dataset(std::uint64_t seed) {
  Scenario base = payload_scenario(0.0, 1.0);
  base.seed = seed;
  Scenario heavy = payload_scenario(0.25, 1.0);
  heavy.seed = seed + 1000;
  Dataset a = run_exploration(base);
  Dataset b = run_exploration(heavy);
  set_truth_mode(a, 0);
  set_truth_mode(b, 1);
  append(a, b);
  return a;
}

}  // namespace

TEST_CASE("mode likelihood of an empty mode is the GP prior") {
  const Dataset d = toy_dataset({0.0, 0.5}, {0.0, 1.0});
  MixtureState st = toy_state(d, 1, true, {1, 1});
  st.sigma_d = 0.0;
  // Mode 0 has no members: density of tau = 0 under N(0, sigma_y + sigma_n).
  const double got = mode_log_likelihood(d, st, 0, 0);
  CHECK(got == doctest::Approx(log_gauss(0.0, 0.0, 1.1)).epsilon(1e-12));
  // tau equal to the mean: the density peaks at -0.5 log(2 pi var).
  CHECK(got == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 1.1))
                   .epsilon(1e-12));
}

TEST_CASE("zero disturbance variance makes both modes identical") {
  const Dataset d = toy_dataset({0.0, 0.3, 0.7}, {0.2, 0.4, 0.1});
  MixtureState st = toy_state(d, 1, true, {0, 0, 1});
  st.sigma_d = 0.0;
  for (int t = 0; t < 3; ++t) {
    CHECK(mode_log_likelihood(d, st, t, 0) ==
          doctest::Approx(mode_log_likelihood(d, st, t, 1)).epsilon(1e-12));
  }
}

TEST_CASE("large residuals prefer the inflated-covariance mode") {
  // Empty anchor: posterior is the prior N(0, 1.1). A three-sigma residual
  // with sigma_d = 9 * var must score higher under the disturbance mode.
  const double var = 1.1;
  const double tau = 3.0 * std::sqrt(var);
  const Dataset d = toy_dataset({0.0}, {tau});
  MixtureState st = toy_state(d, 1, true, {1});
  st.sigma_d = 9.0 * var;
  const double nominal = mode_log_likelihood(d, st, 0, 0);
  const double disturbed = mode_log_likelihood(d, st, 0, 1);
  CHECK(disturbed > nominal);
  CHECK(nominal == doctest::Approx(log_gauss(tau, 0.0, var)).epsilon(1e-12));
  CHECK(disturbed ==
        doctest::Approx(log_gauss(tau, 0.0, 10.0 * var)).epsilon(1e-12));
}

TEST_CASE("sweep fast path equals the refit-per-call reference") {
  Rng rng(77);
  Scenario sc = payload_scenario(0.0, 1.0);
  sc.seed = 3;
  Dataset d = run_exploration(sc);
  d.samples.resize(40);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<int> labels(40);
    for (int& w : labels) w = rng.index(3);
    MixtureState st = toy_state(d, 2, true, labels);
    st.scaling = FeatureScaling::fit(d);
    st.theta[0] = Hyperparams(0.8, 0.3, 0.05);
    st.theta[1] = Hyperparams(1.2, 0.5, 0.02);
    st.sigma_d = 0.2;
    for (int t : {0, 7, 19, 39}) {
      const auto fast = sweep_log_likelihoods(st, d, t);
      for (int k = 0; k < st.total_modes(); ++k) {
        const double slow = mode_log_likelihood(d, st, t, k);
        CHECK(std::abs(fast[k] - slow) <=
              1e-10 * std::max(1.0, std::abs(slow)));
      }
    }
  }
}

TEST_CASE("transition log prior") {
  SUBCASE("worked example") {
    // (1,1,2) with pi = 0.9: one stay, one switch, uniform first factor.
    const double got = transition_log_prior({0, 0, 1}, 0.9, 2);
    CHECK(got == doctest::Approx(std::log(0.5) + std::log(0.9) +
                                 std::log(0.1))
                     .epsilon(1e-12));
  }
  SUBCASE("all equal labels") {
    const double got = transition_log_prior({1, 1, 1, 1, 1}, 0.8, 3);
    CHECK(got ==
          doctest::Approx(std::log(1.0 / 3.0) + 4.0 * std::log(0.8))
              .epsilon(1e-12));
  }
  SUBCASE("alternating labels") {
    const double got = transition_log_prior({0, 1, 0, 1}, 0.8, 2);
    CHECK(got == doctest::Approx(std::log(0.5) + 3.0 * std::log(0.2))
                     .epsilon(1e-12));
  }
  SUBCASE("single sample is the uniform factor") {
    CHECK(transition_log_prior({0}, 0.9, 4) ==
          doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(transition_log_prior({}, 0.9, 2), ValidationError);
    CHECK_THROWS_AS(transition_log_prior({0}, 1.0, 2), ValidationError);
  }
}

TEST_CASE("gibbs conditionals are valid distributions") {
  Rng rng(5);
  Scenario sc = payload_scenario(0.0, 1.0);
  sc.seed = 8;
  Dataset d = run_exploration(sc);
  d.samples.resize(30);
  std::vector<int> labels(30);
  for (int& w : labels) w = rng.index(3);
  MixtureState st = toy_state(d, 2, true, labels);
  st.scaling = FeatureScaling::fit(d);
  st.sigma_d = 0.1;
  for (int t = 0; t < 30; t += 3) {
    const auto p = gibbs_conditional(st, d, t);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stay probability near one pins the label to equal neighbors") {
  const Dataset d = toy_dataset({0.0, 0.1, 0.2}, {0.0, 0.0, 0.0});
  MixtureState st = toy_state(d, 1, true, {0, 1, 0}, 1.0 - 1e-9);
  st.sigma_d = 0.0;  // equal likelihoods: only the Markov factor acts
  const auto p = gibbs_conditional(st, d, 1);
  CHECK(p[0] > 1.0 - 1e-6);
}

TEST_CASE("single mode sweep leaves labels unchanged") {
  const Dataset d = toy_dataset({0.0, 0.1, 0.2}, {0.5, 0.4, 0.3});
  MixtureState st = toy_state(d, 1, false, {0, 0, 0});
  Rng rng(1);
  CHECK(gibbs_sweep(st, d, rng) == std::vector<int>{0, 0, 0});
}

TEST_CASE("overwhelming likelihood ratio wins every seeded draw") {
  // Mode 1 holds a sample identical to the one being resampled; mode 0 is
  // empty with a tight prior far from tau. The log ratio exceeds 20.
  Dataset d = toy_dataset({0.2, 0.2}, {5.0, 5.0});
  MixtureState st = toy_state(d, 2, false, {1, 1}, 0.5);
  st.theta[0] = Hyperparams(1.0, 0.05, 0.01);
  st.theta[1] = Hyperparams(1.0, 30.0, 0.01);

  const auto lik = sweep_log_likelihoods(st, d, 0);
  REQUIRE(lik[1] - lik[0] > 20.0);

  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const auto labels = gibbs_sweep(st, d, rng);
    REQUIRE(labels[0] == 1);
  }
}

TEST_CASE("duplicate modes draw uniformly (chi-squared at 1%)") {
  // Disturbance copy with sigma_d = 0 is indistinguishable from the anchor;
  // the final label of the middle sample must be uniform across seeds.
  Rng data_rng(13);
  std::vector<double> theta(9), tau(9);
  for (int i = 0; i < 9; ++i) {
    theta[i] = 0.1 * i;
    tau[i] = 0.3 * data_rng.normal();
  }
  const Dataset d = toy_dataset(theta, tau);

  long hits = 0;
  const long draws = 2000;
  for (long seed = 0; seed < draws; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1);
    MixtureState st = toy_state(d, 1, true, {}, 0.6);
    st.sigma_d = 0.0;
    st.labels.resize(9);
    for (int& w : st.labels) w = rng.index(2);
    const auto labels = gibbs_sweep(st, d, rng);
    if (labels[4] == 1) ++hits;
  }
  const double expected = draws / 2.0;
  const double chi2 = (hits - expected) * (hits - expected) / expected +
                      (draws - hits - expected) * (draws - hits - expected) /
                          expected;
  CHECK(chi2 < 6.63);  // chi-squared, 1 dof, 1% level
}

TEST_CASE("sweeps are deterministic for a fixed seed") {
  const Dataset d = two_payload_dataset(21);
  MixtureOptions opts;
  opts.nominal_modes = 2;
  opts.disturbance_mode = false;
  opts.iterations = 3;
  opts.m_step.max_iterations = 4;
  const SemResult a = run_sem(d, opts, 17);
  const SemResult b = run_sem(d, opts, 17);
  CHECK(a.state.labels == b.state.labels);
  CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
  CHECK(a.state.theta[0].length_scale == b.state.theta[0].length_scale);
}

TEST_CASE("optimize_hyperparams recovers the length scale within 2x") {
  // Draw targets from a known GP and re-estimate the kernel parameters.
  Rng rng(101);
  const double true_l = 0.5, true_sy = 1.0, true_sn = 0.01;
  const int n = 100;
  std::vector<Vector> xs;
  for (int i = 0; i < n; ++i) {
    xs.push_back(Vector::Constant(1, rng.uniform(-2.0, 2.0)));
  }
  const Hyperparams truth(true_l, true_sy, true_sn);
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) k(i, j) = se_kernel(xs[i], xs[j], truth, i == j);
  }
  const Eigen::LLT<Matrix> llt(k);
  Vector z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  const Vector y = llt.matrixL() * z;

  const double var_y = (y.array() - y.mean()).square().sum() / n;
  const Hyperparams init(1.0, var_y, 0.1 * var_y);
  const Hyperparams fitted = optimize_hyperparams(xs, y, init);
  CHECK(fitted.length_scale >= true_l / 2.0);
  CHECK(fitted.length_scale <= true_l * 2.0);

  // The optimizer never returns a worse objective than its start.
  const double before = loo_log_density(GpModel(xs, y, init));
  const double after = loo_log_density(GpModel(xs, y, fitted));
  CHECK(after >= before);
}

TEST_CASE("optimize_hyperparams is nearly idempotent at an optimum") {
  Rng rng(7);
  std::vector<Vector> xs;
  Vector y(60);
  for (int i = 0; i < 60; ++i) {
    const double t = rng.uniform(-1.5, 1.5);
    xs.push_back(Vector::Constant(1, t));
    y(i) = std::sin(2.0 * t) + 0.05 * rng.normal();
  }
  const Hyperparams init(1.0, 1.0, 0.1);
  const Hyperparams once = optimize_hyperparams(xs, y, init);
  const Hyperparams twice = optimize_hyperparams(xs, y, once);
  const double f1 = loo_log_density(GpModel(xs, y, once));
  const double f2 = loo_log_density(GpModel(xs, y, twice));
  CHECK(f2 - f1 <= 5e-6 * std::max(1.0, std::abs(f1)));
}

TEST_CASE("optimize_hyperparams guards the degenerate fit") {
  std::vector<Vector> xs{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0),
                         Vector::Constant(1, 2.0)};
  const Vector y = Vector::Constant(3, 4.0);
  const Hyperparams init(0.7, 0.3, 0.2);
  const Hyperparams out = optimize_hyperparams(xs, y, init);
  CHECK(out.length_scale == 0.7);
  CHECK(out.signal_variance == 0.3);
  CHECK(out.noise_variance == 0.2);  // already above the 1e-8 floor

  CHECK_THROWS_AS(
      optimize_hyperparams({Vector::Constant(1, 0.0)}, Vector::Ones(1), init),
      ValidationError);
}

TEST_CASE("paper operating point as init keeps a non-decreasing objective") {
  // Paper-like data scale: torques of a fraction of a newton-metre.
  Rng rng(55);
  std::vector<Vector> xs;
  Vector y(80);
  for (int i = 0; i < 80; ++i) {
    const double t = rng.uniform(-1.0, 1.0);
    xs.push_back(Vector::Constant(1, t));
    y(i) = 0.3 * std::sin(t) + 0.1 * rng.normal();
  }
  const Hyperparams init(0.42, 0.05, 0.14);
  const Hyperparams out = optimize_hyperparams(xs, y, init);
  CHECK(loo_log_density(GpModel(xs, y, out)) >=
        loo_log_density(GpModel(xs, y, init)));
}

TEST_CASE("disturbance variance fit") {
  SUBCASE("all-zero residuals sit at the boundary") {
    const Vector r = Vector::Zero(10);
    const Vector v = Vector::Constant(10, 0.2);
    CHECK(fit_disturbance_cov(r, v, Vector::Ones(10), 0.5) == 0.0);
  }
  SUBCASE("single residual closed form") {
    Vector r(1), v(1);
    r << 0.5;
    v << 0.1;
    const double got = fit_disturbance_cov(r, v, Vector::Ones(1), 0.0);
    CHECK(got == doctest::Approx(0.5 * 0.5 - 0.1).epsilon(1e-5));

    r << 0.1;  // residual below the posterior spread: boundary at zero
    v << 0.5;
    CHECK(fit_disturbance_cov(r, v, Vector::Ones(1), 0.3) == 0.0);
  }
  SUBCASE("recovers a synthetic variance within 20%") {
    Rng rng(3);
    const double true_v = 0.4;
    const int n = 500;
    Vector r(n), v(n);
    for (int i = 0; i < n; ++i) {
      v(i) = 0.05;
      r(i) = std::sqrt(true_v + v(i)) * rng.normal();
    }
    const double got = fit_disturbance_cov(r, v, Vector::Ones(n), 0.0);
    CHECK(got == doctest::Approx(true_v).epsilon(0.2));
  }
  SUBCASE("empty residuals keep the current value") {
    CHECK(fit_disturbance_cov(Vector(), Vector(), Vector(), 0.123) == 0.123);
  }
}

TEST_CASE("sem_iterate with one mode reduces to hyperparameter optimization") {
  Scenario sc = payload_scenario(0.0, 1.0);
  sc.seed = 2;
  Dataset d = run_exploration(sc);
  d.samples.resize(60);
  MixtureOptions opts;
  opts.nominal_modes = 1;
  opts.disturbance_mode = false;
  opts.m_step.max_iterations = 10;
  Rng rng(4);
  MixtureState st = init_mixture(d, opts, rng);
  const Hyperparams before = st.theta[0];
  const double trace = sem_iterate(st, d, rng, opts);
  CHECK(std::isfinite(trace));
  CHECK(std::all_of(st.labels.begin(), st.labels.end(),
                    [](int w) { return w == 0; }));
  // The M-step moved the parameters (data are not degenerate).
  const bool moved = before.length_scale != st.theta[0].length_scale ||
                     before.signal_variance != st.theta[0].signal_variance ||
                     before.noise_variance != st.theta[0].noise_variance;
  CHECK(moved);
}

TEST_CASE("a starved mode keeps its parameters for the iteration") {
  // All data live in one regime; the second mode rarely keeps 3 members.
  Scenario sc = payload_scenario(0.0, 1.0);
  sc.seed = 6;
  Dataset d = run_exploration(sc);
  d.samples.resize(50);
  MixtureOptions opts;
  opts.nominal_modes = 2;
  opts.disturbance_mode = false;
  opts.m_step.max_iterations = 5;
  Rng rng(9);
  MixtureState st = init_mixture(d, opts, rng);
  // Hand the sweep a state in which mode 1 cannot win any sample.
  st.theta[0] = Hyperparams(1.0, 1.0, 0.5);
  st.theta[1] = Hyperparams(1e-3, 1e-6, 1e-6);
  for (int& w : st.labels) w = 0;
  const Hyperparams frozen = st.theta[1];
  sem_iterate(st, d, rng, opts);
  int members = 0;
  for (int w : st.labels) members += w == 1 ? 1 : 0;
  if (members < opts.min_mode_size) {
    CHECK(st.theta[1].length_scale == frozen.length_scale);
    CHECK(st.theta[1].signal_variance == frozen.signal_variance);
  }
}

TEST_CASE("payload modes are recovered with high agreement") {
  const Dataset d = two_payload_dataset(42);
  MixtureOptions opts;
  opts.nominal_modes = 2;
  opts.disturbance_mode = false;
  opts.iterations = 25;
  opts.m_step.max_iterations = 10;
  const SemResult result = run_sem(d, opts, 7);
  const ConfusionCounts counts =
      score_classification(result.state.labels, d.truth_modes());
  CHECK(counts.accuracy() >= 0.95);
}

TEST_CASE("SEM trace is bounded and its running maximum settles") {
  Dataset d = two_payload_dataset(33);
  d.samples.resize(120);
  MixtureOptions opts;
  opts.nominal_modes = 2;
  opts.disturbance_mode = false;
  opts.iterations = 40;
  opts.m_step.max_iterations = 6;
  const SemResult result = run_sem(d, opts, 5);
  double running_max = -1e300;
  double max_at_three_quarters = 0.0;
  const std::size_t n = result.log_likelihood_trace.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = result.log_likelihood_trace[i];
    REQUIRE(std::isfinite(v));
    running_max = std::max(running_max, v);
    if (i == 3 * n / 4) max_at_three_quarters = running_max;
  }
  CHECK(running_max - max_at_three_quarters <=
        0.02 * std::max(1.0, std::abs(running_max)));
}

TEST_CASE("classify posteriors are normalized and symmetric cases split") {
  const Dataset d = toy_dataset({0.0, 0.2, 0.4, 0.6}, {0.1, -0.1, 0.2, 0.0});
  MixtureState st = toy_state(d, 1, true, {0, 1, 0, 1}, 0.5);
  st.sigma_d = 0.0;  // duplicate modes, symmetric emissions
  const Matrix p = classify(st, d);
  for (int t = 0; t < 4; ++t) {
    CHECK(p.row(t).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(t, 0) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("huge disturbance variance still captures extreme residuals") {
  // Consistent anchor data plus one wild outlier.
  std::vector<double> theta, tau;
  for (int i = 0; i < 20; ++i) {
    theta.push_back(0.1 * i);
    tau.push_back(0.5);
  }
  tau[10] = 60.0;
  const Dataset d = toy_dataset(theta, tau);
  std::vector<int> labels(20, 0);
  labels[10] = 1;
  MixtureState st = toy_state(d, 1, true, labels, 0.9);
  st.theta[0] = Hyperparams(1.0, 0.3, 0.01);
  st.sigma_d = 1e6;
  const Matrix p = classify(st, d);
  CHECK(p(10, 1) > p(10, 0));
  // Ordinary samples keep preferring the nominal mode even against the
  // nearly flat disturbance density.
  CHECK(p(3, 0) > p(3, 1));
}

TEST_CASE("classification is equivariant under mode relabeling") {
  const Dataset d = two_payload_dataset(11);
  Dataset small = d;
  small.samples.resize(80);
  Rng rng(19);
  std::vector<int> labels(80);
  for (int& w : labels) w = rng.index(2);
  MixtureState st = toy_state(small, 2, false, labels, 0.9);
  st.scaling = FeatureScaling::fit(small);
  st.theta[0] = Hyperparams(0.7, 0.4, 0.03);
  st.theta[1] = Hyperparams(1.1, 0.2, 0.08);

  MixtureState swapped = st;
  std::swap(swapped.theta[0], swapped.theta[1]);
  for (int& w : swapped.labels) w = 1 - w;

  const Matrix p = classify(st, small);
  const Matrix q = classify(swapped, small);
  for (int t = 0; t < 80; ++t) {
    CHECK(p(t, 0) == doctest::Approx(q(t, 1)).epsilon(1e-9));
    CHECK(p(t, 1) == doctest::Approx(q(t, 0)).epsilon(1e-9));
  }
}

TEST_CASE("mixture options validation") {
  MixtureOptions opts;
  opts.nominal_modes = 0;
  CHECK_THROWS_AS(opts.validate(), ValidationError);
  opts.nominal_modes = 2;
  opts.stay_probability = 1.0;
  CHECK_THROWS_AS(opts.validate(), ValidationError);
  opts.stay_probability = 0.9;
  opts.anchor_mode = 5;
  CHECK_THROWS_AS(opts.validate(), ValidationError);
}
