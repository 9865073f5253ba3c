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

#include "gpdyn/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gpdyn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_gaussian(double value, double mean, double variance) {
  const double r = value - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) -
         0.5 * r * r / variance;
}

double population_variance(const Vector& y) {
  if (y.size() == 0) return 0.0;
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(y.size());
}

// Per-mode GP fits maintained across a sweep. Held-out posteriors for
// in-subset samples come from the full factorization through
//   mean_t = y_t - alpha_t / [K^-1]_tt,  var_t = 1 / [K^-1]_tt,
// which equals a refit without the sample; out-of-subset samples use the
// ordinary posterior.
class ModeLikelihood {
 public:
  ModeLikelihood(const MixtureState& st, const Dataset& data)
      : st_(st),
        inputs_(st.scaling.apply(data.features())),
        targets_(data.targets()),
        labels_(st.labels),
        modes_(st.nominal_modes) {
    const int t = static_cast<int>(inputs_.size());
    if (static_cast<int>(labels_.size()) != t) {
      throw ValidationError("label vector length does not match dataset");
    }
    for (int k = 0; k < st_.nominal_modes; ++k) rebuild(k);
  }

  const std::vector<int>& labels() const { return labels_; }

  void relabel(int t, int to) {
    const int from = labels_[t];
    if (from == to) return;
    labels_[t] = to;
    if (from < st_.nominal_modes) rebuild(from);
    if (to < st_.nominal_modes) rebuild(to);
  }

  Posterior loo_posterior(int t, int nominal_k) const {
    const FittedMode& m = modes_[nominal_k];
    const int local = m.local[t];
    if (local < 0) return m.gp.posterior(inputs_[t]);
    const double d = m.kinv_diag(local);
    return {targets_(t) - m.gp.alpha()(local) / d, 1.0 / d};
  }

  double log_likelihood(int t, int k) const {
    Posterior p;
    if (k == st_.disturbance_index()) {
      p = loo_posterior(t, st_.anchor_mode);
      p.variance += st_.sigma_d;
    } else {
      p = loo_posterior(t, k);
    }
    return log_gaussian(targets_(t), p.mean, p.variance);
  }

 private:
  struct FittedMode {
    GpModel gp;
    Vector kinv_diag;
    std::vector<int> local;  // sample index -> position in subset, or -1
    FittedMode() : gp(Hyperparams(1.0, 1.0, 1.0)) {}
  };

  void rebuild(int k) {
    const int t = static_cast<int>(inputs_.size());
    FittedMode& m = modes_[k];
    m.local.assign(t, -1);
    std::vector<Vector> xs;
    std::vector<double> ys;
    for (int i = 0; i < t; ++i) {
      if (labels_[i] != k) continue;
      m.local[i] = static_cast<int>(xs.size());
      xs.push_back(inputs_[i]);
      ys.push_back(targets_(i));
    }
    Vector y(static_cast<int>(ys.size()));
    for (int i = 0; i < y.size(); ++i) y(i) = ys[i];
    m.gp = GpModel(std::move(xs), std::move(y), st_.theta[k]);
    m.kinv_diag = m.gp.empty() ? Vector() : m.gp.inverse_diagonal();
  }

  const MixtureState& st_;
  std::vector<Vector> inputs_;
  Vector targets_;
  std::vector<int> labels_;
  std::vector<FittedMode> modes_;
};

double markov_log_factor(const std::vector<int>& labels, int t, int k,
                         double pi) {
  const int n = static_cast<int>(labels.size());
  double lp = 0.0;
  if (t > 0) lp += labels[t - 1] == k ? std::log(pi) : std::log(1.0 - pi);
  if (t + 1 < n) lp += labels[t + 1] == k ? std::log(pi) : std::log(1.0 - pi);
  return lp;
}

std::vector<double> normalize_log(const std::vector<double>& logp) {
  const double top = *std::max_element(logp.begin(), logp.end());
  std::vector<double> p(logp.size(), 0.0);
  if (!std::isfinite(top)) {
    // Every candidate underflowed; fall back to uniform.
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    p[i] = std::exp(logp[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

int sample_categorical(const std::vector<double>& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

void MixtureOptions::validate() const {
  if (nominal_modes < 1) throw ValidationError("need at least one mode");
  if (anchor_mode < 0 || anchor_mode >= nominal_modes) {
    throw ValidationError("anchor mode out of range");
  }
  if (!(stay_probability > 0.0) || !(stay_probability < 1.0)) {
    throw ValidationError("stay probability must lie in (0, 1)");
  }
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
}

void MixtureState::validate() const {
  if (nominal_modes < 1) throw ValidationError("need at least one mode");
  if (static_cast<int>(theta.size()) != nominal_modes) {
    throw ValidationError("one hyperparameter set per nominal mode required");
  }
  if (anchor_mode < 0 || anchor_mode >= nominal_modes) {
    throw ValidationError("anchor mode out of range");
  }
  if (!(stay_probability > 0.0) || !(stay_probability < 1.0)) {
    throw ValidationError("stay probability must lie in (0, 1)");
  }
  if (sigma_d < 0.0) throw ValidationError("sigma_d must be >= 0");
  for (int w : labels) {
    if (w < 0 || w >= total_modes()) throw ValidationError("label out of range");
  }
}

Hyperparams optimize_hyperparams(const std::vector<Vector>& inputs,
                                 const Vector& targets, const Hyperparams& init,
                                 double weight, const OptimizeOptions& opts) {
  const int n = static_cast<int>(inputs.size());
  if (n < 2) throw ValidationError("hyperparameter fit needs >= 2 samples");
  if (population_variance(targets) < 1e-24) {
    return Hyperparams(init.length_scale, init.signal_variance,
                       std::max(init.noise_variance, 1e-8));
  }

  constexpr double kLogLo = -23.0;  // ~1e-10
  constexpr double kLogHi = 23.0;   // ~1e10
  const double l_floor =
      opts.min_length_scale > 0.0 ? std::log(opts.min_length_scale) : kLogLo;
  const double sn_cap = opts.max_noise_variance > 0.0
                            ? std::log(opts.max_noise_variance)
                            : kLogHi;
  const double sy_cap = opts.max_signal_variance > 0.0
                            ? std::log(opts.max_signal_variance)
                            : kLogHi;
  auto clamp_point = [&](Eigen::Vector3d u) {
    u = u.cwiseMax(kLogLo).cwiseMin(kLogHi);
    u(0) = std::max(u(0), l_floor);
    u(1) = std::min(u(1), sy_cap);
    u(2) = std::min(u(2), sn_cap);
    return u;
  };
  auto objective = [&](const Eigen::Vector3d& u) {
    try {
      const Hyperparams h(std::exp(u(0)), std::exp(u(1)), std::exp(u(2)));
      return weight * loo_log_density(GpModel(inputs, targets, h));
    } catch (const NumericalError&) {
      return kNegInf;
    }
  };

  Eigen::Vector3d u(std::log(init.length_scale),
                    std::log(init.signal_variance),
                    std::log(init.noise_variance));
  u = clamp_point(u);
  double f = objective(u);
  double step = opts.initial_step;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Eigen::Vector3d grad;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d up = u, dn = u;
      up(j) += opts.gradient_step;
      dn(j) -= opts.gradient_step;
      grad(j) = (objective(up) - objective(dn)) / (2.0 * opts.gradient_step);
    }
    if (!grad.allFinite() || grad.lpNorm<Eigen::Infinity>() < 1e-8) break;

    const Eigen::Vector3d dir = grad.normalized();
    bool improved = false;
    double gain = 0.0;
    while (step > 1e-12) {
      const Eigen::Vector3d u2 = clamp_point(u + step * dir);
      const double f2 = objective(u2);
      if (f2 > f) {
        gain = f2 - f;
        u = u2;
        f = f2;
        step = std::min(step * 1.6, 2.0);
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved || gain < opts.tolerance) break;
  }

  return Hyperparams(std::exp(u(0)), std::exp(u(1)), std::exp(u(2)));
}

double fit_disturbance_cov(const Vector& residuals, const Vector& variances,
                           const Vector& weights, double current) {
  const int n = static_cast<int>(residuals.size());
  if (n == 0) return current;
  if (variances.size() != n || weights.size() != n) {
    throw ValidationError("fit_disturbance_cov: length mismatch");
  }

  auto objective = [&](double s) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      total += weights(i) * log_gaussian(residuals(i), 0.0, variances(i) + s);
    }
    return total;
  };

  const double scale =
      std::max(residuals.array().square().maxCoeff(), variances.maxCoeff());
  // Coarse log-spaced scan from zero, then golden-section refinement of the
  // best bracket.
  std::vector<double> grid{0.0};
  for (int i = 0; i <= 160; ++i) {
    grid.push_back(scale * std::pow(10.0, -12.0 + 15.0 * i / 160.0));
  }
  int best = 0;
  double best_f = objective(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double f = objective(grid[i]);
    if (f > best_f) {
      best_f = f;
      best = static_cast<int>(i);
    }
  }
  double lo = best > 0 ? grid[best - 1] : 0.0;
  double hi = best + 1 < static_cast<int>(grid.size()) ? grid[best + 1]
                                                       : grid.back() * 10.0;

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = objective(c), fd = objective(d);
  const double tol = 1e-8 * std::max(1.0, scale);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = objective(d);
    }
  }
  double arg = 0.5 * (a + b);
  if (objective(0.0) >= objective(arg)) arg = 0.0;  // boundary maximizer
  return std::max(0.0, arg);
}

double mode_log_likelihood(const Dataset& data, const MixtureState& st, int t,
                           int k) {
  st.validate();
  if (t < 0 || t >= data.size()) throw ValidationError("sample index range");
  if (k < 0 || k >= st.total_modes()) throw ValidationError("mode index range");

  const int nominal = k == st.disturbance_index() ? st.anchor_mode : k;
  const std::vector<Vector> inputs = st.scaling.apply(data.features());
  std::vector<Vector> xs;
  std::vector<double> ys;
  for (int i = 0; i < data.size(); ++i) {
    if (i == t || st.labels[i] != nominal) continue;
    xs.push_back(inputs[i]);
    ys.push_back(data.samples[i].tau);
  }
  Vector y(static_cast<int>(ys.size()));
  for (int i = 0; i < y.size(); ++i) y(i) = ys[i];
  const GpModel gp(std::move(xs), std::move(y), st.theta[nominal]);
  Posterior p = gp.posterior(inputs[t]);
  if (k == st.disturbance_index()) p.variance += st.sigma_d;
  return log_gaussian(data.samples[t].tau, p.mean, p.variance);
}

double transition_log_prior(const std::vector<int>& labels, double pi,
                            int total_modes) {
  if (labels.empty()) throw ValidationError("empty label vector");
  if (!(pi > 0.0) || !(pi < 1.0)) {
    throw ValidationError("stay probability must lie in (0, 1)");
  }
  const int t = static_cast<int>(labels.size());
  int stays = 0;
  for (int i = 1; i < t; ++i) {
    if (labels[i] == labels[i - 1]) ++stays;
  }
  return -std::log(static_cast<double>(total_modes)) +
         stays * std::log(pi) + (t - 1 - stays) * std::log(1.0 - pi);
}

std::vector<double> sweep_log_likelihoods(const MixtureState& st,
                                          const Dataset& data, int t) {
  st.validate();
  if (t < 0 || t >= data.size()) throw ValidationError("sample index range");
  ModeLikelihood ml(st, data);
  std::vector<double> out(st.total_modes());
  for (int k = 0; k < st.total_modes(); ++k) out[k] = ml.log_likelihood(t, k);
  return out;
}

std::vector<double> gibbs_conditional(const MixtureState& st,
                                      const Dataset& data, int t) {
  const int modes = st.total_modes();
  std::vector<double> logp(modes);
  for (int k = 0; k < modes; ++k) {
    logp[k] = mode_log_likelihood(data, st, t, k) +
              markov_log_factor(st.labels, t, k, st.stay_probability);
  }
  return normalize_log(logp);
}

std::vector<int> gibbs_sweep(const MixtureState& st, const Dataset& data,
                             Rng& rng) {
  st.validate();
  const int n = data.size();
  if (static_cast<int>(st.labels.size()) != n) {
    throw ValidationError("label vector length does not match dataset");
  }
  const int modes = st.total_modes();
  if (modes == 1) return st.labels;

  ModeLikelihood ml(st, data);
  std::vector<double> logp(modes);
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < modes; ++k) {
      logp[k] = ml.log_likelihood(t, k) +
                markov_log_factor(ml.labels(), t, k, st.stay_probability);
    }
    const int pick = sample_categorical(normalize_log(logp), rng);
    ml.relabel(t, pick);
  }
  return ml.labels();
}

double sem_iterate(MixtureState& st, const Dataset& data, Rng& rng,
                   const MixtureOptions& opts) {
  const bool warmup = st.iteration < opts.warmup_iterations;

  const double configured_pi = st.stay_probability;
  if (warmup && opts.warmup_stay_probability > 0.0) {
    st.stay_probability = opts.warmup_stay_probability;
  }
  st.labels = gibbs_sweep(st, data, rng);
  st.stay_probability = configured_pi;

  const std::vector<Vector> inputs = st.scaling.apply(data.features());
  const Vector targets = data.targets();

  OptimizeOptions m_step = opts.m_step;
  if (warmup) {
    const double var_tau = std::max(population_variance(targets), 1e-12);
    m_step.min_length_scale =
        std::max(m_step.min_length_scale, opts.warmup_min_length_scale);
    if (opts.warmup_max_noise_fraction > 0.0) {
      m_step.max_noise_variance = opts.warmup_max_noise_fraction * var_tau;
    }
    if (opts.warmup_max_signal_fraction > 0.0) {
      m_step.max_signal_variance = opts.warmup_max_signal_fraction * var_tau;
    }
  }

  for (int k = 0; k < st.nominal_modes; ++k) {
    std::vector<Vector> xs;
    std::vector<double> ys;
    for (int i = 0; i < data.size(); ++i) {
      if (st.labels[i] != k) continue;
      xs.push_back(inputs[i]);
      ys.push_back(targets(i));
    }
    if (static_cast<int>(xs.size()) < opts.min_mode_size) continue;  // frozen
    Vector y(static_cast<int>(ys.size()));
    for (int i = 0; i < y.size(); ++i) y(i) = ys[i];
    st.theta[k] = optimize_hyperparams(xs, y, st.theta[k], 1.0, m_step);
  }

  if (st.disturbance_mode) {
    std::vector<Vector> xs;
    std::vector<double> ys;
    std::vector<int> perturbed;
    for (int i = 0; i < data.size(); ++i) {
      if (st.labels[i] == st.anchor_mode) {
        xs.push_back(inputs[i]);
        ys.push_back(targets(i));
      } else if (st.labels[i] == st.disturbance_index()) {
        perturbed.push_back(i);
      }
    }
    if (!perturbed.empty()) {
      Vector y(static_cast<int>(ys.size()));
      for (int i = 0; i < y.size(); ++i) y(i) = ys[i];
      const GpModel anchor(std::move(xs), std::move(y),
                           st.theta[st.anchor_mode]);
      Vector r(static_cast<int>(perturbed.size()));
      Vector v(static_cast<int>(perturbed.size()));
      for (std::size_t j = 0; j < perturbed.size(); ++j) {
        const Posterior p = anchor.posterior(inputs[perturbed[j]]);
        r(j) = targets(perturbed[j]) - p.mean;
        v(j) = p.variance;
      }
      st.sigma_d = fit_disturbance_cov(
          r, v, Vector::Ones(static_cast<int>(perturbed.size())), st.sigma_d);
    }
  }

  ++st.iteration;

  ModeLikelihood ml(st, data);
  double trace = 0.0;
  for (int t = 0; t < data.size(); ++t) {
    trace += ml.log_likelihood(t, st.labels[t]);
  }
  return trace;
}

MixtureState init_mixture(const Dataset& data, const MixtureOptions& opts,
                          Rng& rng) {
  opts.validate();
  data.validate();
  if (data.size() < 1) throw ValidationError("empty dataset");

  MixtureState st;
  st.nominal_modes = opts.nominal_modes;
  st.disturbance_mode = opts.disturbance_mode;
  st.anchor_mode = opts.anchor_mode;
  st.stay_probability = opts.stay_probability;
  st.scaling = FeatureScaling::fit(data);

  const double var_tau = std::max(population_variance(data.targets()), 1e-12);
  for (int k = 0; k < st.nominal_modes; ++k) {
    st.theta.emplace_back(1.0, var_tau, 0.1 * var_tau);
  }
  st.sigma_d = st.disturbance_mode ? var_tau : 0.0;

  st.labels.resize(data.size());
  for (int& w : st.labels) w = rng.index(st.total_modes());
  return st;
}

SemResult run_sem(const Dataset& data, const MixtureOptions& opts,
                  std::uint64_t seed) {
  Rng rng(seed);
  SemResult result{init_mixture(data, opts, rng), {}};
  result.log_likelihood_trace.reserve(opts.iterations);
  for (int i = 0; i < opts.iterations; ++i) {
    result.log_likelihood_trace.push_back(
        sem_iterate(result.state, data, rng, opts));
  }
  return result;
}

Matrix classify(const MixtureState& st, const Dataset& data) {
  st.validate();
  const int n = data.size();
  if (static_cast<int>(st.labels.size()) != n) {
    throw ValidationError("label vector length does not match dataset");
  }
  const int modes = st.total_modes();
  const double pi = st.stay_probability;

  ModeLikelihood ml(st, data);
  Matrix emission(n, modes);
  for (int t = 0; t < n; ++t) {
    double top = kNegInf;
    for (int k = 0; k < modes; ++k) {
      emission(t, k) = ml.log_likelihood(t, k);
      top = std::max(top, emission(t, k));
    }
    // Scale per row; forward-backward renormalizes anyway.
    for (int k = 0; k < modes; ++k) {
      emission(t, k) = std::exp(emission(t, k) - top);
    }
  }

  auto psi = [&](int a, int b) { return a == b ? pi : 1.0 - pi; };

  Matrix forward(n, modes), backward(n, modes);
  for (int k = 0; k < modes; ++k) {
    forward(0, k) = emission(0, k) / modes;
  }
  forward.row(0) /= forward.row(0).sum();
  for (int t = 1; t < n; ++t) {
    for (int k = 0; k < modes; ++k) {
      double acc = 0.0;
      for (int j = 0; j < modes; ++j) acc += forward(t - 1, j) * psi(j, k);
      forward(t, k) = acc * emission(t, k);
    }
    forward.row(t) /= forward.row(t).sum();
  }
  backward.row(n - 1).setOnes();
  for (int t = n - 2; t >= 0; --t) {
    for (int k = 0; k < modes; ++k) {
      double acc = 0.0;
      for (int j = 0; j < modes; ++j) {
        acc += psi(k, j) * emission(t + 1, j) * backward(t + 1, j);
      }
      backward(t, k) = acc;
    }
    backward.row(t) /= backward.row(t).sum();
  }

  Matrix posterior(n, modes);
  for (int t = 0; t < n; ++t) {
    posterior.row(t) = forward.row(t).cwiseProduct(backward.row(t));
    posterior.row(t) /= posterior.row(t).sum();
  }
  return posterior;
}

}  // namespace gpdyn
