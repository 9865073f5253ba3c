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

#pragma once

#include <vector>

#include "gpdyn/dataset.hpp"
#include "gpdyn/gp.hpp"
#include "gpdyn/rng.hpp"

namespace gpdyn {

struct OptimizeOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // stop once step-wise improvement falls below
  double gradient_step = 1e-4;
  double initial_step = 0.25;
  double min_length_scale = 0.0;    // > 0 clamps the search from below
  double max_noise_variance = 0.0;  // > 0 clamps the search from above
  double max_signal_variance = 0.0;  // > 0 clamps the search from above
};

// Maximizes the weighted hold-one-out log density over (l, sigma_y, sigma_n)
// by numerical gradient ascent in log-parameter space. The returned
// parameters never score worse than `init`. With all-identical targets the
// fit is degenerate and `init` is returned with the noise floored at 1e-8.
Hyperparams optimize_hyperparams(const std::vector<Vector>& inputs,
                                 const Vector& targets, const Hyperparams& init,
                                 double weight = 1.0,
                                 const OptimizeOptions& opts = {});

// Maximum-likelihood disturbance variance: maximizes
//   sum_i w_i * log N(r_i; 0, v_i + sigma_d)
// over sigma_d >= 0 by 1-D search. Empty residuals leave `current` unchanged.
double fit_disturbance_cov(const Vector& residuals, const Vector& variances,
                           const Vector& weights, double current);

struct MixtureOptions {
  int nominal_modes = 1;
  bool disturbance_mode = true;  // appends an inflated-covariance mode
  int anchor_mode = 0;           // nominal mode the disturbance copy tracks
  double stay_probability = 0.95;
  int iterations = 40;
  int min_mode_size = 3;  // smaller modes skip their M-step
  OptimizeOptions m_step{.max_iterations = 25};

  // For the first `warmup_iterations` the kernel search is boxed: the length
  // scale may not shrink below its initialization and the variances may not
  // leave [*, fraction * var(tau)] ranges. Unconstrained, two flexible
  // experts either carve the state space into an interlocking patchwork
  // (short length scales, or huge signal-to-noise ratios) or hide the
  // mixed-label conflicts behind an inflated noise floor; the box keeps the
  // experts rigid and the conflicts expensive while the labels sort
  // themselves, after which the search runs free. A reduced stay
  // probability during warmup weakens the label glue for the same reason.
  int warmup_iterations = 12;
  double warmup_min_length_scale = 1.0;
  double warmup_max_noise_fraction = 0.02;
  double warmup_max_signal_fraction = 4.0;
  double warmup_stay_probability = 0.0;  // 0 keeps the configured value

  void validate() const;
};

// Mode count, labels, per-mode kernel parameters, Markov stay probability and
// the disturbance variance. The disturbance mode, when present, is the last
// index and shares the anchor mode's data and kernel parameters.
struct MixtureState {
  int nominal_modes = 1;
  bool disturbance_mode = false;
  int anchor_mode = 0;
  double stay_probability = 0.95;
  std::vector<Hyperparams> theta;
  double sigma_d = 0.0;
  std::vector<int> labels;
  int iteration = 0;
  FeatureScaling scaling;

  int total_modes() const { return nominal_modes + (disturbance_mode ? 1 : 0); }
  int disturbance_index() const { return disturbance_mode ? nominal_modes : -1; }
  void validate() const;
};

// Held-out log density of sample t under mode k: the mode's GP is evaluated
// with sample t excluded from its training subset; the disturbance mode uses
// the anchor's GP with sigma_d added to the predictive variance. An empty
// mode falls back to the GP prior N(0, sigma_y + sigma_n).
//
// This is the reference (refit-per-call) implementation; the sweep and the
// classifier compute identical values through the factorization identities.
double mode_log_likelihood(const Dataset& data, const MixtureState& st, int t,
                           int k);

// Fast-path likelihoods of sample t under every mode, computed through the
// factorization identities the sweep uses. Matches mode_log_likelihood.
std::vector<double> sweep_log_likelihoods(const MixtureState& st,
                                          const Dataset& data, int t);

// log[(1/K) * pi^c0 * (1-pi)^(T-1-c0)] with c0 the number of consecutive
// equal-label pairs; the first sample contributes the uniform 1/K factor.
double transition_log_prior(const std::vector<int>& labels, double pi,
                            int total_modes);

// Normalized full conditional p(w_t | w_-t, D, Theta) over all modes,
// combining the held-out likelihood with both temporal neighbor factors.
std::vector<double> gibbs_conditional(const MixtureState& st,
                                      const Dataset& data, int t);

// One left-to-right sweep resampling every label from its full conditional.
// Deterministic for a given rng state. Does not modify `st`.
std::vector<int> gibbs_sweep(const MixtureState& st, const Dataset& data,
                             Rng& rng);

// One SEM iteration: a Gibbs-sampled labeling, then per-mode hyperparameter
// optimization and the disturbance variance fit on the induced partition.
// Modes below min_mode_size keep their parameters this iteration. Returns
// the sample log-likelihood recorded for the convergence trace.
double sem_iterate(MixtureState& st, const Dataset& data, Rng& rng,
                   const MixtureOptions& opts);

MixtureState init_mixture(const Dataset& data, const MixtureOptions& opts,
                          Rng& rng);

struct SemResult {
  MixtureState state;
  std::vector<double> log_likelihood_trace;
};

SemResult run_sem(const Dataset& data, const MixtureOptions& opts,
                  std::uint64_t seed);

// Per-sample mode posterior probabilities from one forward-backward pass over
// the label chain. Rows sum to one.
Matrix classify(const MixtureState& st, const Dataset& data);

}  // namespace gpdyn
