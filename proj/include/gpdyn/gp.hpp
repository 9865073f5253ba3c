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

#include <Eigen/Dense>
#include <vector>

#include "gpdyn/errors.hpp"

namespace gpdyn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Squared-exponential kernel parameters. All three are strictly positive;
// the variances are in torque^2 units, the length scale in feature units.
struct Hyperparams {
  double length_scale;
  double signal_variance;
  double noise_variance;

  Hyperparams(double l, double sigma_y, double sigma_n);
};

// k(a, b) = sigma_y * exp(-|a - b|^2 / l^2), plus sigma_n on the diagonal
// (same_index refers to index identity, not value equality).
double se_kernel(const Vector& a, const Vector& b, const Hyperparams& h,
                 bool same_index = false);

// Predictive distribution of an observed torque: the variance includes the
// observation noise, so observed residuals can be judged against it.
struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Exact GP regression with scalar targets and zero prior mean. The kernel
// matrix is factorized once at construction; models are immutable afterwards
// and safe to evaluate concurrently.
class GpModel {
 public:
  // Prior-only model: predicts N(0, sigma_y + sigma_n) everywhere.
  explicit GpModel(const Hyperparams& h);

  // Fits the model. If the Cholesky factorization fails, a diagonal jitter of
  // 1e-10 * (sigma_y + sigma_n) is added and escalated tenfold up to three
  // times before giving up with NumericalError.
  GpModel(std::vector<Vector> inputs, Vector targets, const Hyperparams& h);

  const Hyperparams& hyperparams() const { return hyper_; }
  int size() const { return static_cast<int>(inputs_.size()); }
  bool empty() const { return inputs_.empty(); }
  int dim() const { return inputs_.empty() ? 0 : static_cast<int>(inputs_[0].size()); }
  const std::vector<Vector>& inputs() const { return inputs_; }
  const Vector& targets() const { return targets_; }
  const Vector& alpha() const { return alpha_; }
  const Matrix& kernel_matrix() const { return kernel_; }
  double jitter() const { return jitter_; }

  Posterior posterior(const Vector& x) const;

  // Cross-covariance vector k(x, X_i), no noise term.
  Vector cross_covariance(const Vector& x) const;

  // Solves (K_D + jitter I) v = b through the stored factorization.
  Vector solve(const Vector& b) const;

  // Diagonal of the inverse kernel matrix (used by the held-out identities).
  Vector inverse_diagonal() const;

 private:
  Hyperparams hyper_;
  std::vector<Vector> inputs_;
  Vector targets_;
  Matrix kernel_;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  double jitter_ = 0.0;
};

GpModel fit(std::vector<Vector> inputs, Vector targets, const Hyperparams& h);

// Held-out predictive distribution of every training sample, obtained from
// the full factorization: mean_i = y_i - alpha_i / [K^-1]_ii and
// var_i = 1 / [K^-1]_ii, which equal a refit without sample i.
struct LooPosteriors {
  Vector mean;
  Vector variance;
};
LooPosteriors loo_posteriors(const GpModel& m);

// Sum over samples of -(y_i - mean_i)^2 / var_i with sample i held out.
// Requires at least two samples.
double loo_log_likelihood(const GpModel& m);

// Proper held-out log density: adds the -1/2 log(2 pi var) normalizer and the
// 1/2 factor on the quadratic. This is the objective hyperparameter search
// maximizes; unlike the bare quadratic form it has a finite maximizer in the
// noise/signal scale direction.
double loo_log_density(const GpModel& m);

// Antiderivative of the posterior mean along one feature coordinate:
//   E(x) . alpha, with E_i = sigma_y * l * (sqrt(pi)/2) * g_i
//                           * erf((x_p - X_i_p) / l),
// where p = position_index and g_i = exp(-d_i^2 / l^2) with d_i the distance
// between x and X_i over the remaining (frozen) coordinates. By construction
// the derivative with respect to x_p equals the posterior mean at x, and the
// value is bounded by kernel_potential_bound for all x_p.
double kernel_potential(const GpModel& m, const Vector& at, int position_index);

// One-dimensional convenience form; rejects models with more features.
double kernel_potential(const GpModel& m, double theta);

// sigma_y * l * (sqrt(pi)/2) * sum_i |alpha_i| * g_i  >=  sup |potential|.
double kernel_potential_bound(const GpModel& m, const Vector& at,
                              int position_index);
double kernel_potential_bound(const GpModel& m);

}  // namespace gpdyn
