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

#include "gpdyn/gp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace gpdyn {

namespace {

constexpr double kHalfSqrtPi = 0.8862269254527580;  // sqrt(pi) / 2

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite " << what << ": " << v;
    throw ValidationError(msg.str());
  }
}

}  // namespace

Hyperparams::Hyperparams(double l, double sigma_y, double sigma_n)
    : length_scale(l), signal_variance(sigma_y), noise_variance(sigma_n) {
  check_finite(l, "length scale");
  check_finite(sigma_y, "signal variance");
  check_finite(sigma_n, "noise variance");
  if (!(l > 0.0) || !(sigma_y > 0.0) || !(sigma_n > 0.0)) {
    throw ValidationError("hyperparameters must be strictly positive");
  }
}

double se_kernel(const Vector& a, const Vector& b, const Hyperparams& h,
                 bool same_index) {
  if (a.size() != b.size()) {
    throw ValidationError("se_kernel: feature dimensions do not match");
  }
  const double d2 = (a - b).squaredNorm();
  double k = h.signal_variance *
             std::exp(-d2 / (h.length_scale * h.length_scale));
  if (same_index) k += h.noise_variance;
  return k;
}

GpModel::GpModel(const Hyperparams& h) : hyper_(h) {}

GpModel::GpModel(std::vector<Vector> inputs, Vector targets,
                 const Hyperparams& h)
    : hyper_(h), inputs_(std::move(inputs)), targets_(std::move(targets)) {
  const int n = static_cast<int>(inputs_.size());
  if (n != targets_.size()) {
    throw ValidationError("GpModel: |inputs| != |targets|");
  }
  if (n == 0) return;  // prior-only model
  const Eigen::Index d = inputs_[0].size();
  for (const Vector& x : inputs_) {
    if (x.size() != d) {
      throw ValidationError("GpModel: inconsistent feature dimensions");
    }
    if (!x.allFinite()) throw ValidationError("GpModel: non-finite feature");
  }
  if (!targets_.allFinite()) {
    throw ValidationError("GpModel: non-finite target");
  }

  kernel_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double k = se_kernel(inputs_[i], inputs_[j], hyper_, i == j);
      kernel_(i, j) = k;
      kernel_(j, i) = k;
    }
  }

  llt_.compute(kernel_);
  if (llt_.info() != Eigen::Success) {
    double jitter =
        1e-10 * (hyper_.signal_variance + hyper_.noise_variance);
    bool ok = false;
    for (int attempt = 0; attempt < 3; ++attempt) {
      Matrix bumped = kernel_;
      bumped.diagonal().array() += jitter;
      llt_.compute(bumped);
      if (llt_.info() == Eigen::Success) {
        kernel_ = bumped;
        jitter_ = jitter;
        ok = true;
        break;
      }
      jitter *= 10.0;
    }
    if (!ok) {
      std::ostringstream msg;
      msg << "GpModel: Cholesky factorization failed; jitter fallback up to "
          << jitter / 10.0 << " did not restore positive definiteness";
      throw NumericalError(msg.str());
    }
  }
  alpha_ = llt_.solve(targets_);
}

Vector GpModel::cross_covariance(const Vector& x) const {
  const int n = size();
  Vector k(n);
  for (int i = 0; i < n; ++i) k(i) = se_kernel(x, inputs_[i], hyper_, false);
  return k;
}

Posterior GpModel::posterior(const Vector& x) const {
  const double prior_var = hyper_.signal_variance + hyper_.noise_variance;
  if (empty()) return {0.0, prior_var};
  if (x.size() != inputs_[0].size()) {
    throw ValidationError("posterior: query dimension does not match model");
  }
  const Vector k = cross_covariance(x);
  const Vector w = llt_.matrixL().solve(k);
  return {k.dot(alpha_), prior_var - w.squaredNorm()};
}

Vector GpModel::solve(const Vector& b) const {
  if (empty()) throw ValidationError("solve: empty model");
  return llt_.solve(b);
}

Vector GpModel::inverse_diagonal() const {
  if (empty()) throw ValidationError("inverse_diagonal: empty model");
  const int n = size();
  const Matrix inv = llt_.solve(Matrix::Identity(n, n));
  return inv.diagonal();
}

GpModel fit(std::vector<Vector> inputs, Vector targets, const Hyperparams& h) {
  return GpModel(std::move(inputs), std::move(targets), h);
}

LooPosteriors loo_posteriors(const GpModel& m) {
  if (m.size() < 2) {
    throw ValidationError("hold-one-out requires at least two samples");
  }
  const Vector d = m.inverse_diagonal();
  const Vector& alpha = m.alpha();
  const Vector& y = m.targets();
  LooPosteriors out;
  out.mean = y - (alpha.array() / d.array()).matrix();
  out.variance = d.cwiseInverse();
  return out;
}

double loo_log_likelihood(const GpModel& m) {
  const LooPosteriors p = loo_posteriors(m);
  const Vector& y = m.targets();
  double total = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const double r = y(i) - p.mean(i);
    total -= r * r / p.variance(i);
  }
  return total;
}

double loo_log_density(const GpModel& m) {
  const LooPosteriors p = loo_posteriors(m);
  const Vector& y = m.targets();
  double total = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const double r = y(i) - p.mean(i);
    total += -0.5 * std::log(2.0 * std::numbers::pi * p.variance(i)) -
             0.5 * r * r / p.variance(i);
  }
  return total;
}

double kernel_potential(const GpModel& m, const Vector& at,
                        int position_index) {
  if (m.empty()) return 0.0;
  const int d = m.dim();
  if (at.size() != d) {
    throw ValidationError("kernel_potential: query dimension mismatch");
  }
  if (position_index < 0 || position_index >= d) {
    throw ValidationError("kernel_potential: position index out of range");
  }
  const Hyperparams& h = m.hyperparams();
  const double l = h.length_scale;
  const double scale = h.signal_variance * l * kHalfSqrtPi;
  double total = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const Vector& xi = m.inputs()[i];
    double d2_other = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == position_index) continue;
      const double dj = at(j) - xi(j);
      d2_other += dj * dj;
    }
    const double g = std::exp(-d2_other / (l * l));
    total += m.alpha()(i) * scale * g *
             std::erf((at(position_index) - xi(position_index)) / l);
  }
  return total;
}

double kernel_potential(const GpModel& m, double theta) {
  if (m.empty()) return 0.0;
  if (m.dim() != 1) {
    throw ValidationError(
        "kernel_potential: model must be trained on 1-D position features");
  }
  Vector at(1);
  at(0) = theta;
  return kernel_potential(m, at, 0);
}

double kernel_potential_bound(const GpModel& m, const Vector& at,
                              int position_index) {
  if (m.empty()) return 0.0;
  const int d = m.dim();
  if (at.size() != d) {
    throw ValidationError("kernel_potential_bound: query dimension mismatch");
  }
  if (position_index < 0 || position_index >= d) {
    throw ValidationError("kernel_potential_bound: position index out of range");
  }
  const Hyperparams& h = m.hyperparams();
  const double l = h.length_scale;
  const double scale = h.signal_variance * l * kHalfSqrtPi;
  double total = 0.0;
  for (int i = 0; i < m.size(); ++i) {
    const Vector& xi = m.inputs()[i];
    double d2_other = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == position_index) continue;
      const double dj = at(j) - xi(j);
      d2_other += dj * dj;
    }
    total += std::abs(m.alpha()(i)) * scale * std::exp(-d2_other / (l * l));
  }
  return total;
}

double kernel_potential_bound(const GpModel& m) {
  if (m.empty()) return 0.0;
  if (m.dim() != 1) {
    throw ValidationError(
        "kernel_potential_bound: model must be trained on 1-D features");
  }
  Vector at = Vector::Zero(1);
  return kernel_potential_bound(m, at, 0);
}

}  // namespace gpdyn
