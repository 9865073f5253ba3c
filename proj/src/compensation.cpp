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

#include "gpdyn/compensation.hpp"

#include <cmath>

namespace gpdyn {

void ImpedanceParams::validate() const {
  if (stiffness < 0.0 || damping < 0.0) {
    throw ValidationError("impedance stiffness and damping must be >= 0");
  }
  if (!std::isfinite(target)) throw ValidationError("non-finite target");
}

double impedance_torque(const ImpedanceParams& p, double theta,
                        double dtheta) {
  return -p.stiffness * (theta - p.target) - p.damping * dtheta;
}

CompensationPolicy::CompensationPolicy(GpModel model, FeatureScaling scaling,
                                       FeatureLayout layout,
                                       ImpedanceParams impedance)
    : model_(std::move(model)),
      scaling_(std::move(scaling)),
      layout_(layout),
      impedance_(impedance) {
  impedance_.validate();
  const int dim = feature_dim(layout_);
  if (!model_.empty() && model_.dim() != dim) {
    throw ValidationError("policy GP features do not match the layout");
  }
  if (scaling_.dim() != dim) {
    throw ValidationError("policy scaling does not match the layout");
  }
}

CompensationPolicy CompensationPolicy::from_mode(
    const Dataset& data, const std::vector<int>& labels, int mode,
    const Hyperparams& h, const FeatureScaling& scaling,
    const ImpedanceParams& impedance) {
  if (static_cast<int>(labels.size()) != data.size()) {
    throw ValidationError("label vector length does not match dataset");
  }
  std::vector<Vector> xs;
  std::vector<double> ys;
  for (int i = 0; i < data.size(); ++i) {
    if (labels[i] != mode) continue;
    xs.push_back(scaling.apply(data.feature(i)));
    ys.push_back(data.samples[i].tau);
  }
  Vector y(static_cast<int>(ys.size()));
  for (int i = 0; i < y.size(); ++i) y(i) = ys[i];
  return CompensationPolicy(GpModel(std::move(xs), std::move(y), h), scaling,
                            data.layout, impedance);
}

CompensationPolicy CompensationPolicy::without_feedforward() const {
  return CompensationPolicy(GpModel(model_.hyperparams()), scaling_, layout_,
                            impedance_);
}

Vector CompensationPolicy::eval_features(double theta) const {
  Vector raw = Vector::Zero(feature_dim(layout_));
  raw(kPositionIndex) = theta;
  return scaling_.apply(raw);
}

double CompensationPolicy::feedforward(double theta) const {
  if (model_.empty()) return 0.0;
  return model_.posterior(eval_features(theta)).mean;
}

double CompensationPolicy::torque(double theta, double dtheta) const {
  return feedforward(theta) + impedance_torque(impedance_, theta, dtheta);
}

double CompensationPolicy::potential(double theta) const {
  if (model_.empty()) return 0.0;
  return scaling_.stddev(kPositionIndex) *
         kernel_potential(model_, eval_features(theta), kPositionIndex);
}

double CompensationPolicy::potential_bound() const {
  if (model_.empty()) return 0.0;
  return scaling_.stddev(kPositionIndex) *
         kernel_potential_bound(model_, eval_features(0.0), kPositionIndex);
}

double CompensationPolicy::storage(double theta, double dtheta,
                                   const ActuatorConfig& cfg) const {
  const double spring = theta - impedance_.target;
  return 0.5 * cfg.inertia * dtheta * dtheta + cfg.gravity_potential(theta) +
         0.5 * impedance_.stiffness * spring * spring - potential(theta);
}

double CompensationPolicy::storage_lower_bound() const {
  return -potential_bound();
}

double CompensationPolicy::available_storage(double theta, double dtheta,
                                             const ActuatorConfig& cfg) const {
  return storage(theta, dtheta, cfg) - storage_lower_bound();
}

EnergyLedger energy_audit(const std::vector<double>& time,
                          const std::vector<double>& tau_port,
                          const std::vector<double>& dtheta,
                          double initial_storage, double tolerance) {
  const std::size_t n = time.size();
  if (tau_port.size() != n || dtheta.size() != n) {
    throw ValidationError("energy_audit: column lengths differ");
  }
  if (n == 0) throw ValidationError("energy_audit: empty log");
  if (n >= 2) {
    const double dt0 = time[1] - time[0];
    if (!(dt0 > 0.0)) throw ValidationError("energy_audit: non-increasing time");
    for (std::size_t i = 2; i < n; ++i) {
      const double dt = time[i] - time[i - 1];
      if (std::abs(dt - dt0) > 1e-9 * std::max(dt0, 1.0)) {
        throw ValidationError("energy_audit: timestamps are not uniform");
      }
    }
  }

  EnergyLedger ledger;
  ledger.initial_storage = initial_storage;
  ledger.tolerance = tolerance;
  ledger.time = time;
  ledger.power.resize(n);
  ledger.energy.resize(n);
  for (std::size_t i = 0; i < n; ++i) ledger.power[i] = tau_port[i] * dtheta[i];
  ledger.energy[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    ledger.energy[i] = ledger.energy[i - 1] +
                       0.5 * (ledger.power[i] + ledger.power[i - 1]) *
                           (time[i] - time[i - 1]);
  }
  ledger.min_margin = initial_storage;
  for (std::size_t i = 0; i < n; ++i) {
    ledger.min_margin = std::min(ledger.min_margin,
                                 initial_storage + ledger.energy[i]);
  }
  ledger.violation = ledger.min_margin < -tolerance;
  return ledger;
}

ClosedLoopLog run_closed_loop(const ActuatorConfig& cfg,
                              const CompensationPolicy& policy,
                              const ExternalTorque& external, double duration,
                              double dt, SimState init, int log_decimation) {
  if (!(duration > 0.0) || !(dt > 0.0) || log_decimation < 1) {
    throw ValidationError("run_closed_loop: bad duration, dt or decimation");
  }
  ClosedLoopLog log;
  log.dt = dt * log_decimation;
  SimState s = init;
  const long steps = std::lround(duration / dt);
  double dissipated = 0.0;
  const double damping = policy.impedance().damping;
  for (long k = 0; k <= steps; ++k) {
    const double tau_ext = external(s.time, s);
    const double tau_cmd = policy.torque(s.theta, s.dtheta);
    if (k % log_decimation == 0) {
      log.time.push_back(s.time);
      log.theta.push_back(s.theta);
      log.dtheta.push_back(s.dtheta);
      log.tau_policy.push_back(tau_cmd);
      log.tau_ext.push_back(tau_ext);
      log.dissipation.push_back(dissipated);
    }
    if (k == steps) break;
    const double v = s.dtheta;
    double rate = damping * v * v;
    if (v != 0.0) rate -= friction_torque(v, s.theta, cfg) * v;
    dissipated += rate * dt;
    s = step(s, tau_cmd, tau_ext, dt, cfg);
    if (!std::isfinite(s.theta) || !std::isfinite(s.dtheta)) {
      throw NumericalError("run_closed_loop: state diverged");
    }
  }
  return log;
}

}  // namespace gpdyn
