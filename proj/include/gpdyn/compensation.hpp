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

#include <functional>
#include <vector>

#include "gpdyn/dataset.hpp"
#include "gpdyn/gp.hpp"
#include "gpdyn/simulator.hpp"

namespace gpdyn {

// Joint impedance law -K (theta - target) - B dtheta. The rendered inertia is
// deliberately absent: the desired impedance mass stays the physical one.
struct ImpedanceParams {
  double stiffness = 0.0;  // N m / rad
  double damping = 0.0;    // N m s / rad
  double target = 0.0;     // rad

  void validate() const;
};

double impedance_torque(const ImpedanceParams& p, double theta, double dtheta);

// Deployment policy tau = tau_ff(theta) + tau_imp(theta, dtheta). The
// feedforward is the GP mean evaluated with every dynamic coordinate zeroed
// (acceleration, velocity and the sgn feature), so it is a function of
// position alone and admits the bounded storage potential below. No viscous
// term is ever compensated.
class CompensationPolicy {
 public:
  CompensationPolicy(GpModel model, FeatureScaling scaling,
                     FeatureLayout layout, ImpedanceParams impedance);

  // Builds the policy GP from the samples carrying the given mode label.
  static CompensationPolicy from_mode(const Dataset& data,
                                      const std::vector<int>& labels, int mode,
                                      const Hyperparams& h,
                                      const FeatureScaling& scaling,
                                      const ImpedanceParams& impedance);

  // Same impedance, no feedforward.
  CompensationPolicy without_feedforward() const;

  double feedforward(double theta) const;
  double torque(double theta, double dtheta) const;

  // Antiderivative of the feedforward in theta (exact, via the erf kernel
  // integral), and a bound on its magnitude over all positions.
  double potential(double theta) const;
  double potential_bound() const;

  // S = 1/2 M dtheta^2 + V_g + 1/2 K (theta - target)^2 - potential(theta).
  // Bounded below by -potential_bound().
  double storage(double theta, double dtheta, const ActuatorConfig& cfg) const;
  double storage_lower_bound() const;
  double available_storage(double theta, double dtheta,
                           const ActuatorConfig& cfg) const;

  const GpModel& model() const { return model_; }
  const ImpedanceParams& impedance() const { return impedance_; }
  const FeatureScaling& scaling() const { return scaling_; }
  FeatureLayout layout() const { return layout_; }

 private:
  Vector eval_features(double theta) const;

  GpModel model_;
  FeatureScaling scaling_;
  FeatureLayout layout_;
  ImpedanceParams impedance_;
};

// Per-step power flow and cumulative energy through the interaction port
// (positive power flows into the actuator).
struct EnergyLedger {
  std::vector<double> time;
  std::vector<double> power;
  std::vector<double> energy;  // trapezoidal integral of power
  double initial_storage = 0.0;
  double tolerance = 1e-3;  // J
  double min_margin = 0.0;  // min over time of S0 + energy(t)
  bool violation = false;   // extracted energy exceeded S0 + tolerance
};

// Trapezoidal audit of a uniformly sampled port log.
EnergyLedger energy_audit(const std::vector<double>& time,
                          const std::vector<double>& tau_port,
                          const std::vector<double>& dtheta,
                          double initial_storage, double tolerance = 1e-3);

// External torque as a function of time and plant state (so test
// environments can include their own damping).
using ExternalTorque = std::function<double(double t, const SimState& s)>;

struct ClosedLoopLog {
  std::vector<double> time;
  std::vector<double> theta;
  std::vector<double> dtheta;
  std::vector<double> tau_policy;
  std::vector<double> tau_ext;
  std::vector<double> dissipation;  // cumulative friction + damping loss (J)
  double dt = 0.0;                  // spacing of the logged rows
};

ClosedLoopLog run_closed_loop(const ActuatorConfig& cfg,
                              const CompensationPolicy& policy,
                              const ExternalTorque& external, double duration,
                              double dt = 1e-4, SimState init = {},
                              int log_decimation = 1);

}  // namespace gpdyn
