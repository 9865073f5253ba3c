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

#include "gpdyn/compensation.hpp"
#include "gpdyn/dataset.hpp"
#include "gpdyn/simulator.hpp"

namespace gpdyn {

// Mixture labels are identifiable only up to permutation, so predictions are
// aligned to the truth by the maximum-agreement relabeling before counting.
struct ConfusionCounts {
  std::vector<std::vector<long>> counts;  // [true mode][aligned predicted]
  std::vector<int> permutation;           // applied to the predicted labels
  long total = 0;
  long agreement = 0;

  double accuracy() const {
    return total > 0 ? static_cast<double>(agreement) / total : 0.0;
  }
  // Fraction of true-mode-m samples predicted as mode m.
  double recall(int mode) const;
};

ConfusionCounts score_classification(const std::vector<int>& predicted,
                                     const std::vector<int>& truth);

// Constant-velocity drag through the range of motion by a kinematic agent,
// run once with the policy feedforward and once without it. The RMS covers
// only the constant-velocity portions; the peaks are taken around the
// direction reversal.
struct ZeroImpedanceResult {
  double rms_uncompensated = 0.0;
  double rms_compensated = 0.0;
  double peak_uncompensated = 0.0;
  double peak_compensated = 0.0;
  std::vector<double> time;
  std::vector<double> theta;
  std::vector<double> port_uncompensated;
  std::vector<double> port_compensated;
};

ZeroImpedanceResult zero_impedance_test(const CompensationPolicy& policy,
                                        const ActuatorConfig& cfg,
                                        double drag_velocity = 0.1,
                                        double range_lo = -1.2,
                                        double range_hi = 1.2);

// Quasi-static external torque triangle against the impedance spring.
// Reports the worst deviation from the ideal line tau = K * deflection and
// the width of the stiction hysteresis loop, for both policies.
struct StiffnessResult {
  double max_deviation_uncompensated = 0.0;
  double max_deviation_compensated = 0.0;
  double hysteresis_uncompensated = 0.0;  // rad
  double hysteresis_compensated = 0.0;    // rad
  std::vector<double> torque;       // applied external torque samples
  std::vector<double> deflection_uncompensated;
  std::vector<double> deflection_compensated;
};

StiffnessResult stiffness_rendering_test(const CompensationPolicy& policy,
                                         const ActuatorConfig& cfg,
                                         double torque_amplitude,
                                         double ramp_rate = 0.1);

// Equilibrium deflection under a gravity-model error, solved per stiffness by
// fixed-point iteration on K * deflection = g_err(target + deflection).
struct EquilibriumRow {
  double stiffness = 0.0;
  double deflection = 0.0;
  bool converged = true;
  int iterations = 0;
};

std::vector<EquilibriumRow> equilibrium_error_report(
    const std::function<double(double)>& gravity_error,
    const std::vector<double>& stiffness_values, double theta_des = 0.0);

// Impulse-train passivity audit: simulates the closed loop under the given
// impulse schedule (plus an optional passive environment damper), audits the
// port energy against the available storage, and returns the verdict.
// viscous_injection adds +gain*dtheta to the commanded torque; it exists so
// a deliberately active policy can be shown to trip the audit.
struct PassivityResult {
  EnergyLedger ledger;
  bool passed = false;
};

PassivityResult passivity_impulse_test(const CompensationPolicy& policy,
                                       const ActuatorConfig& cfg,
                                       const PerturbationProfile& impulses,
                                       double duration,
                                       double env_damping = 0.0,
                                       double viscous_injection = 0.0,
                                       double dt = 1e-4,
                                       double tolerance = 1e-3);

// Half-sine impulses of the given magnitude and width every `period` seconds,
// alternating sign.
PerturbationProfile impulse_train(double magnitude, double width,
                                  double period, double duration);

}  // namespace gpdyn
