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

#include <cstdint>
#include <vector>

#include "gpdyn/dataset.hpp"
#include "gpdyn/rng.hpp"

namespace gpdyn {

// 1-DOF rigid actuator with gravity load and Coulomb/viscous/Stribeck
// friction. The Coulomb level is modulated by a position-dependent factor
// gamma(theta) = max(0, 1 + gain * sin(freq * theta + phase)).
struct ActuatorConfig {
  double inertia = 0.73;            // kg m^2
  double viscous = 0.05;            // N m s/rad
  double coulomb = 0.12;            // N m
  double stribeck_torque = 0.18;    // N m, excess over the Coulomb level
  double stribeck_velocity = 0.05;  // rad/s
  double gravity_torque = 1.0;      // N m, amplitude of m g r sin(theta)
  double coulomb_pos_gain = 0.0;
  double coulomb_pos_freq = 2.0;
  double coulomb_pos_phase = 0.0;

  double coulomb_modulation(double theta) const;
  double gravity(double theta) const;            // m g r sin(theta)
  double gravity_potential(double theta) const;  // m g r (1 - cos(theta)), >= 0
  double breakaway(double theta) const;          // gamma * tau_c + tau_s

  void validate() const;
};

struct SimState {
  double theta = 0.0;   // rad
  double dtheta = 0.0;  // rad/s
  double time = 0.0;    // s
};

// Kinetic friction for dtheta != 0. At rest the returned torque opposes the
// net applied torque, clamped at the breakaway level.
double friction_torque(double dtheta, double theta, const ActuatorConfig& cfg,
                       double applied = 0.0);

// Semi-implicit Euler step with stick-slip handling: at rest a net torque
// below breakaway produces no motion, and a velocity zero crossing within a
// step snaps to exact rest.
SimState step(const SimState& s, double tau_cmd, double tau_ext, double dt,
              const ActuatorConfig& cfg);

// External torque schedule segments. Segments must not overlap.
struct PerturbationSegment {
  enum class Kind { kConstant, kNoise, kImpulse };
  Kind kind = Kind::kConstant;
  double start = 0.0;      // s
  double end = 0.0;        // s
  double magnitude = 0.0;  // N m (constant level or impulse peak)
  double sigma = 0.0;      // N m, stationary std of filtered noise
  double bandwidth = 1.0;  // Hz, noise bandwidth
  double width = 0.05;     // s, half-sine impulse width
};

class PerturbationProfile {
 public:
  PerturbationProfile() = default;
  explicit PerturbationProfile(std::vector<PerturbationSegment> segments);

  static PerturbationProfile none() { return PerturbationProfile(); }

  const std::vector<PerturbationSegment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }

 private:
  std::vector<PerturbationSegment> segments_;
};

// Walks a profile forward in time, integrating the filtered-noise state.
// value() must be called with non-decreasing timestamps spaced by dt.
class PerturbationSampler {
 public:
  PerturbationSampler(const PerturbationProfile& profile, double dt, Rng& rng);
  double value(double t);

 private:
  const PerturbationProfile& profile_;
  double dt_;
  Rng& rng_;
  std::size_t cursor_ = 0;
  double noise_state_ = 0.0;
};

struct PdGains {
  double kp = 400.0;
  double kd = 40.0;
};

// Quasi-static range-of-motion exploration: the reference steps through the
// waypoints at constant speed with a dwell at each arrival.
struct ExplorationPlan {
  std::vector<double> waypoints;
  double ref_speed = 0.45;  // rad/s
  double dwell = 0.25;      // s at each waypoint
  double duration = -1.0;   // s; < 0 means "until the last waypoint settles"
  double range_min = -1.6;
  double range_max = 1.6;
};

struct SensorModel {
  double position_noise = 1e-5;  // rad, std
  double torque_noise = 0.12;    // N m, std
  double lowpass_hz = 4.0;       // zero-phase filter cutoff at the log rate
  double sgn_deadband = 0.01;    // rad/s
};

struct Scenario {
  ActuatorConfig actuator;
  PdGains pd;
  ExplorationPlan plan;
  SensorModel sensors;
  PerturbationProfile perturbation;
  FeatureLayout layout = FeatureLayout::kThreeStateSgn;
  double sample_rate = 20.0;        // Hz
  double sim_dt = 1e-4;             // s
  double velocity_limit = 50.0;     // rad/s, PD instability guard
  double perturb_threshold = 0.02;  // N m, ground-truth labeling level
  std::uint64_t seed = 0;
};

// Simulates the exploration and returns the downsampled, annotated dataset.
// Velocity and acceleration are reconstructed from the logged positions by
// zero-phase low-pass filtering and central differences, as a real rig would.
Dataset run_exploration(const Scenario& scenario);

// Adds a point mass at the given radius: inertia grows by m r^2 and the
// gravity amplitude by m g r.
ActuatorConfig attach_payload(const ActuatorConfig& cfg, double mass,
                              double radius);

// Second-order Butterworth low-pass applied forward and backward.
std::vector<double> zero_phase_lowpass(const std::vector<double>& x,
                                       double cutoff_hz, double rate_hz);

// Built-in scenarios.
Scenario default_identification_scenario();  // perturbed exploration, 327 rows
Scenario clean_training_scenario();          // unperturbed, for compensation
Scenario payload_scenario(double extra_mass, double radius);

}  // namespace gpdyn
