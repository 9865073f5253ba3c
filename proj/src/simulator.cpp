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

#include "gpdyn/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gpdyn {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Reference trajectory: dwell at the first waypoint, then alternate
// constant-speed moves and dwells. Holds the final waypoint afterwards.
class RefTrajectory {
 public:
  RefTrajectory(const std::vector<double>& waypoints, double speed,
                double dwell) {
    if (waypoints.empty()) throw ValidationError("no waypoints");
    if (!(speed > 0.0)) throw ValidationError("reference speed must be > 0");
    if (dwell < 0.0) throw ValidationError("dwell must be >= 0");
    double t = 0.0;
    double pos = waypoints.front();
    push(t, t + dwell, pos, pos);
    t += dwell;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const double next = waypoints[i];
      const double travel = std::abs(next - pos) / speed;
      push(t, t + travel, pos, next);
      t += travel;
      push(t, t + dwell, next, next);
      t += dwell;
      pos = next;
    }
  }

  double duration() const { return segs_.empty() ? 0.0 : segs_.back().t1; }

  void at(double t, double* pos, double* vel) const {
    if (segs_.empty() || t >= segs_.back().t1) {
      *pos = segs_.empty() ? 0.0 : segs_.back().p1;
      *vel = 0.0;
      return;
    }
    // Linear walk with a persistent cursor would be faster; segment count is
    // tiny so a scan per call is fine at simulation rates.
    for (const Seg& s : segs_) {
      if (t < s.t1 || &s == &segs_.back()) {
        if (s.p0 == s.p1 || s.t1 == s.t0) {
          *pos = s.p1;
          *vel = 0.0;
        } else {
          const double v = (s.p1 - s.p0) / (s.t1 - s.t0);
          *pos = s.p0 + v * (t - s.t0);
          *vel = v;
        }
        return;
      }
    }
  }

 private:
  struct Seg {
    double t0, t1, p0, p1;
  };
  void push(double t0, double t1, double p0, double p1) {
    if (t1 > t0) segs_.push_back({t0, t1, p0, p1});
  }
  std::vector<Seg> segs_;
};

}  // namespace

double ActuatorConfig::coulomb_modulation(double theta) const {
  return std::max(
      0.0, 1.0 + coulomb_pos_gain *
                     std::sin(coulomb_pos_freq * theta + coulomb_pos_phase));
}

double ActuatorConfig::gravity(double theta) const {
  return gravity_torque * std::sin(theta);
}

double ActuatorConfig::gravity_potential(double theta) const {
  return gravity_torque * (1.0 - std::cos(theta));
}

double ActuatorConfig::breakaway(double theta) const {
  return coulomb_modulation(theta) * coulomb + stribeck_torque;
}

void ActuatorConfig::validate() const {
  if (!(inertia > 0.0)) throw ValidationError("inertia must be > 0");
  if (viscous < 0.0 || coulomb < 0.0 || stribeck_torque < 0.0 ||
      stribeck_velocity < 0.0) {
    throw ValidationError("friction parameters must be >= 0");
  }
}

double friction_torque(double dtheta, double theta, const ActuatorConfig& cfg,
                       double applied) {
  if (dtheta == 0.0) {
    const double bw = cfg.breakaway(theta);
    return -std::clamp(applied, -bw, bw);
  }
  double stribeck = 0.0;
  if (cfg.stribeck_velocity > 0.0) {
    const double r = dtheta / cfg.stribeck_velocity;
    stribeck = cfg.stribeck_torque * std::exp(-r * r);
  }
  const double dry = cfg.coulomb_modulation(theta) * cfg.coulomb + stribeck;
  return -sgn(dtheta) * dry - cfg.viscous * dtheta;
}

SimState step(const SimState& s, double tau_cmd, double tau_ext, double dt,
              const ActuatorConfig& cfg) {
  if (!(dt > 0.0)) throw ValidationError("step: dt must be > 0");
  if (!std::isfinite(s.theta) || !std::isfinite(s.dtheta) ||
      !std::isfinite(tau_cmd) || !std::isfinite(tau_ext)) {
    throw ValidationError("step: non-finite input");
  }

  SimState out = s;
  out.time = s.time + dt;

  const double net = tau_cmd + tau_ext - cfg.gravity(s.theta);
  if (s.dtheta == 0.0) {
    const double bw = cfg.breakaway(s.theta);
    if (std::abs(net) <= bw) return out;  // stuck
    // Breakaway: kinetic friction at vanishing speed opposes the motion.
    const double accel = (net - sgn(net) * bw) / cfg.inertia;
    out.dtheta = accel * dt;
    out.theta = s.theta + out.dtheta * dt;
    return out;
  }

  const double accel =
      (net + friction_torque(s.dtheta, s.theta, cfg)) / cfg.inertia;
  double v = s.dtheta + accel * dt;
  if (v * s.dtheta < 0.0) v = 0.0;  // zero crossing: come to rest this step
  out.dtheta = v;
  out.theta = s.theta + v * dt;
  return out;
}

PerturbationProfile::PerturbationProfile(
    std::vector<PerturbationSegment> segments)
    : segments_(std::move(segments)) {
  std::sort(segments_.begin(), segments_.end(),
            [](const PerturbationSegment& a, const PerturbationSegment& b) {
              return a.start < b.start;
            });
  double prev_end = -std::numeric_limits<double>::infinity();
  for (const PerturbationSegment& seg : segments_) {
    if (!(seg.end > seg.start)) {
      throw ValidationError("perturbation segment must have end > start");
    }
    if (seg.start < prev_end) {
      throw ValidationError("perturbation segments must not overlap");
    }
    for (double v : {seg.magnitude, seg.sigma, seg.bandwidth, seg.width}) {
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite perturbation parameter");
      }
    }
    prev_end = seg.end;
  }
}

PerturbationSampler::PerturbationSampler(const PerturbationProfile& profile,
                                         double dt, Rng& rng)
    : profile_(profile), dt_(dt), rng_(rng) {}

double PerturbationSampler::value(double t) {
  const auto& segs = profile_.segments();
  while (cursor_ < segs.size() && t >= segs[cursor_].end) {
    ++cursor_;
    noise_state_ = 0.0;
  }
  if (cursor_ >= segs.size()) return 0.0;
  const PerturbationSegment& seg = segs[cursor_];
  if (t < seg.start) return 0.0;
  switch (seg.kind) {
    case PerturbationSegment::Kind::kConstant:
      return seg.magnitude;
    case PerturbationSegment::Kind::kNoise: {
      const double a = std::exp(-2.0 * std::numbers::pi * seg.bandwidth * dt_);
      noise_state_ = a * noise_state_ +
                     seg.sigma * std::sqrt(1.0 - a * a) * rng_.normal();
      return noise_state_;
    }
    case PerturbationSegment::Kind::kImpulse: {
      const double u = t - seg.start;
      if (u < 0.0 || u > seg.width) return 0.0;
      return seg.magnitude * std::sin(std::numbers::pi * u / seg.width);
    }
  }
  return 0.0;
}

std::vector<double> zero_phase_lowpass(const std::vector<double>& x,
                                       double cutoff_hz, double rate_hz) {
  const int n = static_cast<int>(x.size());
  if (n < 4 || cutoff_hz <= 0.0 || cutoff_hz >= 0.5 * rate_hz) return x;

  // Second-order Butterworth biquad (bilinear transform).
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate_hz;
  const double alpha = std::sin(w0) / std::sqrt(2.0);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 - cw) / (2.0 * a0);
  const double b1 = (1.0 - cw) / a0;
  const double b2 = b0;
  const double a1 = -2.0 * cw / a0;
  const double a2 = (1.0 - alpha) / a0;

  const int pad = std::min(n - 1, static_cast<int>(3.0 * rate_hz / cutoff_hz));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (int i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (int i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto filt = [&](std::vector<double>& v) {
    double x1 = v[0], x2 = v[0], y1 = v[0], y2 = v[0];
    for (double& s : v) {
      const double xin = s;
      const double y = b0 * xin + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = xin;
      y2 = y1;
      y1 = y;
      s = y;
    }
  };
  filt(ext);
  std::reverse(ext.begin(), ext.end());
  filt(ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

Dataset run_exploration(const Scenario& scenario) {
  scenario.actuator.validate();
  const ExplorationPlan& plan = scenario.plan;
  if (plan.waypoints.empty()) {
    throw ValidationError("exploration plan has no waypoints");
  }
  for (double w : plan.waypoints) {
    if (w < plan.range_min || w > plan.range_max) {
      throw ValidationError("waypoint outside the configured range of motion");
    }
  }
  if (!(scenario.sim_dt > 0.0) || !(scenario.sample_rate > 0.0)) {
    throw ValidationError("sim_dt and sample_rate must be > 0");
  }

  RefTrajectory ref(plan.waypoints, plan.ref_speed, plan.dwell);
  const double duration =
      plan.duration > 0.0 ? plan.duration : ref.duration();
  const double dt = scenario.sim_dt;
  const long steps = std::lround(duration / dt);
  const long decim = std::lround(1.0 / (scenario.sample_rate * dt));
  if (decim < 1) throw ValidationError("sample rate exceeds simulation rate");

  Rng rng(scenario.seed);
  PerturbationSampler perturbation(scenario.perturbation, dt, rng);

  SimState state;
  state.theta = plan.waypoints.front();

  std::vector<double> log_t, log_theta, log_tau, log_ext;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double tau_ext = perturbation.value(t);
    double ref_pos = 0.0, ref_vel = 0.0;
    ref.at(t, &ref_pos, &ref_vel);
    const double tau_cmd = scenario.pd.kp * (ref_pos - state.theta) +
                           scenario.pd.kd * (ref_vel - state.dtheta);
    if (k % decim == 0) {
      log_t.push_back(t);
      log_theta.push_back(state.theta);
      log_tau.push_back(tau_cmd);
      log_ext.push_back(tau_ext);
    }
    state = step(state, tau_cmd, tau_ext, dt, scenario.actuator);
    if (std::abs(state.dtheta) > scenario.velocity_limit) {
      std::ostringstream msg;
      msg << "PD exploration unstable: |dtheta| = " << std::abs(state.dtheta)
          << " rad/s at t = " << state.time << " s (limit "
          << scenario.velocity_limit << ")";
      throw NumericalError(msg.str());
    }
  }

  const int n = static_cast<int>(log_t.size());
  std::vector<double> theta_meas(n), tau_meas(n);
  for (int i = 0; i < n; ++i) {
    theta_meas[i] = log_theta[i] + rng.normal(0.0, scenario.sensors.position_noise);
    tau_meas[i] = log_tau[i] + rng.normal(0.0, scenario.sensors.torque_noise);
  }

  const std::vector<double> theta_f = zero_phase_lowpass(
      theta_meas, scenario.sensors.lowpass_hz, scenario.sample_rate);

  auto differentiate = [&](const std::vector<double>& v) {
    std::vector<double> d(n, 0.0);
    if (n >= 2) {
      d[0] = (v[1] - v[0]) * scenario.sample_rate;
      d[n - 1] = (v[n - 1] - v[n - 2]) * scenario.sample_rate;
      for (int i = 1; i + 1 < n; ++i) {
        d[i] = (v[i + 1] - v[i - 1]) * scenario.sample_rate / 2.0;
      }
    }
    return d;
  };
  const std::vector<double> dtheta = differentiate(theta_f);
  const std::vector<double> ddtheta = differentiate(dtheta);

  Dataset data;
  data.layout = scenario.layout;
  data.sample_rate = scenario.sample_rate;
  data.provenance = "simulator";
  data.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.index = i;
    s.theta = theta_f[i];
    s.dtheta = dtheta[i];
    s.ddtheta = ddtheta[i];
    s.sgn = std::abs(dtheta[i]) < scenario.sensors.sgn_deadband
                ? 0.0
                : sgn(dtheta[i]);
    s.tau = tau_meas[i];
    TruthInfo truth;
    truth.external_torque = log_ext[i];
    truth.mode = std::abs(log_ext[i]) > scenario.perturb_threshold ? 1 : 0;
    s.truth = truth;
    data.samples.push_back(s);
  }
  data.validate();
  return data;
}

ActuatorConfig attach_payload(const ActuatorConfig& cfg, double mass,
                              double radius) {
  if (mass < 0.0) throw ValidationError("payload mass must be >= 0");
  constexpr double kGravity = 9.81;  // m/s^2
  ActuatorConfig out = cfg;
  out.inertia += mass * radius * radius;
  out.gravity_torque += mass * kGravity * radius;
  return out;
}

namespace {

// A constant push covering exactly `count` consecutive log instants starting
// at sample `first`, with the boundaries placed between instants.
PerturbationSegment push_samples(int first, int count, double magnitude,
                                 double rate = 20.0) {
  PerturbationSegment seg;
  seg.kind = PerturbationSegment::Kind::kConstant;
  seg.start = (first - 0.5) / rate;
  seg.end = (first + count - 0.5) / rate;
  seg.magnitude = magnitude;
  return seg;
}

std::vector<double> ladder(double lo, double hi, double step) {
  std::vector<double> w;
  for (double p = lo; p <= hi + 1e-9; p += step) w.push_back(p);
  for (double p = hi - step; p >= lo - 1e-9; p -= step) w.push_back(p);
  return w;
}

}  // namespace

Scenario default_identification_scenario() {
  Scenario sc;
  sc.actuator.coulomb_pos_gain = 0.25;
  sc.actuator.coulomb_pos_phase = 0.4;
  sc.plan.waypoints = ladder(-1.2, 1.2, 0.3);
  sc.plan.duration = 16.3;  // 327 samples at 20 Hz
  // 92 perturbed instants in total; the two sub-breakaway pushes are near or
  // below the stiction level and are genuinely hard to detect.
  sc.perturbation = PerturbationProfile({
      push_samples(35, 14, 0.55),
      push_samples(70, 12, -0.70),
      push_samples(103, 8, 0.45),
      push_samples(130, 6, -0.12),
      push_samples(155, 13, -0.85),
      push_samples(190, 11, 0.60),
      push_samples(215, 4, 0.10),
      push_samples(240, 12, -0.50),
      push_samples(280, 12, 0.75),
  });
  return sc;
}

Scenario clean_training_scenario() {
  Scenario sc;
  sc.actuator.coulomb_pos_gain = 0.25;
  sc.actuator.coulomb_pos_phase = 0.4;
  sc.plan.waypoints = ladder(-1.2, 1.2, 0.2);
  sc.plan.dwell = 0.3;
  return sc;
}

Scenario payload_scenario(double extra_mass, double radius) {
  Scenario sc;
  sc.actuator.coulomb_pos_gain = 0.25;
  sc.actuator.coulomb_pos_phase = 0.4;
  if (extra_mass > 0.0) {
    sc.actuator = attach_payload(sc.actuator, extra_mass, radius);
  }
  sc.plan.waypoints = ladder(0.3, 1.5, 0.3);
  sc.sensors.torque_noise = 0.05;
  return sc;
}

}  // namespace gpdyn
