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

#include "gpdyn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpdyn {

double ConfusionCounts::recall(int mode) const {
  if (mode < 0 || mode >= static_cast<int>(counts.size())) return 0.0;
  long row = 0;
  for (long c : counts[mode]) row += c;
  return row > 0 ? static_cast<double>(counts[mode][mode]) / row : 0.0;
}

ConfusionCounts score_classification(const std::vector<int>& predicted,
                                     const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("score_classification: length mismatch");
  }
  if (predicted.empty()) throw ValidationError("score_classification: empty");
  int modes = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 0 || truth[i] < 0) {
      throw ValidationError("score_classification: negative label");
    }
    modes = std::max({modes, predicted[i] + 1, truth[i] + 1});
  }
  if (modes > 8) {
    throw ValidationError("score_classification: too many modes to align");
  }

  std::vector<int> perm(modes);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_agreement = -1;
  do {
    long agreement = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (perm[predicted[i]] == truth[i]) ++agreement;
    }
    if (agreement > best_agreement) {
      best_agreement = agreement;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ConfusionCounts out;
  out.permutation = best;
  out.total = static_cast<long>(truth.size());
  out.agreement = best_agreement;
  out.counts.assign(modes, std::vector<long>(modes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++out.counts[truth[i]][best[predicted[i]]];
  }
  return out;
}

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Torque the dragging agent must supply to impose the motion (theta, v, a):
//   M a = tau_ctrl + tau_agent - g + f  =>  tau_agent = M a + g - f - tau_ctrl
double agent_torque(const ActuatorConfig& cfg, const CompensationPolicy& p,
                    double theta, double v, double a, double impending) {
  double f;
  if (v != 0.0) {
    f = friction_torque(v, theta, cfg);
  } else {
    f = -sgn(impending) * cfg.breakaway(theta);
  }
  return cfg.inertia * a + cfg.gravity(theta) - f - p.torque(theta, v);
}

}  // namespace

ZeroImpedanceResult zero_impedance_test(const CompensationPolicy& policy,
                                        const ActuatorConfig& cfg,
                                        double drag_velocity, double range_lo,
                                        double range_hi) {
  if (!(drag_velocity > 0.0)) {
    throw ValidationError("drag velocity must be > 0");
  }
  if (!(range_hi > range_lo)) throw ValidationError("empty drag range");

  const CompensationPolicy bare = policy.without_feedforward();
  const double v = drag_velocity;
  const double ramp = 0.2;                 // s, velocity ramp at ends/reversal
  const double travel = range_hi - range_lo;
  const double t_const = travel / v - ramp;  // ramps cover v*ramp of travel
  if (t_const <= 0.0) throw ValidationError("drag range too short");
  const double dt = 1e-3;

  // Velocity profile: ramp up, constant +v, ramp to 0, reverse, back.
  const double t1 = ramp, t2 = t1 + t_const, t3 = t2 + ramp;
  const double t4 = t3 + ramp, t5 = t4 + t_const, t6 = t5 + ramp;
  auto vel = [&](double t) {
    if (t < t1) return v * t / ramp;
    if (t < t2) return v;
    if (t < t3) return v * (t3 - t) / ramp;
    if (t < t4) return -v * (t - t3) / ramp;
    if (t < t5) return -v;
    if (t < t6) return -v * (t6 - t) / ramp;
    return 0.0;
  };
  auto acc = [&](double t) {
    if (t < t1) return v / ramp;
    if (t < t2) return 0.0;
    if (t < t3) return -v / ramp;
    if (t < t4) return -v / ramp;
    if (t < t5) return 0.0;
    if (t < t6) return v / ramp;
    return 0.0;
  };

  ZeroImpedanceResult out;
  double theta = range_lo;
  double sum_unc = 0.0, sum_comp = 0.0;
  long n_const = 0;
  for (double t = 0.0; t <= t6 + 1e-12; t += dt) {
    const double w = vel(t);
    const double impending = t < t3 ? 1.0 : -1.0;
    const double unc = agent_torque(cfg, bare, theta, w, acc(t), impending);
    const double comp = agent_torque(cfg, policy, theta, w, acc(t), impending);
    out.time.push_back(t);
    out.theta.push_back(theta);
    out.port_uncompensated.push_back(unc);
    out.port_compensated.push_back(comp);
    const bool constant_phase = (t >= t1 && t < t2) || (t >= t4 && t < t5);
    if (constant_phase) {
      sum_unc += unc * unc;
      sum_comp += comp * comp;
      ++n_const;
    }
    const bool reversal_window = t >= t2 && t < t4 + 0.5;
    if (reversal_window) {
      out.peak_uncompensated = std::max(out.peak_uncompensated, std::abs(unc));
      out.peak_compensated = std::max(out.peak_compensated, std::abs(comp));
    }
    theta += w * dt;
  }
  out.rms_uncompensated = std::sqrt(sum_unc / n_const);
  out.rms_compensated = std::sqrt(sum_comp / n_const);
  return out;
}

namespace {

// Width of the loop between the rising and falling branches of a
// (torque, deflection) trace, measured in deflection at matched torques.
double hysteresis_width(const std::vector<double>& tau,
                        const std::vector<double>& defl) {
  std::vector<std::pair<double, double>> up, down;
  for (std::size_t i = 1; i < tau.size(); ++i) {
    const double dtau = tau[i] - tau[i - 1];
    if (dtau > 0.0) up.emplace_back(tau[i], defl[i]);
    if (dtau < 0.0) down.emplace_back(tau[i], defl[i]);
  }
  if (up.empty() || down.empty()) return 0.0;
  auto cmp = [](const std::pair<double, double>& a,
                const std::pair<double, double>& b) {
    return a.first < b.first;
  };
  std::sort(up.begin(), up.end(), cmp);
  std::sort(down.begin(), down.end(), cmp);
  auto interp = [&](const std::vector<std::pair<double, double>>& branch,
                    double q, bool* ok) {
    if (q < branch.front().first || q > branch.back().first) {
      *ok = false;
      return 0.0;
    }
    *ok = true;
    auto it = std::lower_bound(branch.begin(), branch.end(),
                               std::make_pair(q, 0.0), cmp);
    if (it == branch.begin()) return it->second;
    const auto lo = *(it - 1);
    const auto hi = *it;
    if (hi.first == lo.first) return lo.second;
    const double s = (q - lo.first) / (hi.first - lo.first);
    return lo.second + s * (hi.second - lo.second);
  };
  const double lo = std::max(up.front().first, down.front().first);
  const double hi = std::min(up.back().first, down.back().first);
  if (hi <= lo) return 0.0;
  double width = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double q = lo + (hi - lo) * i / 200.0;
    bool ok1 = false, ok2 = false;
    const double a = interp(up, q, &ok1);
    const double b = interp(down, q, &ok2);
    if (ok1 && ok2) width = std::max(width, std::abs(a - b));
  }
  return width;
}

}  // namespace

StiffnessResult stiffness_rendering_test(const CompensationPolicy& policy,
                                         const ActuatorConfig& cfg,
                                         double torque_amplitude,
                                         double ramp_rate) {
  const ImpedanceParams& imp = policy.impedance();
  if (!(imp.stiffness > 0.0)) {
    throw ValidationError("stiffness rendering requires K > 0");
  }
  if (!(torque_amplitude > 0.0) || !(ramp_rate > 0.0)) {
    throw ValidationError("bad torque amplitude or ramp rate");
  }

  // Triangle: 0 -> +A -> -A -> 0.
  const double a = torque_amplitude;
  const double t1 = a / ramp_rate, t2 = t1 + 2.0 * a / ramp_rate;
  const double t3 = t2 + a / ramp_rate;
  auto ramp = [&](double t) {
    if (t < t1) return ramp_rate * t;
    if (t < t2) return a - ramp_rate * (t - t1);
    return -a + ramp_rate * (t - t2);
  };

  auto run = [&](const CompensationPolicy& p, std::vector<double>* tau_out,
                 std::vector<double>* defl_out) {
    ExternalTorque ext = [&](double t, const SimState&) { return ramp(t); };
    SimState init;
    init.theta = imp.target;
    const ClosedLoopLog log =
        run_closed_loop(cfg, p, ext, t3, 1e-4, init, 500);
    double dev = 0.0;
    for (std::size_t i = 0; i < log.time.size(); ++i) {
      const double defl = log.theta[i] - imp.target;
      tau_out->push_back(log.tau_ext[i]);
      defl_out->push_back(defl);
      dev = std::max(dev, std::abs(log.tau_ext[i] - imp.stiffness * defl));
    }
    return dev;
  };

  StiffnessResult out;
  std::vector<double> tau_c, defl_c;
  out.max_deviation_compensated = run(policy, &tau_c, &defl_c);
  std::vector<double> tau_u, defl_u;
  out.max_deviation_uncompensated =
      run(policy.without_feedforward(), &tau_u, &defl_u);
  out.torque = tau_c;
  out.deflection_compensated = defl_c;
  out.deflection_uncompensated = defl_u;
  out.hysteresis_compensated = hysteresis_width(tau_c, defl_c);
  out.hysteresis_uncompensated = hysteresis_width(tau_u, defl_u);
  return out;
}

std::vector<EquilibriumRow> equilibrium_error_report(
    const std::function<double(double)>& gravity_error,
    const std::vector<double>& stiffness_values, double theta_des) {
  std::vector<EquilibriumRow> rows;
  for (double k : stiffness_values) {
    if (!(k > 0.0)) throw ValidationError("stiffness values must be > 0");
    EquilibriumRow row;
    row.stiffness = k;
    double d = 0.0;
    bool converged = false;
    int iter = 0;
    for (; iter < 1000; ++iter) {
      const double next = gravity_error(theta_des + d) / k;
      if (std::abs(next - d) <= 1e-14 * std::max(1.0, std::abs(next))) {
        d = next;
        converged = true;
        break;
      }
      d = next;
    }
    row.deflection = d;
    row.converged = converged;
    row.iterations = iter + 1;
    rows.push_back(row);
  }
  return rows;
}

PerturbationProfile impulse_train(double magnitude, double width,
                                  double period, double duration) {
  std::vector<PerturbationSegment> segs;
  double sign = 1.0;
  for (double t = period / 2.0; t + width < duration; t += period) {
    PerturbationSegment seg;
    seg.kind = PerturbationSegment::Kind::kImpulse;
    seg.start = t;
    seg.end = t + width;
    seg.width = width;
    seg.magnitude = sign * magnitude;
    segs.push_back(seg);
    sign = -sign;
  }
  return PerturbationProfile(std::move(segs));
}

PassivityResult passivity_impulse_test(const CompensationPolicy& policy,
                                       const ActuatorConfig& cfg,
                                       const PerturbationProfile& impulses,
                                       double duration, double env_damping,
                                       double viscous_injection, double dt,
                                       double tolerance) {
  if (!(duration > 0.0) || !(dt > 0.0)) {
    throw ValidationError("bad duration or dt");
  }
  Rng rng(0);
  PerturbationSampler sampler(impulses, dt, rng);

  SimState s;
  s.theta = policy.impedance().target;
  const double s0 = policy.available_storage(s.theta, s.dtheta, cfg);

  const int decim = 10;  // 1 kHz port log at the default dt
  std::vector<double> time, tau_port, vel;
  const long steps = std::lround(duration / dt);
  double energy = 0.0;  // running trapezoid of port power
  double prev_power = 0.0;
  bool diverged = false;
  for (long k = 0; k <= steps; ++k) {
    const double tau_ext = sampler.value(s.time) - env_damping * s.dtheta;
    const double tau_cmd =
        policy.torque(s.theta, s.dtheta) + viscous_injection * s.dtheta;
    const double power = tau_ext * s.dtheta;
    if (k > 0) energy += 0.5 * (power + prev_power) * dt;
    prev_power = power;
    if (k % decim == 0) {
      time.push_back(s.time);
      tau_port.push_back(tau_ext);
      vel.push_back(s.dtheta);
    }
    // A clear violation settles the verdict; stop before the active policy
    // drives the state out of floating-point range.
    if (-energy > s0 + 1000.0 * tolerance) {
      diverged = true;
      break;
    }
    if (k == steps) break;
    s = step(s, tau_cmd, tau_ext, dt, cfg);
  }

  PassivityResult out;
  out.ledger = energy_audit(time, tau_port, vel, s0, tolerance);
  if (diverged) {
    out.ledger.violation = true;
    out.ledger.min_margin = std::min(out.ledger.min_margin, s0 + energy);
  }
  out.passed = !out.ledger.violation;
  return out;
}

}  // namespace gpdyn
