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

// Command line front end: simulate / identify / classify / compensate /
// evaluate / version. Exit codes: 0 success, 2 validation error, 3 numerical
// failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpdyn/compensation.hpp"
#include "gpdyn/dataset.hpp"
#include "gpdyn/evaluation.hpp"
#include "gpdyn/io.hpp"
#include "gpdyn/mixture.hpp"
#include "gpdyn/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gpdyn;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

std::string ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw ValidationError("--out directory is required");
  fs::create_directories(dir);
  return dir;
}

void write_summary(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

bool parse_on_off(const std::string& v, const char* flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ValidationError(std::string(flag) + " must be 'on' or 'off'");
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& config_path, const CommonArgs& common) {
  Scenario sc = config_path.empty() ? default_identification_scenario()
                                    : read_scenario(config_path);
  if (common.seed) sc.seed = *common.seed;
  const std::string dir = ensure_out_dir(common.out_dir);
  const std::string hash = scenario_hash(sc);

  Dataset data = run_exploration(sc);
  data.provenance = "simulator:" + hash;
  write_dataset(data, dir + "/dataset.csv");
  write_scenario(sc, dir + "/scenario.json");

  int perturbed = 0;
  for (const Sample& s : data.samples) {
    if (s.truth && s.truth->mode != 0) ++perturbed;
  }
  std::cout << "wrote " << data.size() << " samples (" << perturbed
            << " perturbed) to " << dir << "/dataset.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// identify

int cmd_identify(const std::string& data_path, const CommonArgs& common,
                 int modes, double pi, int iters, const std::string& sgn,
                 const std::string& disturbance, int anchor) {
  const Dataset raw = read_dataset(data_path);
  Dataset data = raw;
  const bool want_sgn = parse_on_off(sgn, "--sgn-feature");
  data.layout =
      want_sgn ? FeatureLayout::kThreeStateSgn : FeatureLayout::kThreeState;

  MixtureOptions opts;
  opts.disturbance_mode = parse_on_off(disturbance, "--disturbance");
  if (modes < 1 || (opts.disturbance_mode && modes < 2)) {
    throw ValidationError("--modes must be >= 1 (>= 2 with a disturbance mode)");
  }
  opts.nominal_modes = opts.disturbance_mode ? modes - 1 : modes;
  opts.anchor_mode = anchor;
  opts.stay_probability = pi;
  opts.iterations = iters;
  opts.validate();

  const std::uint64_t seed = common.seed.value_or(0);
  const SemResult result = run_sem(data, opts, seed);

  json cfg{{"data", data_path},       {"modes", modes},
           {"pi", pi},                 {"iters", iters},
           {"sgn_feature", want_sgn},  {"disturbance", opts.disturbance_mode},
           {"anchor", anchor},         {"seed", seed}};

  ModelBundle bundle;
  bundle.config_hash = hash_hex(cfg.dump());
  bundle.seed = seed;
  bundle.layout = data.layout;
  bundle.state = result.state;
  bundle.log_likelihood_trace = result.log_likelihood_trace;

  const std::string dir = ensure_out_dir(common.out_dir);
  write_bundle(bundle, dir + "/bundle.json");

  {
    CsvWriter labels(dir + "/labels.csv");
    labels.comment("config_hash " + bundle.config_hash);
    labels.row({"index", "mode"});
    for (int i = 0; i < data.size(); ++i) {
      labels.row({cell(static_cast<long>(data.samples[i].index)),
                  cell(result.state.labels[i])});
    }
  }
  {
    CsvWriter trace(dir + "/trace.csv");
    trace.comment("config_hash " + bundle.config_hash);
    trace.row({"iteration", "sample_log_likelihood"});
    for (std::size_t i = 0; i < result.log_likelihood_trace.size(); ++i) {
      trace.row({cell(static_cast<long>(i + 1)),
                 cell(result.log_likelihood_trace[i])});
    }
  }

  std::cout << "identified " << result.state.total_modes() << " modes over "
            << data.size() << " samples; bundle at " << dir << "/bundle.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// shared loading helpers

struct LoadedModel {
  ModelBundle bundle;
  Dataset data;
};

LoadedModel load_model(const std::string& bundle_path,
                       const std::string& data_path) {
  LoadedModel m{read_bundle(bundle_path), read_dataset(data_path)};
  m.data.layout = m.bundle.layout;
  if (static_cast<int>(m.bundle.state.labels.size()) != m.data.size()) {
    throw ValidationError(
        "bundle labels do not match the dataset (wrong dataset?)");
  }
  return m;
}

CompensationPolicy policy_from(const LoadedModel& m, int mode,
                               const ImpedanceParams& imp) {
  const MixtureState& st = m.bundle.state;
  if (mode < 0 || mode >= st.nominal_modes) {
    throw ValidationError("policy mode out of range");
  }
  return CompensationPolicy::from_mode(m.data, st.labels, mode, st.theta[mode],
                                       st.scaling, imp);
}

// ---------------------------------------------------------------------------
// classify

int cmd_classify(const std::string& bundle_path, const std::string& data_path,
                 const CommonArgs& common) {
  const LoadedModel m = load_model(bundle_path, data_path);
  const Matrix posterior = classify(m.bundle.state, m.data);
  const std::string dir = ensure_out_dir(common.out_dir);

  CsvWriter out(dir + "/classification.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  std::vector<std::string> header{"index"};
  for (int k = 0; k < m.bundle.state.total_modes(); ++k) {
    header.push_back("p_mode" + std::to_string(k));
  }
  header.push_back("label");
  out.row(header);
  for (int i = 0; i < m.data.size(); ++i) {
    std::vector<std::string> cells{
        cell(static_cast<long>(m.data.samples[i].index))};
    int argmax = 0;
    for (int k = 0; k < posterior.cols(); ++k) {
      cells.push_back(cell(posterior(i, k)));
      if (posterior(i, k) > posterior(i, argmax)) argmax = k;
    }
    cells.push_back(cell(argmax));
    out.row(cells);
  }
  std::cout << "wrote " << dir << "/classification.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compensate

int cmd_compensate(const std::string& bundle_path, const std::string& data_path,
                   const std::string& config_path, const CommonArgs& common,
                   double kimp, double bimp, double target, double duration,
                   int mode) {
  const LoadedModel m = load_model(bundle_path, data_path);
  Scenario sc = config_path.empty() ? default_identification_scenario()
                                    : read_scenario(config_path);
  if (common.seed) sc.seed = *common.seed;

  ImpedanceParams imp;
  imp.stiffness = kimp;
  imp.damping = bimp;
  imp.target = target;
  const CompensationPolicy policy = policy_from(m, mode, imp);

  Rng rng(sc.seed);
  PerturbationSampler sampler(sc.perturbation, sc.sim_dt, rng);
  ExternalTorque ext = [&](double t, const SimState&) {
    return sampler.value(t);
  };
  SimState init;
  init.theta = target;
  const int decim = std::max(1, static_cast<int>(std::lround(
                                    1.0 / (sc.sample_rate * sc.sim_dt))));
  const ClosedLoopLog log = run_closed_loop(sc.actuator, policy, ext, duration,
                                            sc.sim_dt, init, decim);

  const double s0 = policy.available_storage(init.theta, init.dtheta,
                                             sc.actuator);
  const EnergyLedger ledger =
      energy_audit(log.time, log.tau_ext, log.dtheta, s0);

  const std::string dir = ensure_out_dir(common.out_dir);
  CsvWriter out(dir + "/run.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  out.row({"time", "theta", "dtheta", "tau_policy", "tau_ext", "power",
           "energy"});
  for (std::size_t i = 0; i < log.time.size(); ++i) {
    out.row({cell(log.time[i]), cell(log.theta[i]), cell(log.dtheta[i]),
             cell(log.tau_policy[i]), cell(log.tau_ext[i]),
             cell(ledger.power[i]), cell(ledger.energy[i])});
  }
  write_summary(dir + "/summary.json",
                json{{"config_hash", m.bundle.config_hash},
                     {"initial_storage", ledger.initial_storage},
                     {"min_margin", ledger.min_margin},
                     {"violation", ledger.violation}});
  std::cout << "closed-loop run written to " << dir << "/run.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

int evaluate_classification(const LoadedModel& m, const std::string& dir) {
  if (!m.data.has_truth()) {
    throw ValidationError("classification evaluation needs truth annotations");
  }
  const Matrix posterior = classify(m.bundle.state, m.data);
  std::vector<int> predicted(m.data.size());
  for (int i = 0; i < m.data.size(); ++i) {
    int argmax = 0;
    for (int k = 0; k < posterior.cols(); ++k) {
      if (posterior(i, k) > posterior(i, argmax)) argmax = k;
    }
    predicted[i] = argmax;
  }
  const ConfusionCounts counts =
      score_classification(predicted, m.data.truth_modes());

  CsvWriter out(dir + "/classification_report.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  out.row({"true_mode", "pred_mode", "count"});
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    for (std::size_t j = 0; j < counts.counts[i].size(); ++j) {
      out.row({cell(static_cast<int>(i)), cell(static_cast<int>(j)),
               cell(counts.counts[i][j])});
    }
  }
  json summary{{"config_hash", m.bundle.config_hash},
               {"accuracy", counts.accuracy()},
               {"total", counts.total}};
  for (std::size_t i = 0; i < counts.counts.size(); ++i) {
    summary["recall_mode" + std::to_string(i)] =
        counts.recall(static_cast<int>(i));
  }
  write_summary(dir + "/summary.json", summary);
  std::cout << "accuracy " << counts.accuracy() << "; report in " << dir
            << "\n";
  return 0;
}

int evaluate_zero_impedance(const LoadedModel& m, const Scenario& sc,
                            const std::string& dir, double drag_velocity,
                            int mode) {
  ImpedanceParams imp;  // zero impedance
  const CompensationPolicy policy = policy_from(m, mode, imp);
  const ZeroImpedanceResult r =
      zero_impedance_test(policy, sc.actuator, drag_velocity);

  CsvWriter out(dir + "/zero_impedance.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  out.row({"time", "theta", "variant", "port_torque"});
  for (std::size_t i = 0; i < r.time.size(); ++i) {
    out.row({cell(r.time[i]), cell(r.theta[i]), "uncompensated",
             cell(r.port_uncompensated[i])});
    out.row({cell(r.time[i]), cell(r.theta[i]), "compensated",
             cell(r.port_compensated[i])});
  }
  write_summary(dir + "/summary.json",
                json{{"config_hash", m.bundle.config_hash},
                     {"rms_uncompensated", r.rms_uncompensated},
                     {"rms_compensated", r.rms_compensated},
                     {"ratio", r.rms_compensated / r.rms_uncompensated},
                     {"peak_uncompensated", r.peak_uncompensated},
                     {"peak_compensated", r.peak_compensated}});
  std::cout << "zero-impedance RMS " << r.rms_compensated << " vs "
            << r.rms_uncompensated << " (uncompensated)\n";
  return 0;
}

int evaluate_stiffness(const LoadedModel& m, const Scenario& sc,
                       const std::string& dir, double kimp, double target,
                       int mode) {
  ImpedanceParams imp;
  imp.stiffness = kimp;
  imp.target = target;
  const CompensationPolicy policy = policy_from(m, mode, imp);
  const double amplitude =
      kimp * 0.4 + sc.actuator.gravity_torque + sc.actuator.breakaway(target);
  const StiffnessResult r =
      stiffness_rendering_test(policy, sc.actuator, amplitude);

  CsvWriter out(dir + "/stiffness.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  out.row({"tau_ext", "deflection_uncompensated", "deflection_compensated"});
  for (std::size_t i = 0; i < r.torque.size(); ++i) {
    out.row({cell(r.torque[i]), cell(r.deflection_uncompensated[i]),
             cell(r.deflection_compensated[i])});
  }
  write_summary(
      dir + "/summary.json",
      json{{"config_hash", m.bundle.config_hash},
           {"max_deviation_uncompensated", r.max_deviation_uncompensated},
           {"max_deviation_compensated", r.max_deviation_compensated},
           {"hysteresis_uncompensated", r.hysteresis_uncompensated},
           {"hysteresis_compensated", r.hysteresis_compensated}});
  std::cout << "stiffness deviation " << r.max_deviation_compensated << " vs "
            << r.max_deviation_uncompensated << " (uncompensated)\n";
  return 0;
}

int evaluate_passivity(const LoadedModel& m, const Scenario& sc,
                       const std::string& dir, double duration, double kimp,
                       int mode) {
  ImpedanceParams imp;
  imp.stiffness = kimp;
  const CompensationPolicy policy = policy_from(m, mode, imp);
  const double magnitude = 5.0 * sc.actuator.breakaway(0.0);
  const PerturbationProfile impulses =
      impulse_train(magnitude, 0.05, 2.0, duration);
  const PassivityResult r =
      passivity_impulse_test(policy, sc.actuator, impulses, duration);

  CsvWriter out(dir + "/passivity.csv");
  out.comment("config_hash " + m.bundle.config_hash);
  out.row({"time", "power", "energy"});
  for (std::size_t i = 0; i < r.ledger.time.size(); ++i) {
    out.row({cell(r.ledger.time[i]), cell(r.ledger.power[i]),
             cell(r.ledger.energy[i])});
  }
  write_summary(dir + "/summary.json",
                json{{"config_hash", m.bundle.config_hash},
                     {"initial_storage", r.ledger.initial_storage},
                     {"min_margin", r.ledger.min_margin},
                     {"verdict", r.passed ? "pass" : "fail"}});
  std::cout << "passivity verdict: " << (r.passed ? "pass" : "fail")
            << " (S0 = " << r.ledger.initial_storage
            << " J, min margin = " << r.ledger.min_margin << " J)\n";
  return 0;
}

int evaluate_equilibrium(const std::string& dir, double error_amplitude,
                         double target, double kmin, double kmax, int points) {
  if (points < 2 || !(kmax > kmin) || !(kmin > 0.0)) {
    throw ValidationError("bad stiffness sweep");
  }
  std::vector<double> sweep;
  for (int i = 0; i < points; ++i) {
    sweep.push_back(kmin * std::pow(kmax / kmin,
                                    static_cast<double>(i) / (points - 1)));
  }
  auto gravity_error = [error_amplitude](double theta) {
    return error_amplitude * std::sin(theta);
  };
  const std::vector<EquilibriumRow> rows =
      equilibrium_error_report(gravity_error, sweep, target);

  CsvWriter out(dir + "/equilibrium.csv");
  out.row({"stiffness", "deflection", "converged", "iterations"});
  for (const EquilibriumRow& r : rows) {
    out.row({cell(r.stiffness), cell(r.deflection), cell(r.converged ? 1 : 0),
             cell(r.iterations)});
  }
  write_summary(dir + "/summary.json",
                json{{"error_amplitude", error_amplitude},
                     {"target", target},
                     {"rows", rows.size()}});
  std::cout << "equilibrium table with " << rows.size() << " rows in " << dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal GP inverse dynamics identification and passive "
               "feedforward compensation"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string config_path, data_path, bundle_path;

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a dataset");
  simulate->add_option("--config", config_path, "scenario JSON");
  simulate->add_option("--out", common.out_dir, "output directory")->required();
  std::uint64_t seed_value = 0;
  bool seed_set = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          seed_value = v;
          seed_set = true;
        },
        "seed override");
  };
  add_seed(simulate);

  // identify
  auto* identify = app.add_subcommand("identify", "run SEM identification");
  int modes = 2, iters = 40, anchor = 0;
  double pi = 0.95;
  std::string sgn_feature = "on", disturbance = "on";
  identify->add_option("--data", data_path, "dataset CSV")->required();
  identify->add_option("--out", common.out_dir, "output directory")->required();
  identify->add_option("--modes", modes, "total mode count");
  identify->add_option("--pi", pi, "stay probability");
  identify->add_option("--iters", iters, "SEM iterations");
  identify->add_option("--sgn-feature", sgn_feature, "on|off");
  identify->add_option("--disturbance", disturbance, "on|off");
  identify->add_option("--anchor", anchor, "nominal mode the disturbance tracks");
  add_seed(identify);

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "label a dataset");
  classify_cmd->add_option("--bundle", bundle_path, "model bundle")->required();
  classify_cmd->add_option("--data", data_path, "dataset CSV")->required();
  classify_cmd->add_option("--out", common.out_dir, "output directory")
      ->required();

  // compensate
  auto* compensate = app.add_subcommand("compensate", "closed-loop run");
  double kimp = 0.0, bimp = 0.0, target = 0.0, duration = 20.0;
  int policy_mode = 0;
  compensate->add_option("--bundle", bundle_path, "model bundle")->required();
  compensate->add_option("--data", data_path, "dataset CSV")->required();
  compensate->add_option("--config", config_path, "scenario JSON");
  compensate->add_option("--out", common.out_dir, "output directory")
      ->required();
  compensate->add_option("--kimp", kimp, "impedance stiffness");
  compensate->add_option("--bimp", bimp, "impedance damping");
  compensate->add_option("--target", target, "impedance target");
  compensate->add_option("--duration", duration, "run length (s)");
  compensate->add_option("--mode", policy_mode, "nominal mode for the policy");
  add_seed(compensate);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "reproduction scenarios");
  std::string which;
  double drag_velocity = 0.1, eval_kimp = 3.5, eval_target = 0.0;
  double eval_duration = 60.0, error_amplitude = 0.2;
  double kmin = 0.1, kmax = 10.0;
  int points = 9;
  evaluate
      ->add_option("--which", which,
                   "classification|zero-imp|stiffness|passivity|equilibrium")
      ->required();
  evaluate->add_option("--bundle", bundle_path, "model bundle");
  evaluate->add_option("--data", data_path, "dataset CSV");
  evaluate->add_option("--config", config_path, "scenario JSON for the plant");
  evaluate->add_option("--out", common.out_dir, "output directory")->required();
  evaluate->add_option("--drag-velocity", drag_velocity, "rad/s");
  evaluate->add_option("--kimp", eval_kimp, "impedance stiffness");
  evaluate->add_option("--target", eval_target, "impedance target");
  evaluate->add_option("--duration", eval_duration, "passivity run length (s)");
  evaluate->add_option("--error-amplitude", error_amplitude,
                       "gravity model error amplitude");
  evaluate->add_option("--kmin", kmin, "stiffness sweep start");
  evaluate->add_option("--kmax", kmax, "stiffness sweep end");
  evaluate->add_option("--points", points, "stiffness sweep points");
  evaluate->add_option("--mode", policy_mode, "nominal mode for the policy");

  // version
  auto* version = app.add_subcommand("version", "print version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (seed_set) common.seed = seed_value;

  try {
    if (version->parsed()) {
      std::cout << "gpdyn " << kVersion << "\n";
      return 0;
    }
    if (simulate->parsed()) return cmd_simulate(config_path, common);
    if (identify->parsed()) {
      return cmd_identify(data_path, common, modes, pi, iters, sgn_feature,
                          disturbance, anchor);
    }
    if (classify_cmd->parsed()) {
      return cmd_classify(bundle_path, data_path, common);
    }
    if (compensate->parsed()) {
      return cmd_compensate(bundle_path, data_path, config_path, common, kimp,
                            bimp, target, duration, policy_mode);
    }
    if (evaluate->parsed()) {
      const std::string dir = ensure_out_dir(common.out_dir);
      Scenario sc = config_path.empty() ? default_identification_scenario()
                                        : read_scenario(config_path);
      if (which == "equilibrium") {
        return evaluate_equilibrium(dir, error_amplitude, eval_target, kmin,
                                    kmax, points);
      }
      if (bundle_path.empty() || data_path.empty()) {
        throw ValidationError("--bundle and --data are required for " + which);
      }
      const LoadedModel m = load_model(bundle_path, data_path);
      if (which == "classification") return evaluate_classification(m, dir);
      if (which == "zero-imp") {
        return evaluate_zero_impedance(m, sc, dir, drag_velocity, policy_mode);
      }
      if (which == "stiffness") {
        return evaluate_stiffness(m, sc, dir, eval_kimp, eval_target,
                                  policy_mode);
      }
      if (which == "passivity") {
        return evaluate_passivity(m, sc, dir, eval_duration, eval_kimp,
                                  policy_mode);
      }
      throw ValidationError("unknown evaluation: " + which);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
