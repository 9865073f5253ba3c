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

#include "gpdyn/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gpdyn {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ValidationError("cannot parse number: '" + s + "'");
  }
  return v;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(const std::string& s) {
  std::ostringstream out;
  out << std::hex << fnv1a64(s);
  return out.str();
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open for reading: " + path);
  return in;
}

}  // namespace

void write_dataset(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out = open_out(path);
  const bool truth = d.has_truth();
  out << "# gpdyn-dataset v1\n";
  out << "# sample_rate " << format_double(d.sample_rate) << "\n";
  out << "# layout " << layout_name(d.layout) << "\n";
  out << "# provenance " << d.provenance << "\n";
  out << "index,theta,dtheta,ddtheta,sgn_dtheta,tau";
  if (truth) out << ",truth_mode,external_torque";
  out << "\n";
  for (const Sample& s : d.samples) {
    out << s.index << ',' << format_double(s.theta) << ','
        << format_double(s.dtheta) << ',' << format_double(s.ddtheta) << ','
        << format_double(s.sgn) << ',' << format_double(s.tau);
    if (truth) {
      out << ',' << s.truth->mode << ','
          << format_double(s.truth->external_torque);
    }
    out << "\n";
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  Dataset d;
  std::string line;
  bool saw_magic = false;
  bool saw_columns = false;
  bool truth = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      if (key == "gpdyn-dataset") {
        std::string version;
        meta >> version;
        if (version != "v1") {
          throw ValidationError("unsupported dataset schema: " + version);
        }
        saw_magic = true;
      } else if (key == "sample_rate") {
        std::string v;
        meta >> v;
        d.sample_rate = parse_double(v);
      } else if (key == "layout") {
        std::string v;
        meta >> v;
        d.layout = layout_from_name(v);
      } else if (key == "provenance") {
        std::string v;
        meta >> v;
        d.provenance = v;
      }
      continue;
    }
    if (!saw_columns) {
      if (!saw_magic) throw ValidationError("missing dataset header: " + path);
      if (line == "index,theta,dtheta,ddtheta,sgn_dtheta,tau") {
        truth = false;
      } else if (line ==
                 "index,theta,dtheta,ddtheta,sgn_dtheta,tau,truth_mode,"
                 "external_torque") {
        truth = true;
      } else {
        throw ValidationError("unexpected dataset columns: " + line);
      }
      saw_columns = true;
      continue;
    }
    const std::vector<std::string> cells = split(line, ',');
    const std::size_t expect = truth ? 8 : 6;
    if (cells.size() != expect) {
      throw ValidationError("wrong column count in dataset row: " + line);
    }
    Sample s;
    s.index = std::stoll(cells[0]);
    s.theta = parse_double(cells[1]);
    s.dtheta = parse_double(cells[2]);
    s.ddtheta = parse_double(cells[3]);
    s.sgn = parse_double(cells[4]);
    s.tau = parse_double(cells[5]);
    if (truth) {
      TruthInfo info;
      info.mode = std::stoi(cells[6]);
      info.external_torque = parse_double(cells[7]);
      s.truth = info;
    }
    d.samples.push_back(s);
  }
  if (!saw_columns) throw ValidationError("dataset has no rows: " + path);
  d.validate();
  return d;
}

namespace {

json actuator_to_json(const ActuatorConfig& a) {
  return json{{"inertia", a.inertia},
              {"viscous", a.viscous},
              {"coulomb", a.coulomb},
              {"stribeck_torque", a.stribeck_torque},
              {"stribeck_velocity", a.stribeck_velocity},
              {"gravity_torque", a.gravity_torque},
              {"coulomb_pos_gain", a.coulomb_pos_gain},
              {"coulomb_pos_freq", a.coulomb_pos_freq},
              {"coulomb_pos_phase", a.coulomb_pos_phase}};
}

ActuatorConfig actuator_from_json(const json& j) {
  ActuatorConfig a;
  a.inertia = j.at("inertia").get<double>();
  a.viscous = j.at("viscous").get<double>();
  a.coulomb = j.at("coulomb").get<double>();
  a.stribeck_torque = j.at("stribeck_torque").get<double>();
  a.stribeck_velocity = j.at("stribeck_velocity").get<double>();
  a.gravity_torque = j.at("gravity_torque").get<double>();
  a.coulomb_pos_gain = j.value("coulomb_pos_gain", 0.0);
  a.coulomb_pos_freq = j.value("coulomb_pos_freq", 2.0);
  a.coulomb_pos_phase = j.value("coulomb_pos_phase", 0.0);
  return a;
}

std::string segment_kind_name(PerturbationSegment::Kind k) {
  switch (k) {
    case PerturbationSegment::Kind::kConstant:
      return "constant";
    case PerturbationSegment::Kind::kNoise:
      return "noise";
    case PerturbationSegment::Kind::kImpulse:
      return "impulse";
  }
  return "constant";
}

PerturbationSegment::Kind segment_kind(const std::string& name) {
  if (name == "constant") return PerturbationSegment::Kind::kConstant;
  if (name == "noise") return PerturbationSegment::Kind::kNoise;
  if (name == "impulse") return PerturbationSegment::Kind::kImpulse;
  throw ValidationError("unknown perturbation kind: " + name);
}

json scenario_to_json(const Scenario& sc) {
  json perturbations = json::array();
  for (const PerturbationSegment& seg : sc.perturbation.segments()) {
    perturbations.push_back(json{{"kind", segment_kind_name(seg.kind)},
                                 {"start", seg.start},
                                 {"end", seg.end},
                                 {"magnitude", seg.magnitude},
                                 {"sigma", seg.sigma},
                                 {"bandwidth", seg.bandwidth},
                                 {"width", seg.width}});
  }
  return json{
      {"schema", 1},
      {"actuator", actuator_to_json(sc.actuator)},
      {"pd", json{{"kp", sc.pd.kp}, {"kd", sc.pd.kd}}},
      {"plan", json{{"waypoints", sc.plan.waypoints},
                    {"ref_speed", sc.plan.ref_speed},
                    {"dwell", sc.plan.dwell},
                    {"duration", sc.plan.duration},
                    {"range_min", sc.plan.range_min},
                    {"range_max", sc.plan.range_max}}},
      {"sensors", json{{"position_noise", sc.sensors.position_noise},
                       {"torque_noise", sc.sensors.torque_noise},
                       {"lowpass_hz", sc.sensors.lowpass_hz},
                       {"sgn_deadband", sc.sensors.sgn_deadband}}},
      {"perturbations", perturbations},
      {"layout", layout_name(sc.layout)},
      {"sample_rate", sc.sample_rate},
      {"sim_dt", sc.sim_dt},
      {"velocity_limit", sc.velocity_limit},
      {"perturb_threshold", sc.perturb_threshold},
      {"seed", sc.seed}};
}

Scenario scenario_from_json(const json& j) {
  if (j.value("schema", 0) != 1) {
    throw ValidationError("unsupported scenario schema");
  }
  Scenario sc;
  sc.actuator = actuator_from_json(j.at("actuator"));
  sc.pd.kp = j.at("pd").at("kp").get<double>();
  sc.pd.kd = j.at("pd").at("kd").get<double>();
  const json& plan = j.at("plan");
  sc.plan.waypoints = plan.at("waypoints").get<std::vector<double>>();
  sc.plan.ref_speed = plan.at("ref_speed").get<double>();
  sc.plan.dwell = plan.at("dwell").get<double>();
  sc.plan.duration = plan.value("duration", -1.0);
  sc.plan.range_min = plan.value("range_min", -1.6);
  sc.plan.range_max = plan.value("range_max", 1.6);
  const json& sensors = j.at("sensors");
  sc.sensors.position_noise = sensors.at("position_noise").get<double>();
  sc.sensors.torque_noise = sensors.at("torque_noise").get<double>();
  sc.sensors.lowpass_hz = sensors.value("lowpass_hz", 4.0);
  sc.sensors.sgn_deadband = sensors.value("sgn_deadband", 0.01);
  std::vector<PerturbationSegment> segs;
  for (const json& seg : j.value("perturbations", json::array())) {
    PerturbationSegment p;
    p.kind = segment_kind(seg.at("kind").get<std::string>());
    p.start = seg.at("start").get<double>();
    p.end = seg.at("end").get<double>();
    p.magnitude = seg.value("magnitude", 0.0);
    p.sigma = seg.value("sigma", 0.0);
    p.bandwidth = seg.value("bandwidth", 1.0);
    p.width = seg.value("width", 0.05);
    segs.push_back(p);
  }
  sc.perturbation = PerturbationProfile(std::move(segs));
  sc.layout = layout_from_name(j.value("layout", std::string("sgn")));
  sc.sample_rate = j.value("sample_rate", 20.0);
  sc.sim_dt = j.value("sim_dt", 1e-4);
  sc.velocity_limit = j.value("velocity_limit", 50.0);
  sc.perturb_threshold = j.value("perturb_threshold", 0.02);
  sc.seed = j.value("seed", std::uint64_t{0});
  return sc;
}

}  // namespace

Scenario read_scenario(const std::string& path) {
  std::ifstream in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("invalid scenario JSON: " + std::string(e.what()));
  }
  try {
    return scenario_from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError("invalid scenario: " + std::string(e.what()));
  }
}

void write_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out = open_out(path);
  out << scenario_to_json(sc).dump(2) << "\n";
}

std::string scenario_hash(const Scenario& sc) {
  return hash_hex(scenario_to_json(sc).dump());
}

void write_bundle(const ModelBundle& b, const std::string& path) {
  json modes = json::array();
  for (const Hyperparams& h : b.state.theta) {
    modes.push_back(json{{"length_scale", h.length_scale},
                         {"signal_variance", h.signal_variance},
                         {"noise_variance", h.noise_variance}});
  }
  json j{{"schema", b.schema},
         {"config_hash", b.config_hash},
         {"seed", b.seed},
         {"layout", layout_name(b.layout)},
         {"nominal_modes", b.state.nominal_modes},
         {"disturbance_mode", b.state.disturbance_mode},
         {"anchor_mode", b.state.anchor_mode},
         {"stay_probability", b.state.stay_probability},
         {"modes", modes},
         {"labels", b.state.labels},
         {"iteration", b.state.iteration},
         {"log_likelihood_trace", b.log_likelihood_trace},
         {"scaling",
          json{{"mean", std::vector<double>(b.state.scaling.mean.begin(),
                                            b.state.scaling.mean.end())},
               {"stddev", std::vector<double>(b.state.scaling.stddev.begin(),
                                              b.state.scaling.stddev.end())}}}};
  if (b.state.disturbance_mode) j["sigma_d"] = b.state.sigma_d;
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

ModelBundle read_bundle(const std::string& path) {
  std::ifstream in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("invalid bundle JSON: " + std::string(e.what()));
  }
  try {
    ModelBundle b;
    b.schema = j.at("schema").get<int>();
    if (b.schema != 1) throw ValidationError("unsupported bundle schema");
    b.config_hash = j.value("config_hash", std::string());
    b.seed = j.value("seed", std::uint64_t{0});
    b.layout = layout_from_name(j.at("layout").get<std::string>());
    b.state.nominal_modes = j.at("nominal_modes").get<int>();
    b.state.disturbance_mode = j.at("disturbance_mode").get<bool>();
    b.state.anchor_mode = j.at("anchor_mode").get<int>();
    b.state.stay_probability = j.at("stay_probability").get<double>();
    for (const json& m : j.at("modes")) {
      b.state.theta.emplace_back(m.at("length_scale").get<double>(),
                                 m.at("signal_variance").get<double>(),
                                 m.at("noise_variance").get<double>());
    }
    b.state.sigma_d =
        b.state.disturbance_mode ? j.at("sigma_d").get<double>() : 0.0;
    b.state.labels = j.at("labels").get<std::vector<int>>();
    b.state.iteration = j.value("iteration", 0);
    b.log_likelihood_trace =
        j.value("log_likelihood_trace", std::vector<double>{});
    const auto mean = j.at("scaling").at("mean").get<std::vector<double>>();
    const auto stddev =
        j.at("scaling").at("stddev").get<std::vector<double>>();
    b.state.scaling.mean =
        Eigen::Map<const Vector>(mean.data(), static_cast<int>(mean.size()));
    b.state.scaling.stddev = Eigen::Map<const Vector>(
        stddev.data(), static_cast<int>(stddev.size()));
    b.state.validate();
    return b;
  } catch (const json::exception& e) {
    throw ValidationError("invalid bundle: " + std::string(e.what()));
  }
}

struct CsvWriter::Impl {
  std::ofstream out;
};

CsvWriter::CsvWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw ValidationError("cannot open for writing: " + path);
  }
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::comment(const std::string& text) {
  impl_->out << "# " << text << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << cells[i];
  }
  impl_->out << "\n";
}

std::string cell(double v) { return format_double(v); }
std::string cell(long v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }

}  // namespace gpdyn
