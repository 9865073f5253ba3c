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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "gpdyn/dataset.hpp"
#include "gpdyn/io.hpp"
#include "gpdyn/rng.hpp"
#include "gpdyn/simulator.hpp"

using namespace gpdyn;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("gpdyn_test_" + name)).string();
}

Dataset random_dataset(Rng& rng, int n, bool truth, FeatureLayout layout) {
  Dataset d;
  d.layout = layout;
  d.provenance = "external";
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.index = i;
    s.theta = rng.normal();
    s.dtheta = rng.normal();
    s.ddtheta = rng.normal();
    s.sgn = static_cast<double>(rng.index(3) - 1);
    s.tau = rng.normal();
    if (truth) {
      TruthInfo info;
      info.mode = rng.index(2);
      info.external_torque = rng.normal();
      s.truth = info;
    }
    d.samples.push_back(s);
  }
  return d;
}

bool identical(const Dataset& a, const Dataset& b) {
  if (a.layout != b.layout || a.sample_rate != b.sample_rate ||
      a.provenance != b.provenance || a.size() != b.size()) {
    return false;
  }
  for (int i = 0; i < a.size(); ++i) {
    const Sample& x = a.samples[i];
    const Sample& y = b.samples[i];
    if (x.index != y.index || x.theta != y.theta || x.dtheta != y.dtheta ||
        x.ddtheta != y.ddtheta || x.sgn != y.sgn || x.tau != y.tau) {
      return false;
    }
    if (x.truth.has_value() != y.truth.has_value()) return false;
    if (x.truth && (x.truth->mode != y.truth->mode ||
                    x.truth->external_torque != y.truth->external_torque)) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-30.0, 30.0));
    if (i % 7 == 0) v = -v;
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double(format_double(0.0)) == 0.0);
  CHECK_THROWS_AS(parse_double("not-a-number"), ValidationError);
  CHECK_THROWS_AS(parse_double("1.0x"), ValidationError);
}

TEST_CASE("dataset CSV round trip is bit-exact") {
  Rng rng(2);
  for (bool truth : {false, true}) {
    for (FeatureLayout layout :
         {FeatureLayout::kThreeState, FeatureLayout::kThreeStateSgn}) {
      Dataset d = random_dataset(rng, 60, truth, layout);
      const std::string path = temp_path("roundtrip.csv");
      write_dataset(d, path);
      const Dataset back = read_dataset(path);
      CHECK(identical(d, back));
      std::remove(path.c_str());
    }
  }
}

TEST_CASE("dataset validation") {
  Rng rng(3);
  Dataset d = random_dataset(rng, 5, true, FeatureLayout::kThreeStateSgn);

  SUBCASE("strictly increasing indices enforced") {
    d.samples[3].index = d.samples[2].index;
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("non-finite values rejected") {
    d.samples[1].tau = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
  SUBCASE("truth must be all-or-none") {
    d.samples[4].truth.reset();
    CHECK_THROWS_AS(d.validate(), ValidationError);
  }
}

TEST_CASE("dataset read rejects malformed files") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "index,theta\n0,1\n";
  }
  CHECK_THROWS_AS(read_dataset(path), ValidationError);
  {
    std::ofstream out(path);
    out << "# gpdyn-dataset v99\n";
    out << "index,theta,dtheta,ddtheta,sgn_dtheta,tau\n";
  }
  CHECK_THROWS_AS(read_dataset(path), ValidationError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_dataset(path), ValidationError);  // missing file
}

TEST_CASE("feature extraction honors the layout") {
  Rng rng(4);
  Dataset d = random_dataset(rng, 3, false, FeatureLayout::kThreeState);
  CHECK(d.feature(0).size() == 3);
  CHECK(d.feature(1)(kPositionIndex) == d.samples[1].theta);
  d.layout = FeatureLayout::kThreeStateSgn;
  CHECK(d.feature(0).size() == 4);
  CHECK(d.feature(2)(kSgnIndex) == d.samples[2].sgn);
}

TEST_CASE("feature scaling standardizes all but the sgn coordinate") {
  Rng rng(5);
  Dataset d = random_dataset(rng, 400, false, FeatureLayout::kThreeStateSgn);
  for (Sample& s : d.samples) {
    s.theta = 3.0 + 2.0 * rng.normal();
    s.dtheta = -1.0 + 0.5 * rng.normal();
  }
  const FeatureScaling sc = FeatureScaling::fit(d);
  CHECK(sc.mean(kSgnIndex) == 0.0);
  CHECK(sc.stddev(kSgnIndex) == 1.0);

  // Standardized coordinates have zero mean and unit variance.
  Vector mean = Vector::Zero(4);
  Vector var = Vector::Zero(4);
  for (int i = 0; i < d.size(); ++i) mean += sc.apply(d.feature(i));
  mean /= d.size();
  for (int i = 0; i < d.size(); ++i) {
    const Vector z = sc.apply(d.feature(i)) - mean;
    var += z.cwiseProduct(z);
  }
  var /= d.size();
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(mean(j)) < 1e-12);
    CHECK(var(j) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("append re-indexes and set_truth_mode annotates") {
  Rng rng(6);
  Dataset a = random_dataset(rng, 5, true, FeatureLayout::kThreeStateSgn);
  Dataset b = random_dataset(rng, 4, true, FeatureLayout::kThreeStateSgn);
  set_truth_mode(a, 0);
  set_truth_mode(b, 1);
  append(a, b);
  CHECK(a.size() == 9);
  CHECK(a.samples[8].index > a.samples[4].index);
  CHECK(a.samples[8].truth->mode == 1);
  CHECK(a.samples[2].truth->mode == 0);
}

TEST_CASE("scenario JSON round trip preserves the hash") {
  Scenario sc = default_identification_scenario();
  sc.seed = 123;
  const std::string path = temp_path("scenario.json");
  write_scenario(sc, path);
  const Scenario back = read_scenario(path);
  CHECK(scenario_hash(back) == scenario_hash(sc));
  CHECK(back.plan.waypoints == sc.plan.waypoints);
  CHECK(back.perturbation.segments().size() ==
        sc.perturbation.segments().size());
  CHECK(back.seed == 123);
  std::remove(path.c_str());
}

TEST_CASE("bundle round trip") {
  ModelBundle b;
  b.config_hash = "deadbeef";
  b.seed = 7;
  b.layout = FeatureLayout::kThreeStateSgn;
  b.state.nominal_modes = 2;
  b.state.disturbance_mode = true;
  b.state.anchor_mode = 0;
  b.state.stay_probability = 0.9;
  b.state.theta.emplace_back(0.42, 0.05, 0.14);
  b.state.theta.emplace_back(1.3, 0.6, 0.01);
  b.state.sigma_d = 0.07;
  b.state.labels = {0, 0, 1, 2, 2, 0};
  b.state.iteration = 12;
  b.state.scaling = FeatureScaling::identity(4);
  b.state.scaling.mean << 0.5, -0.25, 0.125, 0.0;
  b.log_likelihood_trace = {-100.5, -90.25, -88.0};

  const std::string path = temp_path("bundle.json");
  write_bundle(b, path);
  const ModelBundle back = read_bundle(path);
  CHECK(back.config_hash == b.config_hash);
  CHECK(back.state.nominal_modes == 2);
  CHECK(back.state.disturbance_mode);
  CHECK(back.state.sigma_d == b.state.sigma_d);
  CHECK(back.state.labels == b.state.labels);
  CHECK(back.state.theta[0].length_scale == 0.42);
  CHECK(back.state.theta[1].noise_variance == 0.01);
  CHECK(back.state.scaling.mean(0) == 0.5);
  CHECK(back.log_likelihood_trace == b.log_likelihood_trace);
  std::remove(path.c_str());
}

TEST_CASE("bundle without disturbance mode omits sigma_d") {
  ModelBundle b;
  b.layout = FeatureLayout::kThreeState;
  b.state.nominal_modes = 1;
  b.state.disturbance_mode = false;
  b.state.theta.emplace_back(1.0, 1.0, 0.1);
  b.state.labels = {0, 0};
  b.state.scaling = FeatureScaling::identity(3);

  const std::string path = temp_path("bundle_k1.json");
  write_bundle(b, path);
  {
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("sigma_d") == std::string::npos);
  }
  const ModelBundle back = read_bundle(path);
  CHECK(back.state.sigma_d == 0.0);
  CHECK_FALSE(back.state.disturbance_mode);
  std::remove(path.c_str());
}

TEST_CASE("fnv hash is stable") {
  CHECK(hash_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64("a") != fnv1a64("b"));
}
