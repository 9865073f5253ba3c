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
#include <string>
#include <vector>

#include "gpdyn/dataset.hpp"
#include "gpdyn/mixture.hpp"
#include "gpdyn/simulator.hpp"

namespace gpdyn {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);

std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(const std::string& s);

// Datasets are CSV with '#'-prefixed header metadata. Round trips are
// bit-exact.
void write_dataset(const Dataset& d, const std::string& path);
Dataset read_dataset(const std::string& path);

// Scenario configuration (JSON).
Scenario read_scenario(const std::string& path);
void write_scenario(const Scenario& sc, const std::string& path);
std::string scenario_hash(const Scenario& sc);

// Identified model bundle: labels, per-mode kernel parameters, disturbance
// variance, stay probability, likelihood trace and the feature scaling.
struct ModelBundle {
  int schema = 1;
  std::string config_hash;
  std::uint64_t seed = 0;
  FeatureLayout layout = FeatureLayout::kThreeStateSgn;
  MixtureState state;
  std::vector<double> log_likelihood_trace;
};

void write_bundle(const ModelBundle& b, const std::string& path);
ModelBundle read_bundle(const std::string& path);

// Minimal CSV report writer (used by the CLI for figures and tables).
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  void comment(const std::string& text);
  void row(const std::vector<std::string>& cells);

 private:
  struct Impl;
  Impl* impl_;
};

std::string cell(double v);
std::string cell(long v);
std::string cell(int v);

}  // namespace gpdyn
