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
#include <optional>
#include <string>
#include <vector>

#include "gpdyn/gp.hpp"

namespace gpdyn {

// Feature vectors are ordered [ddtheta, dtheta, theta] with an optional
// trailing sgn(dtheta) coordinate.
enum class FeatureLayout { kThreeState, kThreeStateSgn };

constexpr int kPositionIndex = 2;
constexpr int kSgnIndex = 3;

int feature_dim(FeatureLayout layout);
std::string layout_name(FeatureLayout layout);
FeatureLayout layout_from_name(const std::string& name);

// Ground-truth annotation, present only on simulator-generated data.
struct TruthInfo {
  int mode = 0;
  double external_torque = 0.0;
};

struct Sample {
  std::int64_t index = 0;
  double theta = 0.0;     // rad
  double dtheta = 0.0;    // rad/s
  double ddtheta = 0.0;   // rad/s^2
  double sgn = 0.0;       // sign of dtheta, in {-1, 0, +1}
  double tau = 0.0;       // N m
  std::optional<TruthInfo> truth;
};

struct Dataset {
  FeatureLayout layout = FeatureLayout::kThreeState;
  double sample_rate = 20.0;  // Hz
  std::string provenance = "external";
  std::vector<Sample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  bool has_truth() const;

  Vector feature(int i) const;
  std::vector<Vector> features() const;
  Vector targets() const;
  std::vector<int> truth_modes() const;  // requires truth on every sample

  // Strictly increasing indices, finite values, truth all-or-none.
  void validate() const;
};

// Appends `tail` to `head`, re-indexing so sample indices stay strictly
// increasing. Layouts and sample rates must match.
void append(Dataset& head, const Dataset& tail);

void set_truth_mode(Dataset& d, int mode);

// Per-coordinate affine standardization fitted on a whole dataset and applied
// before every kernel evaluation. The sgn coordinate is left untouched.
struct FeatureScaling {
  Vector mean;
  Vector stddev;

  static FeatureScaling identity(int dim);
  static FeatureScaling fit(const Dataset& d);

  int dim() const { return static_cast<int>(mean.size()); }
  Vector apply(const Vector& x) const;
  std::vector<Vector> apply(const std::vector<Vector>& xs) const;
};

}  // namespace gpdyn
