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

#include "gpdyn/dataset.hpp"

#include <cmath>

namespace gpdyn {

int feature_dim(FeatureLayout layout) {
  return layout == FeatureLayout::kThreeStateSgn ? 4 : 3;
}

std::string layout_name(FeatureLayout layout) {
  return layout == FeatureLayout::kThreeStateSgn ? "sgn" : "basic";
}

FeatureLayout layout_from_name(const std::string& name) {
  if (name == "sgn") return FeatureLayout::kThreeStateSgn;
  if (name == "basic") return FeatureLayout::kThreeState;
  throw ValidationError("unknown feature layout: " + name);
}

bool Dataset::has_truth() const {
  return !samples.empty() && samples.front().truth.has_value();
}

Vector Dataset::feature(int i) const {
  const Sample& s = samples.at(i);
  Vector x(feature_dim(layout));
  x(0) = s.ddtheta;
  x(1) = s.dtheta;
  x(kPositionIndex) = s.theta;
  if (layout == FeatureLayout::kThreeStateSgn) x(kSgnIndex) = s.sgn;
  return x;
}

std::vector<Vector> Dataset::features() const {
  std::vector<Vector> xs;
  xs.reserve(samples.size());
  for (int i = 0; i < size(); ++i) xs.push_back(feature(i));
  return xs;
}

Vector Dataset::targets() const {
  Vector y(size());
  for (int i = 0; i < size(); ++i) y(i) = samples[i].tau;
  return y;
}

std::vector<int> Dataset::truth_modes() const {
  std::vector<int> modes;
  modes.reserve(samples.size());
  for (const Sample& s : samples) {
    if (!s.truth) throw ValidationError("dataset has no truth annotations");
    modes.push_back(s.truth->mode);
  }
  return modes;
}

void Dataset::validate() const {
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be > 0");
  const bool truth = has_truth();
  std::int64_t prev = -1;
  bool first = true;
  for (const Sample& s : samples) {
    if (!first && s.index <= prev) {
      throw ValidationError("sample indices must be strictly increasing");
    }
    first = false;
    prev = s.index;
    for (double v : {s.theta, s.dtheta, s.ddtheta, s.sgn, s.tau}) {
      if (!std::isfinite(v)) throw ValidationError("non-finite sample value");
    }
    if (s.truth.has_value() != truth) {
      throw ValidationError("truth annotations must be all-or-none");
    }
    if (s.truth && !std::isfinite(s.truth->external_torque)) {
      throw ValidationError("non-finite external torque annotation");
    }
  }
}

void append(Dataset& head, const Dataset& tail) {
  if (head.layout != tail.layout) {
    throw ValidationError("append: feature layouts differ");
  }
  if (head.sample_rate != tail.sample_rate) {
    throw ValidationError("append: sample rates differ");
  }
  std::int64_t base = head.samples.empty() ? 0 : head.samples.back().index + 1;
  for (Sample s : tail.samples) {
    s.index += base;
    head.samples.push_back(std::move(s));
  }
  head.validate();
}

void set_truth_mode(Dataset& d, int mode) {
  for (Sample& s : d.samples) {
    if (!s.truth) s.truth = TruthInfo{};
    s.truth->mode = mode;
  }
}

FeatureScaling FeatureScaling::identity(int dim) {
  FeatureScaling s;
  s.mean = Vector::Zero(dim);
  s.stddev = Vector::Ones(dim);
  return s;
}

FeatureScaling FeatureScaling::fit(const Dataset& d) {
  const int dim = feature_dim(d.layout);
  FeatureScaling s = identity(dim);
  if (d.samples.empty()) return s;
  const int n = d.size();
  for (int j = 0; j < dim; ++j) {
    if (d.layout == FeatureLayout::kThreeStateSgn && j == kSgnIndex) continue;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += d.feature(i)(j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dv = d.feature(i)(j) - mean;
      var += dv * dv;
    }
    var /= n;
    s.mean(j) = mean;
    s.stddev(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Vector FeatureScaling::apply(const Vector& x) const {
  if (x.size() != mean.size()) {
    throw ValidationError("feature scaling dimension mismatch");
  }
  return ((x - mean).array() / stddev.array()).matrix();
}

std::vector<Vector> FeatureScaling::apply(const std::vector<Vector>& xs) const {
  std::vector<Vector> out;
  out.reserve(xs.size());
  for (const Vector& x : xs) out.push_back(apply(x));
  return out;
}

}  // namespace gpdyn
