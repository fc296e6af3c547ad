// Copyright 2026 The qgroupoid developers
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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace qgroupoid {

/// One verified property: name, worst relative residual, the scale it was
/// measured against, and a witness description when it failed.
struct CheckResult {
  std::string name;
  double max_residual = 0.0;
  double scale = 1.0;
  bool pass = true;
  std::string witness;
};

struct Report {
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;
  double tolerance = 1e-9;

  bool summary_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void append(const Report& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
    for (const auto& n : other.notes)
      if (std::find(notes.begin(), notes.end(), n) == notes.end()) notes.push_back(n);
  }
};

// Accumulates max |difference| relative to max(1, |reference|), tracking the
// worst witness. Scales and residuals are gathered globally per check so a
// zero reference for one probe cannot inflate the report.
class ResidualGauge {
 public:
  explicit ResidualGauge(std::string name) : name_(std::move(name)) {}

  void observe(double diff_norm, double ref_norm, const std::string& witness) {
    if (diff_norm > worst_diff_) {
      worst_diff_ = diff_norm;
      worst_witness_ = witness;
    }
    ref_scale_ = std::max(ref_scale_, ref_norm);
  }

  CheckResult result(double tol) const {
    CheckResult r;
    r.name = name_;
    r.scale = std::max(1.0, ref_scale_);
    r.max_residual = worst_diff_ / r.scale;
    r.pass = std::isfinite(r.max_residual) && r.max_residual <= tol;
    r.witness = r.pass ? std::string() : worst_witness_;
    return r;
  }

 private:
  std::string name_;
  double worst_diff_ = 0.0;
  double ref_scale_ = 0.0;
  std::string worst_witness_;
};

}  // namespace qgroupoid
