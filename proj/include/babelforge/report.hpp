// Copyright 2026 The babelforge Authors.
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

#ifndef BABELFORGE_REPORT_HPP_
#define BABELFORGE_REPORT_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "babelforge/sweep.hpp"

namespace babelforge::xfer {

// Columns x,lang,group,mean_acc,stdev_acc,n_seeds; one row per point and language.
void write_curve_csv(std::ostream& out, const SweepCurve& curve);

// Line plot of hi_avg and lo_avg against x with +-1 stdev bands.
void write_curve_svg(std::ostream& out, const SweepCurve& curve);

// Writes <variable>_<fingerprint>.csv and .svg per curve into out_dir (created
// if missing) and returns the paths. Throws on an empty list or an unwritable
// directory.
std::vector<std::string> emit_report(const std::vector<SweepCurve>& curves, const std::string& out_dir);

// Inverse of write_curve_csv, enough to re-plot saved results.
SweepCurve read_curve_csv(std::istream& in, const std::string& variable, const std::string& fingerprint);

}  // namespace babelforge::xfer

#endif  // BABELFORGE_REPORT_HPP_
