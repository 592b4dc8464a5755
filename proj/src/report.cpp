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

#include "babelforge/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace babelforge::xfer {

namespace {

std::string num(double v, const char* fmt = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string group_of(const SweepPoint& p, const std::string& lang) {
  if (std::find(p.hi_langs.begin(), p.hi_langs.end(), lang) != p.hi_langs.end()) return "hi";
  if (std::find(p.lo_langs.begin(), p.lo_langs.end(), lang) != p.lo_langs.end()) return "lo";
  return "mid";
}

}  // namespace

void write_curve_csv(std::ostream& out, const SweepCurve& curve) {
  out << "x,lang,group,mean_acc,stdev_acc,n_seeds\n";
  for (const auto& p : curve.points) {
    for (const auto& [lang, ms] : p.per_language) {
      out << num(p.x) << ',' << lang << ',' << group_of(p, lang) << ',' << num(ms.mean) << ',' << num(ms.stdev)
          << ',' << ms.n << '\n';
    }
  }
}

void write_curve_svg(std::ostream& out, const SweepCurve& curve) {
  const double w = 640, h = 400, left = 60, right = 20, top = 30, bottom = 50;
  double xmin = curve.points.front().x, xmax = curve.points.back().x;
  if (xmax == xmin) xmax = xmin + 1;
  double ymin = 1.0, ymax = 0.0;
  for (const auto& p : curve.points) {
    for (const MeanStd* s : {&p.hi, &p.lo}) {
      ymin = std::min(ymin, s->mean - s->stdev);
      ymax = std::max(ymax, s->mean + s->stdev);
    }
  }
  ymin = std::max(0.0, ymin - 0.02);
  ymax = std::min(1.0, ymax + 0.02);
  if (ymax <= ymin) ymax = ymin + 0.1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\">" << curve.variable << " sweep ("
      << curve.fingerprint << ")</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << py(ymin) << "\" x2=\"" << w - right << "\" y2=\"" << py(ymin)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << py(ymin) << "\" x2=\"" << left << "\" y2=\"" << py(ymax)
      << "\" stroke=\"black\"/>\n";
  for (const auto& p : curve.points) {
    out << "<text x=\"" << num(px(p.x), "%.2f") << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"middle\">"
        << num(p.x) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << left - 6 << "\" y=\"" << num(py(y) + 4, "%.2f") << "\" text-anchor=\"end\">"
        << num(y, "%.3f") << "</text>\n";
  }
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << curve.variable << "</text>\n";

  struct Series {
    const char* name;
    const char* color;
    MeanStd SweepPoint::*field;
  };
  const Series series[] = {{"high-resource", "#1f77b4", &SweepPoint::hi}, {"low-resource", "#d62728", &SweepPoint::lo}};
  int row = 0;
  for (const auto& s : series) {
    std::string band_top, band_bottom, line;
    for (const auto& p : curve.points) {
      const MeanStd& m = p.*(s.field);
      band_top += num(px(p.x), "%.2f") + "," + num(py(m.mean + m.stdev), "%.2f") + " ";
      line += num(px(p.x), "%.2f") + "," + num(py(m.mean), "%.2f") + " ";
    }
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
      const MeanStd& m = (*it).*(s.field);
      band_bottom += num(px(it->x), "%.2f") + "," + num(py(m.mean - m.stdev), "%.2f") + " ";
    }
    out << "<polygon points=\"" << band_top << band_bottom << "\" fill=\"" << s.color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    out << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << w - right - 120 << "\" y=\"" << top + 14 + 16 * row << "\" fill=\"" << s.color << "\">"
        << s.name << "</text>\n";
    ++row;
  }
  out << "</svg>\n";
}

std::vector<std::string> emit_report(const std::vector<SweepCurve>& curves, const std::string& out_dir) {
  if (curves.empty()) throw std::invalid_argument("emit_report: no curves");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit_report: cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (const auto& c : curves) {
    if (c.points.empty()) throw std::invalid_argument("emit_report: curve '" + c.variable + "' has no points");
    const std::string stem = (std::filesystem::path(out_dir) / (c.variable + "_" + c.fingerprint)).string();
    for (const std::string ext : {".csv", ".svg"}) {
      std::ofstream out(stem + ext, std::ios::binary);
      if (!out) throw std::runtime_error("emit_report: cannot write " + stem + ext);
      if (ext == ".csv") {
        write_curve_csv(out, c);
      } else {
        write_curve_svg(out, c);
      }
      if (!out) throw std::runtime_error("emit_report: write failed for " + stem + ext);
      paths.push_back(stem + ext);
    }
  }
  return paths;
}

SweepCurve read_curve_csv(std::istream& in, const std::string& variable, const std::string& fingerprint) {
  SweepCurve curve;
  curve.variable = variable;
  curve.fingerprint = fingerprint;
  std::string line;
  if (!std::getline(in, line) || line != "x,lang,group,mean_acc,stdev_acc,n_seeds") {
    throw std::runtime_error("read_curve_csv: unexpected header");
  }
  std::map<double, SweepPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw std::runtime_error("read_curve_csv: bad row: " + line);
    const double x = std::stod(f[0]);
    SweepPoint& p = points[x];
    p.x = x;
    MeanStd ms{std::stod(f[3]), std::stod(f[4]), std::stoi(f[5])};
    p.per_language[f[1]] = ms;
    if (f[2] == "hi") p.hi_langs.push_back(f[1]);
    if (f[2] == "lo") p.lo_langs.push_back(f[1]);
  }
  for (auto& [x, p] : points) {
    // Group means of per-language means; the stdev is the root mean square of
    // the members' stdevs, an approximation once per-seed values are gone.
    auto group = [&](const std::vector<std::string>& langs) {
      MeanStd g;
      double var = 0.0;
      for (const auto& l : langs) {
        g.mean += p.per_language[l].mean;
        var += p.per_language[l].stdev * p.per_language[l].stdev;
        g.n = p.per_language[l].n;
      }
      if (!langs.empty()) {
        g.mean /= static_cast<double>(langs.size());
        g.stdev = std::sqrt(var / static_cast<double>(langs.size()));
      }
      return g;
    };
    p.hi = group(p.hi_langs);
    p.lo = group(p.lo_langs);
    curve.points.push_back(std::move(p));
  }
  return curve;
}

}  // namespace babelforge::xfer
