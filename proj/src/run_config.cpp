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

#include "babelforge/run_config.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace babelforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    values[key] = trim(line.substr(eq + 1));
  }
  return KeyValueConfig(std::move(values));
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse(in);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  used_[key] = v;
  return v;
}

std::string KeyValueConfig::require_string(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("missing required config key '" + key + "'");
  used_[key] = it->second;
  return it->second;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = std::to_string(fallback);
    return fallback;
  }
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    used_[key] = it->second;
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' is not an integer: " + it->second);
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = format_double(fallback);
    return fallback;
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    used_[key] = it->second;
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' is not a number: " + it->second);
  }
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    used_[key] = join_doubles(fallback);
    return fallback;
  }
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(std::stod(item));
  used_[key] = it->second;
  return out;
}

std::vector<std::int64_t> KeyValueConfig::get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) {
  const auto it = values_.find(key);
  std::vector<std::int64_t> out;
  if (it == values_.end()) {
    std::string echo;
    for (std::size_t i = 0; i < fallback.size(); ++i) echo += (i ? "," : "") + std::to_string(fallback[i]);
    used_[key] = echo;
    return fallback;
  }
  for (const auto& item : split_list(it->second)) out.push_back(std::stoll(item));
  used_[key] = it->second;
  return out;
}

std::map<std::string, std::string> KeyValueConfig::effective() const {
  std::map<std::string, std::string> out = values_;
  for (const auto& [k, v] : used_) out[k] = v;
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_) {
    if (!used_.contains(k)) out.push_back(k);
  }
  return out;
}

void KeyValueConfig::write(std::ostream& out, const std::string& line_prefix) const {
  for (const auto& [k, v] : effective()) out << line_prefix << k << '=' << v << '\n';
}

}  // namespace babelforge
