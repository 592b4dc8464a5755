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

#ifndef BABELFORGE_RUN_CONFIG_HPP_
#define BABELFORGE_RUN_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace babelforge {

// Flat `key = value` configuration (one pair per line, '#' comments).
// Every lookup, including ones that fall back to a default, is recorded so
// that the effective configuration can be echoed into logs.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  explicit KeyValueConfig(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig parse_file(const std::string& path);

  bool contains(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback);
  std::string require_string(const std::string& key);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key, double fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::int64_t> get_ints(const std::string& key, const std::vector<std::int64_t>& fallback);

  // Effective values of every key read so far plus every key supplied.
  std::map<std::string, std::string> effective() const;
  const std::map<std::string, std::string>& values() const { return values_; }
  // Keys supplied but never read, usually typos.
  std::vector<std::string> unused_keys() const;

  void write(std::ostream& out, const std::string& line_prefix = "") const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> used_;
};

std::string format_double(double v);
std::string join_doubles(const std::vector<double>& v);

}  // namespace babelforge

#endif  // BABELFORGE_RUN_CONFIG_HPP_
