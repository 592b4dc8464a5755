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

#include "babelforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "babelforge/char_lm.hpp"
#include "babelforge/text.hpp"

namespace babelforge::corpus {

using nlohmann::json;

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  n_docs += other.n_docs;
  n_sentences += other.n_sentences;
  n_tokens += other.n_tokens;
  bytes += other.bytes;
  return *this;
}

std::string document_to_json(const Document& doc) {
  json j;
  j["text"] = doc.text;
  j["lang"] = doc.lang;
  j["source_id"] = doc.source_id;
  j["langid_conf"] = doc.langid_conf;
  if (doc.ppl) j["ppl"] = *doc.ppl;
  if (doc.topic) j["topic"] = *doc.topic;
  return j.dump();
}

Document document_from_json(std::string_view line) {
  const json j = json::parse(line);
  Document d;
  d.text = text::normalize_document(j.at("text").get<std::string>());
  d.lang = j.at("lang").get<std::string>();
  d.source_id = j.value("source_id", std::string());
  d.langid_conf = j.value("langid_conf", 1.0);
  if (d.langid_conf < 0.0 || d.langid_conf > 1.0) throw std::invalid_argument("langid_conf outside [0,1]");
  if (j.contains("ppl") && !j["ppl"].is_null()) {
    d.ppl = j["ppl"].get<double>();
    if (!(*d.ppl > 0.0)) throw std::invalid_argument("ppl must be positive");
  }
  if (j.contains("topic") && !j["topic"].is_null()) d.topic = j["topic"].get<int>();
  return d;
}

std::vector<Document> read_jsonl(std::istream& in, std::size_t* skipped) {
  std::vector<Document> docs;
  std::size_t n_skipped = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document d;
    try {
      d = document_from_json(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
    if (d.text.empty()) {
      ++n_skipped;
      continue;
    }
    docs.push_back(std::move(d));
  }
  if (skipped) *skipped = n_skipped;
  return docs;
}

std::vector<Document> read_jsonl_file(const std::string& path, std::size_t* skipped) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_jsonl(in, skipped);
}

void write_jsonl(std::ostream& out, std::span<const Document> docs) {
  for (const auto& d : docs) out << document_to_json(d) << '\n';
}

void write_jsonl_file(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_jsonl(out, docs);
}

std::int64_t count_sentences(std::string_view t) {
  const std::u32string cps = text::to_u32(t);
  std::int64_t n = 0;
  bool has_content = false;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (c == U'\n') {
      if (has_content) ++n;
      has_content = false;
      continue;
    }
    if (!text::is_space(c)) has_content = true;
    const bool terminal = c == U'.' || c == U'!' || c == U'?' || c == U'。' || c == U'؟';
    if (terminal && i + 1 < cps.size() && text::is_space(cps[i + 1]) && has_content) {
      ++n;
      has_content = false;
    }
  }
  if (has_content) ++n;
  return n;
}

std::vector<CorpusStats> compute_stats(std::span<const Document> docs) {
  std::map<std::string, CorpusStats> by_lang;
  for (const auto& d : docs) {
    CorpusStats& s = by_lang[d.lang];
    s.lang = d.lang;
    s.n_docs += 1;
    s.n_sentences += count_sentences(d.text);
    s.n_tokens += static_cast<std::int64_t>(text::split_whitespace(d.text).size());
    s.bytes += static_cast<std::int64_t>(d.text.size());
  }
  std::vector<CorpusStats> out;
  out.reserve(by_lang.size());
  for (auto& [_, s] : by_lang) out.push_back(std::move(s));
  return out;
}

void write_stats_csv(std::ostream& out, std::span<const CorpusStats> stats) {
  out << "lang,n_docs,n_sentences,n_tokens,bytes\n";
  for (const auto& s : stats) {
    out << s.lang << ',' << s.n_docs << ',' << s.n_sentences << ',' << s.n_tokens << ',' << s.bytes << '\n';
  }
}

std::vector<Document> dedup(std::span<const Document> docs) {
  std::unordered_set<std::string> seen;
  std::vector<Document> out;
  for (const auto& d : docs) {
    std::string kept_text;
    for (std::string_view para : text::split_lines(d.text)) {
      const std::string key = text::fold_case(text::collapse_whitespace(para));
      if (key.empty() || !seen.insert(key).second) continue;
      if (!kept_text.empty()) kept_text.push_back('\n');
      kept_text += text::collapse_whitespace(para);
    }
    if (kept_text.empty()) continue;
    Document kept = d;
    kept.text = std::move(kept_text);
    out.push_back(std::move(kept));
  }
  return out;
}

std::map<std::string, std::vector<Document>> group_by_lang(std::span<const Document> docs) {
  std::map<std::string, std::vector<Document>> out;
  for (const auto& d : docs) out[d.lang].push_back(d);
  return out;
}

FilterResult score_and_filter(std::span<const Document> docs, const std::map<std::string, CharLM>& lm_by_lang,
                              double keep_fraction, int jobs) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("keep_fraction must be in (0, 1]");
  }
  std::vector<Document> scored(docs.begin(), docs.end());
  std::vector<char> has_lm(scored.size(), 0);

  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto it = lm_by_lang.find(scored[i].lang);
      if (it == lm_by_lang.end()) continue;
      has_lm[i] = 1;
      scored[i].ppl = it->second.perplexity(scored[i].text);
    }
  };
  const std::size_t n_jobs = static_cast<std::size_t>(std::max(1, jobs));
  if (n_jobs == 1 || scored.size() < 2 * n_jobs) {
    score_range(0, scored.size());
  } else {
    std::vector<std::thread> workers;
    const std::size_t chunk = (scored.size() + n_jobs - 1) / n_jobs;
    for (std::size_t b = 0; b < scored.size(); b += chunk) {
      workers.emplace_back(score_range, b, std::min(scored.size(), b + chunk));
    }
    for (auto& w : workers) w.join();
  }

  std::map<std::string, std::vector<std::size_t>> by_lang;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (has_lm[i]) by_lang[scored[i].lang].push_back(i);
  }
  std::vector<char> keep(scored.size(), 0);
  for (auto& [_, idx] : by_lang) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (*scored[a].ppl != *scored[b].ppl) return *scored[a].ppl < *scored[b].ppl;
      if (scored[a].source_id != scored[b].source_id) return scored[a].source_id < scored[b].source_id;
      return a < b;
    });
    const auto n_keep = std::min(idx.size(), static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(idx.size()) - 1e-9)));
    for (std::size_t r = 0; r < n_keep; ++r) keep[idx[r]] = 1;
  }

  FilterResult result;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (keep[i]) {
      result.kept.push_back(std::move(scored[i]));
    } else {
      result.dropped.push_back({std::move(scored[i]), has_lm[i] ? "ppl-quantile" : "no-lm"});
    }
  }
  return result;
}

}  // namespace babelforge::corpus
