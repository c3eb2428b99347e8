// Copyright 2026 The mcforge Authors.
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

#include "mcforge/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mcforge/error.hpp"
#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

// Length in bytes of a whitespace code point starting at text[i], or 0.
std::size_t whitespace_len(std::string_view text, std::size_t i) {
  const auto b = [&](std::size_t k) -> unsigned char {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0;
  };
  const unsigned char c = b(0);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  if (c == 0xc2 && (b(1) == 0x85 || b(1) == 0xa0)) return 2;
  if (c == 0xe1 && b(1) == 0x9a && b(2) == 0x80) return 3;  // U+1680
  if (c == 0xe2 && b(1) == 0x80) {
    const unsigned char d = b(2);
    if ((d >= 0x80 && d <= 0x8a) || d == 0xa8 || d == 0xa9 || d == 0xaf) return 3;
  }
  if (c == 0xe2 && b(1) == 0x81 && b(2) == 0x9f) return 3;  // U+205F
  if (c == 0xe3 && b(1) == 0x80 && b(2) == 0x80) return 3;  // U+3000
  return 0;
}

void emit_word(std::string_view word, std::vector<std::string>& out) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(word[begin]))) ++begin;
  if (begin == end) {
    for (char c : word) out.emplace_back(1, c);
    return;
  }
  while (end > begin && is_ascii_punct(static_cast<unsigned char>(word[end - 1]))) --end;
  for (std::size_t i = 0; i < begin; ++i) out.emplace_back(1, word[i]);
  std::string core(word.substr(begin, end - begin));
  for (char& c : core) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  out.push_back(std::move(core));
  for (std::size_t i = end; i < word.size(); ++i) out.emplace_back(1, word[i]);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t word_begin = 0;
  bool in_word = false;
  while (i < text.size()) {
    const std::size_t ws = whitespace_len(text, i);
    if (ws > 0) {
      if (in_word) emit_word(text.substr(word_begin, i - word_begin), out);
      in_word = false;
      i += ws;
    } else {
      if (!in_word) {
        word_begin = i;
        in_word = true;
      }
      ++i;
    }
  }
  if (in_word) emit_word(text.substr(word_begin), out);
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

IngestResult ingest(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  IngestResult result;
  result.corpus.source_tag = path.filename().string();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto skip = [&](std::string reason) {
    ++result.skipped;
    result.skip_log.emplace_back(line_no, std::move(reason));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (limit && result.corpus.size() >= *limit) break;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++result.lines_read;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      skip("malformed JSON");
      continue;
    }
    auto field = [&](const char* key) -> const std::string* {
      auto it = j.find(key);
      if (it == j.end() || !it->is_string()) return nullptr;
      return it->get_ptr<const std::string*>();
    };
    const std::string* id = field("id");
    const std::string* title = field("title");
    const std::string* article = field("article");
    if (!id || !title || !article) {
      skip("missing or non-string id/title/article");
      continue;
    }
    if (id->empty()) {
      skip("empty id");
      continue;
    }
    if (tokenize(*title).empty()) {
      skip("empty title");
      continue;
    }
    if (tokenize(*article).empty()) {
      skip("empty article");
      continue;
    }
    if (!seen.insert(*id).second) {
      skip("duplicate id " + *id);
      continue;
    }
    result.corpus.docs.push_back(Document{*id, *title, *article});
  }
  return result;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path.string());
  for (const auto& d : corpus.docs) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["article"] = d.article;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TokenId TokenInterner::intern(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> TokenInterner::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> TokenInterner::intern_all(std::span<const std::string> tokens) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(intern(t));
  return ids;
}

VocabFields parse_vocab_fields(std::string_view name) {
  if (name == "title") return VocabFields::kTitle;
  if (name == "article") return VocabFields::kArticle;
  if (name == "both") return VocabFields::kBoth;
  throw InvalidArgument("vocab fields must be title|article|both, got '" + std::string(name) + "'");
}

Vocabulary::Vocabulary() {
  add("<pad>", 0);
  add("<unk>", 0);
  add("<s>", 0);
  add("</s>", 0);
}

void Vocabulary::add(std::string token, std::uint64_t count) {
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                                   std::uint64_t min_count, std::size_t max_types) {
  if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, c] : counts) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > max_types) kept.resize(max_types);
  Vocabulary v;
  v.min_count_ = min_count;
  v.max_types_ = max_types;
  for (auto& [tok, c] : kept) v.add(std::move(tok), c);
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end() || it->second < kNumSentinels) return kUnk;
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return id(token) != kUnk; }

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary: " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\t' << counts_[i] << '\n';
  }
}

Vocabulary Vocabulary::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t expected = 0;
  std::uint64_t min_seen = UINT64_MAX;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw IoError("malformed vocabulary line: " + line);
    }
    const std::string tok = line.substr(0, t1);
    const std::size_t id = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
    const std::uint64_t count = std::stoull(line.substr(t2 + 1));
    if (id != expected++) throw IoError("vocabulary ids must be dense and ordered");
    if (id < kNumSentinels) {
      if (tok != v.tokens_[id]) throw IoError("unexpected sentinel token: " + tok);
      continue;
    }
    v.add(tok, count);
    min_seen = std::min(min_seen, count);
  }
  v.min_count_ = min_seen == UINT64_MAX ? 1 : min_seen;
  v.max_types_ = v.size() - kNumSentinels;
  return v;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    h = fnv1a64(tokens_[i], h);
    h = mix64(h ^ counts_[i]);
  }
  return h;
}

Vocabulary build_vocab(const Corpus& corpus, VocabFields fields, std::uint64_t min_count,
                       std::size_t max_types, std::size_t workers) {
  if (corpus.empty()) throw InvalidArgument("build_vocab: corpus is empty");
  if (min_count < 1) throw InvalidArgument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> total;
  std::mutex mu;
  parallel_chunks(corpus.size(), workers, [&](std::size_t begin, std::size_t end) {
    std::unordered_map<std::string, std::uint64_t> local;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& d = corpus.docs[i];
      if (fields != VocabFields::kArticle) {
        for (auto& t : tokenize(d.title)) ++local[std::move(t)];
      }
      if (fields != VocabFields::kTitle) {
        for (auto& t : tokenize(d.article)) ++local[std::move(t)];
      }
    }
    std::lock_guard lock(mu);
    for (auto& [tok, c] : local) total[tok] += c;
  });
  return Vocabulary::from_counts(total, min_count, max_types);
}

}  // namespace mcforge
