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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mcforge {

/// One (id, title, article) pair.
struct Document {
  std::string id;
  std::string title;
  std::string article;

  bool operator==(const Document&) const = default;
};

/// An ordered collection of documents with unique ids.
struct Corpus {
  std::vector<Document> docs;
  std::string source_tag;

  std::size_t size() const { return docs.size(); }
  bool empty() const { return docs.empty(); }
};

struct IngestResult {
  Corpus corpus;
  std::size_t lines_read = 0;
  std::size_t skipped = 0;
  // line number (1-based) and reason for every skipped line
  std::vector<std::pair<std::size_t, std::string>> skip_log;
};

/// Reads a JSON Lines corpus: one {"id","title","article"} object per line.
/// Malformed lines, duplicate ids and lines whose title or article tokenizes
/// to nothing are skipped and tallied. `limit` caps the number of accepted
/// documents. Throws IoError when the file cannot be opened.
IngestResult ingest(const std::filesystem::path& path,
                    std::optional<std::size_t> limit = std::nullopt);

/// Writes the corpus in the same JSONL format `ingest` reads.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Lowercases ASCII letters, splits on Unicode whitespace, and peels leading
/// and trailing ASCII punctuation into one-character tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Space-joins tokens; tokenize(join_tokens(tokenize(x))) == tokenize(x).
std::string join_tokens(std::span<const std::string> tokens);

using TokenId = std::uint32_t;

/// Exact string interning over the full (unfiltered) token space.
class TokenInterner {
 public:
  TokenId intern(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::vector<TokenId> intern_all(std::span<const std::string> tokens);

 private:
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> tokens_;
};

enum class VocabFields { kTitle, kArticle, kBoth };

VocabFields parse_vocab_fields(std::string_view name);

/// Frequency-filtered vocabulary with four reserved sentinel ids.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kNumSentinels = 4;

  Vocabulary();

  /// Builds from raw counts: keeps tokens with count >= min_count, sorted by
  /// (count desc, token asc), truncated to max_types.
  static Vocabulary from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                                std::uint64_t min_count, std::size_t max_types);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::uint64_t min_count() const { return min_count_; }
  std::size_t max_types() const { return max_types_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  /// token<TAB>id<TAB>count, one line per id in id order.
  void save_tsv(const std::filesystem::path& path) const;
  static Vocabulary load_tsv(const std::filesystem::path& path);

  /// Stable content hash (token order and counts).
  std::uint64_t fingerprint() const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  void add(std::string token, std::uint64_t count);

  std::unordered_map<std::string, TokenId> ids_;
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t min_count_ = 1;
  std::size_t max_types_ = 0;
};

/// Counts tokens over the chosen fields in chunks of `workers` threads; the
/// merge is order independent so the result never depends on worker count.
Vocabulary build_vocab(const Corpus& corpus, VocabFields fields, std::uint64_t min_count,
                       std::size_t max_types, std::size_t workers = 1);

}  // namespace mcforge
