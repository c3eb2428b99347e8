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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "mcforge/corpus.hpp"
#include "mcforge/error.hpp"
#include "mcforge/synth.hpp"

using namespace mcforge;
using V = std::vector<std::string>;

namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Police Arrest TWO") == V{"police", "arrest", "two"});
  CHECK(tokenize("  hello,  world!  ") == V{"hello", ",", "world", "!"});
  CHECK(tokenize("\"quoted\"") == V{"\"", "quoted", "\""});
  CHECK(tokenize("U.S.-led") == V{"u.s.-led"});
  CHECK(tokenize("...") == V{".", ".", "."});
  CHECK(tokenize("a\tb\nc") == V{"a", "b", "c"});
  CHECK(tokenize("a\xc2\xa0" "b") == V{"a", "b"});       // no-break space
  CHECK(tokenize("a\xe3\x80\x80" "b") == V{"a", "b"});   // ideographic space
  CHECK(tokenize("") == V{});
  CHECK(tokenize("   ") == V{});
  CHECK(tokenize("\xc3\x89t\xc3\xa9") == V{"\xc3\x89t\xc3\xa9"});  // non-ASCII left as is
}

TEST_CASE("join_tokens round trip") {
  for (const char* s : {"Hello, world!", "  a  b ", "(x) y.", "no-op"}) {
    const auto t = tokenize(s);
    CHECK(tokenize(join_tokens(t)) == t);
  }
}

TEST_CASE("ingest skips bad lines and keeps the rest") {
  const auto p = write_tmp("mcf_ingest.jsonl",
                           "{\"id\":\"a\",\"title\":\"T one\",\"article\":\"Body one .\"}\n"
                           "not json\n"
                           "{\"id\":\"b\",\"title\":\"\",\"article\":\"x\"}\n"
                           "{\"id\":\"c\",\"title\":\"t\",\"article\":\"   \"}\n"
                           "{\"id\":\"a\",\"title\":\"dup\",\"article\":\"dup\"}\n"
                           "{\"id\":\"d\",\"title\":3,\"article\":\"x\"}\n"
                           "\n"
                           "{\"id\":\"e\",\"title\":\"T two\",\"article\":\"Body two .\",\"extra\":1}\n");
  const auto r = ingest(p);
  CHECK(r.corpus.size() == 2);
  CHECK(r.corpus.docs[0].id == "a");
  CHECK(r.corpus.docs[1].id == "e");
  CHECK(r.skipped == 5);
  CHECK(r.skip_log.size() == r.skipped);
  CHECK(r.skip_log[0].first == 2);

  const auto limited = ingest(p, 1);
  CHECK(limited.corpus.size() == 1);
  CHECK_THROWS_AS(ingest("/nonexistent/mcf.jsonl"), IoError);
}

TEST_CASE("write_corpus / ingest round trip") {
  SynthConfig s;
  s.docs = 50;
  s.topics = 4;
  const Corpus c = synth_corpus(s);
  const auto p = std::filesystem::temp_directory_path() / "mcf_corpus_rt.jsonl";
  write_corpus(c, p);
  const auto back = ingest(p);
  CHECK(back.skipped == 0);
  CHECK(back.corpus.docs == c.docs);
}

TEST_CASE("vocabulary: sentinels, ordering, min_count, max_types") {
  const std::unordered_map<std::string, std::uint64_t> counts{
      {"b", 5}, {"a", 5}, {"c", 9}, {"d", 1}, {"e", 2}};
  const auto v = Vocabulary::from_counts(counts, 2, 3);
  REQUIRE(v.size() == 4 + 3);
  CHECK(v.token(Vocabulary::kPad) != v.token(Vocabulary::kUnk));
  CHECK(v.token(4) == "c");
  CHECK(v.token(5) == "a");
  CHECK(v.token(6) == "b");
  CHECK(v.id("e") == Vocabulary::kUnk);
  CHECK(v.id("d") == Vocabulary::kUnk);
  CHECK(v.id(v.token(Vocabulary::kBos)) == Vocabulary::kUnk);  // sentinels never encode
  CHECK(v.encode(V{"c", "zz"}) == std::vector<TokenId>{4, Vocabulary::kUnk});
  CHECK(v.decode(std::vector<TokenId>{5, 6}) == V{"a", "b"});
  CHECK_THROWS_AS(Vocabulary::from_counts(counts, 0, 3), InvalidArgument);
}

TEST_CASE("vocabulary: tsv round trip and worker independence") {
  SynthConfig s;
  s.docs = 200;
  const Corpus c = synth_corpus(s);
  const auto v1 = build_vocab(c, VocabFields::kBoth, 2, 500, 1);
  const auto v3 = build_vocab(c, VocabFields::kBoth, 2, 500, 3);
  CHECK(v1 == v3);
  CHECK(v1.fingerprint() == v3.fingerprint());
  const auto p = std::filesystem::temp_directory_path() / "mcf_vocab.tsv";
  v1.save_tsv(p);
  const auto back = Vocabulary::load_tsv(p);
  CHECK(back == v1);
  CHECK(build_vocab(c, VocabFields::kTitle, 2, 500).size() < v1.size());
  CHECK_THROWS_AS(build_vocab(Corpus{}, VocabFields::kBoth, 1, 10), InvalidArgument);
}

TEST_CASE("synthetic corpus is seeded") {
  SynthConfig s;
  s.docs = 100;
  const Corpus a = synth_corpus(s);
  const Corpus b = synth_corpus(s);
  CHECK(a.docs == b.docs);
  s.seed = 8;
  CHECK(synth_corpus(s).docs != a.docs);
  CHECK(a.docs[0].id == "doc000");
  for (const auto& d : a.docs) {
    CHECK(!tokenize(d.title).empty());
    CHECK(tokenize(d.article).size() > tokenize(d.title).size());
  }
  SynthConfig bad;
  bad.docs = 0;
  CHECK_THROWS_AS(synth_corpus(bad), InvalidArgument);
}
