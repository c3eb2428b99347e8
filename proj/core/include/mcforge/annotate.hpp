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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcforge/error.hpp"
#include "mcforge/evalharness.hpp"
#include "mcforge/mccreate.hpp"

namespace mcforge {

struct AnnotationRecord {
  std::string session_id;
  std::string instance_id;
  int chosen_index = 0;
  Difficulty difficulty = Difficulty::kMedium;
  std::int64_t elapsed_ms = 0;
  std::string timestamp;
};

struct AnnotationSession {
  std::string session_id;
  Split split = Split::kDev;
  std::uint64_t seed = 0;
  std::vector<std::string> instance_ids;
  std::size_t cursor = 0;

  bool done() const { return cursor == instance_ids.size(); }
};

/// Rejection carrying an HTTP status and a short machine-readable code
/// ("not_found", "bad_request", "duplicate", "out_of_order", "incomplete",
/// "empty").
class AnnotateError : public Error {
 public:
  AnnotateError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

/// Per-difficulty human accuracy table: Easy, Medium, Hard, then Overall.
struct HumanStats {
  std::array<DifficultyCell, 3> by_difficulty{};
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  std::string to_json() const;
  std::string format_table() const;
};

/// Pure aggregation over records; gold indices come from `ds`.
HumanStats human_stats(const std::vector<AnnotationRecord>& records, const McDataset& ds);

/// Sessions and answers backed by an append-only JSONL log. Opening an
/// existing log replays it. Sessions serialize their own writes; different
/// sessions proceed concurrently.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  AnnotationStore(const McDataset& ds, std::filesystem::path log_path, Clock clock = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// Seeded sample of `n` distinct instances from `split`.
  AnnotationSession create_session(Split split, std::size_t n, std::uint64_t seed);
  AnnotationSession session(const std::string& id) const;

  /// Current instance, or nullopt once every sampled instance is answered.
  std::optional<const McInstance*> next(const std::string& session_id) const;

  /// Records an answer for the session's current instance. Returns the number
  /// of answers recorded so far in the session.
  std::size_t submit(const std::string& session_id, const std::string& instance_id, int choice,
                     std::optional<Difficulty> difficulty, std::int64_t elapsed_ms = 0);

  std::vector<AnnotationRecord> records(const std::optional<std::string>& session_id = {}) const;
  HumanStats stats(const std::optional<std::string>& session_id = {}) const;

  const McDataset& dataset() const { return ds_; }

 private:
  struct Impl;
  const McDataset& ds_;
  std::unique_ptr<Impl> impl_;
};

/// JSON view of an instance for annotators: id, article and option texts only.
std::string instance_view_json(const McInstance& inst);

struct AnnotateServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // empty: no static files
};

/// HTTP front end of an AnnotationStore.
///   POST /api/session               {split, n, seed}
///   GET  /api/session/{id}/next
///   POST /api/session/{id}/answer   {instance_id, choice, difficulty, elapsed_ms?}
///   GET  /api/session/{id}/review   (only after completion)
///   GET  /api/stats[?session=id]
class AnnotateServer {
 public:
  AnnotateServer(AnnotationStore& store, AnnotateServerOptions options);
  ~AnnotateServer();

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop() is called.
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mcforge
