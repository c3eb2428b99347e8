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

#include "mcforge/annotate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "mcforge/rng.hpp"

namespace mcforge {

using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

constexpr std::array<Difficulty, 3> kLevels = {Difficulty::kEasy, Difficulty::kMedium,
                                               Difficulty::kHard};

std::string label(Difficulty d) {
  std::string s(to_string(d));
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

HumanStats human_stats(const std::vector<AnnotationRecord>& records, const McDataset& ds) {
  if (records.empty()) throw AnnotateError(409, "empty", "no annotation records yet");
  std::unordered_map<std::string_view, int> gold;
  for (const McInstance& inst : ds.instances) gold.emplace(inst.id, inst.gold_index);
  HumanStats s;
  std::array<std::size_t, 3> correct{};
  for (const AnnotationRecord& r : records) {
    const auto it = gold.find(r.instance_id);
    if (it == gold.end()) throw InvalidArgument("record for unknown instance " + r.instance_id);
    const auto k = static_cast<std::size_t>(r.difficulty);
    ++s.by_difficulty[k].n;
    ++s.n;
    if (r.chosen_index == it->second) {
      ++correct[k];
      ++s.correct;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    DifficultyCell& c = s.by_difficulty[k];
    c.share = static_cast<double>(c.n) / static_cast<double>(s.n);
    c.accuracy = c.n ? static_cast<double>(correct[k]) / static_cast<double>(c.n) : std::nan("");
  }
  s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.n);
  return s;
}

std::string HumanStats::to_json() const {
  json rows = json::array();
  for (std::size_t k = 0; k < 3; ++k) {
    rows.push_back({{"difficulty", label(kLevels[k])},
                    {"n", by_difficulty[k].n},
                    {"share", by_difficulty[k].share},
                    {"accuracy", nullable(by_difficulty[k].accuracy)}});
  }
  rows.push_back({{"difficulty", "Overall"}, {"n", n}, {"share", 1.0}, {"accuracy", accuracy}});
  return json{{"rows", rows}, {"n", n}, {"correct", correct}}.dump();
}

std::string HumanStats::format_table() const {
  std::string out = "Difficulty   Share   Accuracy\n";
  char line[96];
  auto pct = [](double v) {
    char b[16];
    if (std::isnan(v)) return std::string("    -");
    std::snprintf(b, sizeof b, "%5.1f", 100.0 * v);
    return std::string(b);
  };
  for (std::size_t k = 0; k < 3; ++k) {
    std::snprintf(line, sizeof line, "%-10s  %s%%   %s%%\n", label(kLevels[k]).c_str(),
                  pct(by_difficulty[k].share).c_str(), pct(by_difficulty[k].accuracy).c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "%-10s  %s%%   %s%%\n", "Overall", pct(1.0).c_str(),
                pct(accuracy).c_str());
  out += line;
  return out;
}

std::string instance_view_json(const McInstance& inst) {
  json options = json::array();
  for (const McOption& o : inst.options) options.push_back(o.text);
  return json{{"id", inst.id}, {"article", inst.article}, {"options", options}}.dump();
}

struct AnnotationStore::Impl {
  struct Entry {
    mutable std::mutex mu;
    AnnotationSession session;
    std::vector<AnnotationRecord> records;
  };

  std::filesystem::path log_path;
  Clock clock;
  std::unordered_map<std::string, const McInstance*> by_id;

  mutable std::shared_mutex map_mu;
  std::map<std::string, std::unique_ptr<Entry>> sessions;
  std::size_t next_session = 1;

  std::mutex log_mu;
  std::ofstream log;

  void append(const json& line) {
    const std::string text = line.dump() + "\n";
    std::lock_guard lock(log_mu);
    log.write(text.data(), static_cast<std::streamsize>(text.size()));
    log.flush();
    if (!log) throw IoError("annotation log write failed: " + log_path.string());
  }

  Entry& entry(const std::string& id) const {
    std::shared_lock lock(map_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw AnnotateError(404, "not_found", "unknown session " + id);
    return *it->second;
  }

  // Shared by live submissions and log replay.
  void apply_answer(Entry& e, const AnnotationRecord& r) {
    AnnotationSession& s = e.session;
    for (const AnnotationRecord& prev : e.records) {
      if (prev.instance_id == r.instance_id) {
        throw AnnotateError(409, "duplicate", "instance " + r.instance_id + " already answered");
      }
    }
    if (s.done() || s.instance_ids[s.cursor] != r.instance_id) {
      throw AnnotateError(409, "out_of_order",
                          "instance " + r.instance_id + " is not the current one of session " +
                              s.session_id);
    }
    const McInstance* inst = by_id.at(r.instance_id);
    if (r.chosen_index < 0 || r.chosen_index >= static_cast<int>(inst->options.size())) {
      throw AnnotateError(400, "bad_request", "choice out of range");
    }
    e.records.push_back(r);
    ++s.cursor;
  }
};

AnnotationStore::AnnotationStore(const McDataset& ds, std::filesystem::path log_path, Clock clock)
    : ds_(ds), impl_(std::make_unique<Impl>()) {
  impl_->log_path = std::move(log_path);
  impl_->clock = clock ? std::move(clock) : Clock(utc_now);
  for (const McInstance& inst : ds.instances) impl_->by_id.emplace(inst.id, &inst);

  if (std::filesystem::exists(impl_->log_path)) {
    std::ifstream in(impl_->log_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        const std::string type = j.at("type");
        if (type == "session") {
          auto e = std::make_unique<Impl::Entry>();
          e->session.session_id = j.at("session_id");
          e->session.split = parse_split(j.at("split").get<std::string>());
          e->session.seed = j.at("seed");
          e->session.instance_ids = j.at("instance_ids").get<std::vector<std::string>>();
          for (const auto& id : e->session.instance_ids) {
            if (!impl_->by_id.contains(id)) throw IoError("unknown instance " + id);
          }
          impl_->sessions[e->session.session_id] = std::move(e);
          ++impl_->next_session;
        } else if (type == "answer") {
          AnnotationRecord r;
          r.session_id = j.at("session_id");
          r.instance_id = j.at("instance_id");
          r.chosen_index = j.at("choice");
          r.difficulty = parse_difficulty(j.at("difficulty").get<std::string>()).value();
          r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
          r.timestamp = j.value("timestamp", "");
          impl_->apply_answer(impl_->entry(r.session_id), r);
        } else {
          throw IoError("unknown record type " + type);
        }
      } catch (const std::exception& ex) {
        throw IoError(impl_->log_path.string() + ":" + std::to_string(lineno) +
                      ": bad annotation record: " + ex.what());
      }
    }
  }
  impl_->log.open(impl_->log_path, std::ios::app | std::ios::binary);
  if (!impl_->log) throw IoError("cannot open annotation log: " + impl_->log_path.string());
}

AnnotationStore::~AnnotationStore() = default;

AnnotationSession AnnotationStore::create_session(Split split, std::size_t n, std::uint64_t seed) {
  const auto pool = ds_.in_split(split);
  if (pool.empty()) {
    throw AnnotateError(400, "bad_request", std::string("split ") + std::string(to_string(split)) +
                                                " is empty");
  }
  if (n == 0 || n > pool.size()) {
    throw AnnotateError(400, "bad_request",
                        "n must be in [1, " + std::to_string(pool.size()) + "]");
  }
  std::vector<std::string> ids;
  ids.reserve(pool.size());
  for (const McInstance* inst : pool) ids.push_back(inst->id);
  Rng rng(derive_seed(seed, "annotate", to_string(split)));
  shuffle_range(ids.begin(), ids.end(), rng);
  ids.resize(n);

  auto e = std::make_unique<Impl::Entry>();
  e->session.split = split;
  e->session.seed = seed;
  e->session.instance_ids = std::move(ids);
  std::unique_lock lock(impl_->map_mu);
  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", impl_->next_session++);
  e->session.session_id = id;
  impl_->append({{"type", "session"},
                 {"session_id", e->session.session_id},
                 {"split", to_string(split)},
                 {"seed", seed},
                 {"instance_ids", e->session.instance_ids},
                 {"timestamp", impl_->clock()}});
  AnnotationSession out = e->session;
  impl_->sessions[out.session_id] = std::move(e);
  return out;
}

AnnotationSession AnnotationStore::session(const std::string& id) const {
  auto& e = impl_->entry(id);
  std::lock_guard lock(e.mu);
  return e.session;
}

std::optional<const McInstance*> AnnotationStore::next(const std::string& session_id) const {
  auto& e = impl_->entry(session_id);
  std::lock_guard lock(e.mu);
  if (e.session.done()) return std::nullopt;
  return impl_->by_id.at(e.session.instance_ids[e.session.cursor]);
}

std::size_t AnnotationStore::submit(const std::string& session_id, const std::string& instance_id,
                                    int choice, std::optional<Difficulty> difficulty,
                                    std::int64_t elapsed_ms) {
  if (!difficulty) throw AnnotateError(400, "bad_request", "difficulty is required");
  auto& e = impl_->entry(session_id);
  std::lock_guard lock(e.mu);
  AnnotationRecord r{session_id, instance_id, choice, *difficulty, elapsed_ms, impl_->clock()};
  if (!impl_->by_id.contains(instance_id)) {
    throw AnnotateError(409, "out_of_order", "instance " + instance_id + " is not in the session");
  }
  impl_->apply_answer(e, r);
  try {
    impl_->append({{"type", "answer"},
                   {"session_id", r.session_id},
                   {"instance_id", r.instance_id},
                   {"choice", r.chosen_index},
                   {"difficulty", to_string(r.difficulty)},
                   {"elapsed_ms", r.elapsed_ms},
                   {"timestamp", r.timestamp}});
  } catch (...) {
    e.records.pop_back();
    --e.session.cursor;
    throw;
  }
  return e.records.size();
}

std::vector<AnnotationRecord> AnnotationStore::records(
    const std::optional<std::string>& session_id) const {
  if (session_id) {
    auto& e = impl_->entry(*session_id);
    std::lock_guard lock(e.mu);
    return e.records;
  }
  std::vector<AnnotationRecord> out;
  std::shared_lock lock(impl_->map_mu);
  for (const auto& [id, e] : impl_->sessions) {
    std::lock_guard elock(e->mu);
    out.insert(out.end(), e->records.begin(), e->records.end());
  }
  return out;
}

HumanStats AnnotationStore::stats(const std::optional<std::string>& session_id) const {
  return human_stats(records(session_id), ds_);
}

struct AnnotateServer::Impl {
  AnnotationStore& store;
  AnnotateServerOptions options;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  Impl(AnnotationStore& s, AnnotateServerOptions o) : store(s), options(std::move(o)) {}

  static void send(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body, "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& code,
                   const std::string& message) {
    send(res, status, json{{"error", code}, {"message", message}}.dump());
  }

  template <typename Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const AnnotateError& e) {
        fail(res, e.status(), e.code(), e.what());
      } catch (const json::exception& e) {
        fail(res, 400, "bad_request", e.what());
      } catch (const InvalidArgument& e) {
        fail(res, 400, "bad_request", e.what());
      } catch (const std::exception& e) {
        fail(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.Post("/api/session", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      Split split;
      try {
        split = parse_split(body.value("split", std::string("dev")));
      } catch (const std::exception& e) {
        throw AnnotateError(400, "bad_request", e.what());
      }
      const auto n = body.value("n", std::size_t{200});
      const auto seed = body.value("seed", std::uint64_t{0});
      const AnnotationSession s = store.create_session(split, n, seed);
      send(res, 201,
           json{{"session_id", s.session_id}, {"split", to_string(s.split)},
                {"n", s.instance_ids.size()}, {"seed", s.seed}}
               .dump());
    }));

    server.Get(R"(/api/session/([^/]+)/next)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto inst = store.next(id);
                 const AnnotationSession s = store.session(id);
                 json body = {{"session_id", id},
                              {"done", !inst.has_value()},
                              {"position", s.cursor},
                              {"total", s.instance_ids.size()}};
                 if (inst) body["instance"] = json::parse(instance_view_json(**inst));
                 send(res, 200, body.dump());
               }));

    server.Post(R"(/api/session/([^/]+)/answer)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string id = req.matches[1];
                  const json body = json::parse(req.body);
                  if (!body.contains("instance_id") || !body.contains("choice")) {
                    throw AnnotateError(400, "bad_request", "instance_id and choice are required");
                  }
                  std::optional<Difficulty> difficulty;
                  if (body.contains("difficulty") && body["difficulty"].is_string()) {
                    difficulty = parse_difficulty(body["difficulty"].get<std::string>());
                  }
                  const std::size_t answered =
                      store.submit(id, body.at("instance_id").get<std::string>(),
                                   body.at("choice").get<int>(), difficulty,
                                   body.value("elapsed_ms", std::int64_t{0}));
                  const AnnotationSession s = store.session(id);
                  send(res, 200,
                       json{{"accepted", true}, {"answered", answered},
                            {"total", s.instance_ids.size()}, {"done", s.done()}}
                           .dump());
                }));

    server.Get(R"(/api/session/([^/]+)/review)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 if (!store.session(id).done()) {
                   throw AnnotateError(403, "incomplete", "review opens after the last answer");
                 }
                 std::unordered_map<std::string_view, const McInstance*> by_id;
                 for (const McInstance& inst : store.dataset().instances) by_id[inst.id] = &inst;
                 json items = json::array();
                 for (const AnnotationRecord& r : store.records(id)) {
                   const int gold = by_id.at(r.instance_id)->gold_index;
                   items.push_back({{"instance_id", r.instance_id},
                                    {"choice", r.chosen_index},
                                    {"gold", gold},
                                    {"correct", r.chosen_index == gold},
                                    {"difficulty", to_string(r.difficulty)}});
                 }
                 send(res, 200, json{{"session_id", id}, {"items", items}}.dump());
               }));

    server.Get("/api/stats", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> id;
      if (req.has_param("session")) id = req.get_param_value("session");
      send(res, 200, store.stats(id).to_json());
    }));

    if (!options.static_dir.empty() && !server.set_mount_point("/", options.static_dir.string())) {
      throw IoError("static directory not found: " + options.static_dir.string());
    }
  }

  void bind() {
    port = options.port == 0 ? server.bind_to_any_port(options.host)
                             : (server.bind_to_port(options.host, options.port) ? options.port : -1);
    if (port < 0) {
      throw IoError("cannot bind " + options.host + ":" + std::to_string(options.port));
    }
  }
};

AnnotateServer::AnnotateServer(AnnotationStore& store, AnnotateServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

AnnotateServer::~AnnotateServer() { stop(); }

int AnnotateServer::start() {
  impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void AnnotateServer::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void AnnotateServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int AnnotateServer::port() const { return impl_->port; }

}  // namespace mcforge
