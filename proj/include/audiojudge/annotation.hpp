#pragma once

// Blind human rating sessions over the responses of one run. The store keeps
// the response-key -> model mapping server side, persists every event in an
// append-only log under <run>/annotations/ and replays it on start, so a
// restarted service resumes sessions where they stopped.

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "audiojudge/analytics.hpp"
#include "audiojudge/error.hpp"
#include "audiojudge/eval.hpp"
#include "audiojudge/fingerprint.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

/// Five-anchor human scale shown with every payload. Loaded from a config
/// file ({"title", "anchors": {"1".."5"}}); builtin() is a neutral default.
struct RatingCriteria {
  std::string title;
  std::array<std::string, 5> anchors;

  static RatingCriteria from_json(const json& j) {
    if (!j.is_object() || !j.contains("anchors") || !j["anchors"].is_object())
      throw ParseError("rating criteria need an 'anchors' object");
    RatingCriteria c;
    c.title = j.value("title", "Scoring criteria");
    for (int s = 1; s <= 5; ++s) {
      const std::string k = std::to_string(s);
      if (!j["anchors"].contains(k) || !j["anchors"][k].is_string() ||
          j["anchors"][k].get<std::string>().empty())
        throw ParseError("rating criteria lack anchor " + k);
      c.anchors[s - 1] = j["anchors"][k].get<std::string>();
    }
    if (j["anchors"].size() != 5) throw ParseError("rating criteria must have exactly anchors 1..5");
    return c;
  }

  static RatingCriteria load(const fs::path& path) { return from_json(read_json_file(path)); }

  static RatingCriteria builtin() {
    return {"Overall response quality",
            {"Wrong, off-topic or unusable; the question is not answered.",
             "Major errors or key content missing; hard to follow.",
             "Partly right with clear mistakes or gaps; acceptable but weak.",
             "Right and relevant with small slips; clear and well organised.",
             "Right, complete and fluent; no meaningful errors."}};
  }

  json to_json() const {
    json a = json::object();
    for (int s = 1; s <= 5; ++s) a[std::to_string(s)] = anchors[s - 1];
    return json{{"title", title}, {"anchors", a}};
  }
};

/// One question in a session queue: every model's response to the item under
/// an opaque key (R1..Rn) in a per-annotator shuffled order.
struct QueueEntry {
  std::string item_id;
  std::vector<std::string> keys;                 // display order
  std::map<std::string, std::string> key_model;  // key -> model_id (server side only)
  std::map<std::string, std::string> key_text;   // key -> response text
};

struct Session {
  std::string session_id;
  std::string annotator_id;
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<QueueEntry> queue;
};

inline std::string session_id_for(const std::string& run_id, const std::string& annotator_id,
                                  std::uint64_t seed) {
  return "s-" + sha256_hex(run_id + '\x1f' + annotator_id + '\x1f' + std::to_string(seed)).substr(0, 16);
}

/// Seeded Fisher-Yates permutation of 0..n-1 keyed on (item, annotator, seed).
inline std::vector<std::size_t> blind_order(std::size_t n, const std::string& item_id,
                                            const std::string& annotator_id, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ fnv1a64(item_id + '\x1f' + annotator_id));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

class AnnotationStore {
 public:
  using Clock = std::function<Timestamp()>;

  AnnotationStore(fs::path run_dir, RatingCriteria criteria = RatingCriteria::builtin(),
                  Clock clock = &Timestamp::now)
      : run_dir_(std::move(run_dir)), criteria_(std::move(criteria)), clock_(std::move(clock)) {
    manifest_ = read_manifest(run_manifest_path(run_dir_));
    bench_ = load_benchmark(run_dir_ / manifest_.artifacts.at("benchmark").get<std::string>());
    for (const auto& a : manifest_.adapter_configs) {
      const std::string model = a.at("model_id").get<std::string>();
      auto it = manifest_.artifacts.find("responses/" + model);
      if (it == manifest_.artifacts.end()) continue;
      for (auto& r : read_records<ModelResponse>(run_dir_ / it->get<std::string>()))
        responses_[r.item_id][r.model_id] = r.text;
    }
    replay_log();
  }

  const std::string& run_id() const { return manifest_.run_id; }
  const RunManifest& manifest() const { return manifest_; }
  const RatingCriteria& criteria() const { return criteria_; }
  fs::path log_path() const { return run_dir_ / "annotations" / "events.jsonl"; }

  /// Idempotent: the same (annotator, seed) always maps to the same session.
  std::string create_session(const std::string& annotator_id, std::uint64_t seed) {
    std::lock_guard lock(m_);
    const std::string id = open_session(annotator_id, seed);
    if (!logged_sessions_.count(id)) {
      append_log(json{{"event", "session"}, {"session_id", id}, {"annotator_id", annotator_id},
                      {"seed", seed}});
      logged_sessions_.insert(id);
    }
    return id;
  }

  /// Payload at the session cursor, or {"done": true}.
  json next_item(const std::string& session_id) {
    std::lock_guard lock(m_);
    const Session& s = session(session_id);
    const std::size_t cursor = cursor_of(s);
    if (cursor == s.queue.size())
      return json{{"done", true}, {"session_id", s.session_id}, {"position", cursor},
                  {"total", s.queue.size()}};
    return payload(s, cursor);
  }

  /// Returns whether an earlier rating for the same response was replaced.
  bool submit_rating(const std::string& session_id, const std::string& item_id,
                     const std::string& response_key, int overall, int language_quality) {
    std::lock_guard lock(m_);
    const Session& s = session(session_id);
    auto entry = std::find_if(s.queue.begin(), s.queue.end(),
                              [&](const QueueEntry& q) { return q.item_id == item_id; });
    if (entry == s.queue.end()) throw InvalidKey("item " + item_id + " is not in this session");
    auto km = entry->key_model.find(response_key);
    if (km == entry->key_model.end())
      throw InvalidKey("response key '" + response_key + "' is not valid for item " + item_id);
    for (int v : {overall, language_quality})
      if (v < 1 || v > 5) throw ScoreOutOfRange("score " + std::to_string(v) + " outside 1..5");

    HumanRating r{item_id, km->second, s.annotator_id, overall, language_quality, s.session_id,
                  clock_()};
    validate(r);
    const bool superseded = store_rating(r);
    json event = encode(r);
    event["event"] = "rating";
    event["response_key"] = response_key;
    event["supersedes"] = superseded;
    append_log(event);
    return superseded;
  }

  /// Latest rating per (item, model, annotator), sorted on that key.
  std::vector<HumanRating> ratings() const {
    std::lock_guard lock(m_);
    std::vector<HumanRating> out;
    for (const auto& [_, r] : ratings_) out.push_back(r);
    return out;
  }

  std::string export_jsonl() const { return to_jsonl(ratings()); }

  fs::path export_ratings(const fs::path& path) const {
    atomic_write_text(path, export_jsonl());
    return path;
  }

  fs::path default_export_path() const { return run_dir_ / "ratings.human.jsonl"; }

  /// Every string a client must never see: model ids, adapter endpoints.
  std::vector<std::string> blinded_strings() const {
    std::vector<std::string> out;
    for (const auto& a : manifest_.adapter_configs) {
      out.push_back(a.at("model_id").get<std::string>());
      if (a.contains("endpoint")) out.push_back(a["endpoint"].get<std::string>());
    }
    return out;
  }

 private:
  using RatingKey = std::tuple<std::string, std::string, std::string>;

  Session build_session(const std::string& annotator_id, std::uint64_t seed) const {
    Session s;
    s.session_id = session_id_for(manifest_.run_id, annotator_id, seed);
    s.annotator_id = annotator_id;
    s.run_id = manifest_.run_id;
    s.seed = seed;
    for (const auto& [item_id, by_model] : responses_) {  // sorted by item id
      std::vector<std::string> models;
      for (const auto& [m, _] : by_model) models.push_back(m);
      auto order = blind_order(models.size(), item_id, annotator_id, seed);
      QueueEntry q;
      q.item_id = item_id;
      for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::string key = "R" + std::to_string(pos + 1);
        const std::string& model = models[order[pos]];
        q.keys.push_back(key);
        q.key_model[key] = model;
        q.key_text[key] = by_model.at(model);
      }
      s.queue.push_back(std::move(q));
    }
    return s;
  }

  std::string open_session(const std::string& annotator_id, std::uint64_t seed) {
    if (annotator_id.empty()) throw PreconditionError("annotator_id must be non-empty");
    if (responses_.empty()) throw EmptyRun("run " + manifest_.run_id + " has no responses to rate");
    const std::string id = session_id_for(manifest_.run_id, annotator_id, seed);
    if (!sessions_.count(id)) sessions_.emplace(id, build_session(annotator_id, seed));
    return id;
  }

  const Session& session(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession("unknown session " + id);
    return it->second;
  }

  bool rated(const Session& s, const QueueEntry& q, const std::string& key) const {
    return ratings_.count(RatingKey{q.item_id, q.key_model.at(key), s.annotator_id}) > 0;
  }

  std::size_t cursor_of(const Session& s) const {
    for (std::size_t i = 0; i < s.queue.size(); ++i)
      for (const auto& key : s.queue[i].keys)
        if (!rated(s, s.queue[i], key)) return i;
    return s.queue.size();
  }

  json payload(const Session& s, std::size_t index) const {
    const QueueEntry& q = s.queue[index];
    const BenchmarkItem* item = bench_.find(q.item_id);
    if (!item) throw InvariantViolation("response for unknown item " + q.item_id);
    json responses = json::array();
    json submitted = json::object();
    for (const auto& key : q.keys) {
      responses.push_back(json{{"response_key", key}, {"text", q.key_text.at(key)}});
      auto it = ratings_.find(RatingKey{q.item_id, q.key_model.at(key), s.annotator_id});
      if (it != ratings_.end())
        submitted[key] = json{{"overall", it->second.overall},
                              {"language_quality", it->second.language_quality}};
    }
    json p{{"session_id", s.session_id},
           {"item_id", q.item_id},
           {"position", index},
           {"total", s.queue.size()},
           {"language", item->language.code()},
           {"task", to_string(item->task)},
           {"audio_uri", media_url(item->audio.uri)},
           {"reference", item->reference},
           {"responses", responses},
           {"submitted", submitted},
           {"criteria", criteria_.to_json()},
           {"axes", json{{"overall", json{{"min", 1}, {"max", 5}}},
                         {"language_quality", json{{"min", 1}, {"max", 5}}}}}};
    if (item->text_instruction) p["text_instruction"] = *item->text_instruction;
    return p;
  }

  static std::string media_url(const std::string& uri) {
    if (uri.find("://") != std::string::npos || (!uri.empty() && uri[0] == '/')) return uri;
    return "/media/" + uri;
  }

  bool store_rating(const HumanRating& r) {
    RatingKey key{r.item_id, r.model_id, r.annotator_id};
    bool superseded = ratings_.count(key) > 0;
    ratings_[key] = r;
    return superseded;
  }

  void append_log(const json& event) {
    const fs::path path = log_path();
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path.string());
    out << canonical_dump(event) << '\n';
    out.flush();
    if (!out) throw IoError("short write to " + path.string());
  }

  void replay_log() {
    if (!fs::exists(log_path())) return;
    for (const auto& line : read_lines(log_path())) {
      json e;
      try {
        e = json::parse(line);
      } catch (const json::parse_error&) {
        continue;  // a torn final line from an interrupted append
      }
      const std::string kind = e.value("event", "");
      if (kind == "session") {
        const std::string id = open_session(e.at("annotator_id"), e.at("seed").get<std::uint64_t>());
        logged_sessions_.insert(id);
      } else if (kind == "rating") {
        e.erase("event");
        e.erase("response_key");
        e.erase("supersedes");
        store_rating(decode<HumanRating>(e));
      }
    }
  }

  fs::path run_dir_;
  RatingCriteria criteria_;
  Clock clock_;
  RunManifest manifest_;
  Benchmark bench_;
  std::map<std::string, std::map<std::string, std::string>> responses_;  // item -> model -> text
  std::map<std::string, Session> sessions_;
  std::set<std::string> logged_sessions_;
  std::map<RatingKey, HumanRating> ratings_;
  mutable std::mutex m_;
};

// ---------------------------------------------------------------------------
// HTTP API

class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, fs::path media_root)
      : store_(store), media_root_(std::move(media_root)) {
    routes();
  }

  ~AnnotationServer() { stop(); }

  /// Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void reply_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(canonical_dump(body), "application/json");
  }

  static int status_for(const Error& e) {
    const std::string kind = e.kind();
    if (kind == "UnknownSession") return 404;
    if (kind == "InvalidKey" || kind == "ScoreOutOfRange" || kind == "ParseError" ||
        kind == "PreconditionError")
      return 400;
    if (kind == "EmptyRun") return 409;
    return 500;
  }

  template <class F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      reply_json(res, json{{"error", e.kind()}, {"message", e.what()}}, status_for(e));
    } catch (const json::exception& e) {
      reply_json(res, json{{"error", "ParseError"}, {"message", e.what()}}, 400);
    }
  }

  static json body_of(const httplib::Request& req) {
    try {
      json j = json::parse(req.body);
      if (!j.is_object()) throw ParseError("request body must be a JSON object");
      return j;
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON body: ") + e.what());
    }
  }

  void routes() {
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      reply_json(res, json{{"ok", true}});
    });

    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        json b = body_of(req);
        const std::string run_id = b.at("run_id").get<std::string>();
        if (run_id != store_.run_id())
          return reply_json(res, json{{"error", "UnknownRun"}, {"message", "unknown run " + run_id}}, 404);
        std::uint64_t seed = b.value("seed", std::uint64_t{0});
        reply_json(res, json{{"session_id", store_.create_session(b.at("annotator_id"), seed)}});
      });
    });

    server_.Get(R"(/api/sessions/([^/]+)/next)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { reply_json(res, store_.next_item(req.matches[1])); });
                });

    server_.Post(R"(/api/sessions/([^/]+)/ratings)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                     json b = body_of(req);
                     for (const char* k : {"overall", "language_quality"})
                       if (!b.contains(k) || !b[k].is_number_integer())
                         throw ParseError(std::string("'") + k + "' must be an integer");
                     bool superseded = store_.submit_rating(
                         req.matches[1], b.at("item_id").get<std::string>(),
                         b.at("response_key").get<std::string>(), b["overall"].get<int>(),
                         b["language_quality"].get<int>());
                     reply_json(res, json{{"ok", true}, {"superseded", superseded}});
                   });
                 });

    server_.Get(R"(/api/runs/([^/]+)/export)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    if (req.matches[1] != store_.run_id())
                      return reply_json(res, json{{"error", "UnknownRun"}, {"message", "unknown run"}}, 404);
                    res.set_content(store_.export_jsonl(), "application/x-ndjson");
                  });
                });

    if (fs::is_directory(media_root_)) server_.set_mount_point("/media", media_root_.string());
  }

  AnnotationStore& store_;
  fs::path media_root_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace audiojudge
