#pragma once

// Canonical data model and the single-line JSON interchange format shared by
// every stage: benchmark items, curated conversations, model responses, judge
// verdicts, human ratings and run manifests.
//
// Serialization contract: one UTF-8 JSON object per line, keys sorted
// lexicographically (nlohmann::json's std::map ordering), no insignificant
// whitespace, optional fields omitted rather than written as null.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "audiojudge/error.hpp"
#include "audiojudge/fingerprint.hpp"

namespace audiojudge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Language

/// Lowercase ISO-639-1 language code drawn from a process-wide registry.
/// The registry starts with en, id, th, vi, zh; further codes must be
/// registered explicitly before they parse.
class Language {
 public:
  Language() : code_("en") {}

  static Language parse(std::string_view code) {
    if (!well_formed(code))
      throw InvariantViolation("language code '" + std::string(code) +
                               "' is not a lowercase ISO-639-1 code");
    if (!is_registered(code))
      throw InvariantViolation("language '" + std::string(code) + "' is not registered");
    return Language(std::string(code));
  }

  static void register_code(std::string_view code) {
    if (!well_formed(code))
      throw PreconditionError("cannot register ill-formed language code '" +
                              std::string(code) + "'");
    std::lock_guard lock(registry_mutex());
    registry().insert(std::string(code));
  }

  static bool is_registered(std::string_view code) {
    std::lock_guard lock(registry_mutex());
    return registry().count(std::string(code)) > 0;
  }

  const std::string& code() const { return code_; }

  /// English display name used when filling instruction templates.
  std::string display_name() const {
    static const std::map<std::string, std::string, std::less<>> kNames = {
        {"en", "English"}, {"id", "Indonesian"}, {"th", "Thai"},
        {"vi", "Vietnamese"}, {"zh", "Chinese"}};
    auto it = kNames.find(code_);
    return it == kNames.end() ? code_ : it->second;
  }

  friend auto operator<=>(const Language&, const Language&) = default;
  friend bool operator==(const Language&, const Language&) = default;

 private:
  explicit Language(std::string code) : code_(std::move(code)) {}

  static bool well_formed(std::string_view code) {
    return code.size() == 2 && code[0] >= 'a' && code[0] <= 'z' && code[1] >= 'a' &&
           code[1] <= 'z';
  }
  static std::set<std::string>& registry() {
    static std::set<std::string> codes{"en", "id", "th", "vi", "zh"};
    return codes;
  }
  static std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
  }

  std::string code_;
};

inline Language lang(std::string_view code) { return Language::parse(code); }

// ---------------------------------------------------------------------------
// Task identifiers. Benchmark tokens are upper case and training tokens lower
// case, so the two namespaces never collide under case-sensitive parsing.

enum class BenchmarkTask {
  ASR, S2TT_EX, S2TT_XE, SS, SQA, CS, SAFETY, AC, AQA, SKI, SER, LIFE, MED, MATH, FACT
};

enum class TrainingTask { asr, s2tt, ac, qa, ss, aqa, chat, math, fact, mixed };

inline constexpr std::array<BenchmarkTask, 15> kAllBenchmarkTasks = {
    BenchmarkTask::ASR,  BenchmarkTask::S2TT_EX, BenchmarkTask::S2TT_XE, BenchmarkTask::SS,
    BenchmarkTask::SQA,  BenchmarkTask::CS,      BenchmarkTask::SAFETY,  BenchmarkTask::AC,
    BenchmarkTask::AQA,  BenchmarkTask::SKI,     BenchmarkTask::SER,     BenchmarkTask::LIFE,
    BenchmarkTask::MED,  BenchmarkTask::MATH,    BenchmarkTask::FACT};

inline constexpr std::array<TrainingTask, 10> kAllTrainingTasks = {
    TrainingTask::asr,  TrainingTask::s2tt, TrainingTask::ac,   TrainingTask::qa,
    TrainingTask::ss,   TrainingTask::aqa,  TrainingTask::chat, TrainingTask::math,
    TrainingTask::fact, TrainingTask::mixed};

inline std::string to_string(BenchmarkTask t) {
  switch (t) {
    case BenchmarkTask::ASR: return "ASR";
    case BenchmarkTask::S2TT_EX: return "S2TT_EX";
    case BenchmarkTask::S2TT_XE: return "S2TT_XE";
    case BenchmarkTask::SS: return "SS";
    case BenchmarkTask::SQA: return "SQA";
    case BenchmarkTask::CS: return "CS";
    case BenchmarkTask::SAFETY: return "SAFETY";
    case BenchmarkTask::AC: return "AC";
    case BenchmarkTask::AQA: return "AQA";
    case BenchmarkTask::SKI: return "SKI";
    case BenchmarkTask::SER: return "SER";
    case BenchmarkTask::LIFE: return "LIFE";
    case BenchmarkTask::MED: return "MED";
    case BenchmarkTask::MATH: return "MATH";
    case BenchmarkTask::FACT: return "FACT";
  }
  return "?";
}

inline std::string to_string(TrainingTask t) {
  switch (t) {
    case TrainingTask::asr: return "asr";
    case TrainingTask::s2tt: return "s2tt";
    case TrainingTask::ac: return "ac";
    case TrainingTask::qa: return "qa";
    case TrainingTask::ss: return "ss";
    case TrainingTask::aqa: return "aqa";
    case TrainingTask::chat: return "chat";
    case TrainingTask::math: return "math";
    case TrainingTask::fact: return "fact";
    case TrainingTask::mixed: return "mixed";
  }
  return "?";
}

inline std::optional<BenchmarkTask> find_benchmark_task(std::string_view token) {
  for (auto t : kAllBenchmarkTasks)
    if (to_string(t) == token) return t;
  return std::nullopt;
}

inline std::optional<TrainingTask> find_training_task(std::string_view token) {
  for (auto t : kAllTrainingTasks)
    if (to_string(t) == token) return t;
  return std::nullopt;
}

inline BenchmarkTask parse_benchmark_task(std::string_view token) {
  if (auto t = find_benchmark_task(token)) return *t;
  throw InvariantViolation("unknown benchmark task '" + std::string(token) + "'");
}

inline TrainingTask parse_training_task(std::string_view token) {
  if (auto t = find_training_task(token)) return *t;
  throw InvariantViolation("unknown training task '" + std::string(token) + "'");
}

using TaskId = std::variant<BenchmarkTask, TrainingTask>;

/// Resolves a token in whichever namespace owns it.
inline TaskId resolve_task(std::string_view token) {
  if (auto b = find_benchmark_task(token)) return *b;
  if (auto t = find_training_task(token)) return *t;
  throw InvariantViolation("unknown task '" + std::string(token) + "'");
}

/// Tasks whose question lives entirely in the audio (no text instruction).
constexpr bool is_audio_only(BenchmarkTask t) {
  return t == BenchmarkTask::LIFE || t == BenchmarkTask::MED || t == BenchmarkTask::MATH ||
         t == BenchmarkTask::FACT;
}

/// Reporting family: the two translation directions share "S2TT".
inline std::string task_family(BenchmarkTask t) {
  if (t == BenchmarkTask::S2TT_EX || t == BenchmarkTask::S2TT_XE) return "S2TT";
  return to_string(t);
}

/// Accepts the short labels used in score tables ("AA", "life", "math",
/// ...) in addition to canonical tokens. Only for reading report labels;
/// records always use canonical tokens.
inline std::optional<BenchmarkTask> task_from_report_label(std::string_view label) {
  if (auto t = find_benchmark_task(label)) return t;
  static const std::map<std::string, BenchmarkTask, std::less<>> kAliases = {
      {"AA", BenchmarkTask::AC},       {"life", BenchmarkTask::LIFE},
      {"safety", BenchmarkTask::SAFETY}, {"math", BenchmarkTask::MATH},
      {"fact", BenchmarkTask::FACT},   {"Life", BenchmarkTask::LIFE},
      {"Safety", BenchmarkTask::SAFETY}, {"Math", BenchmarkTask::MATH},
      {"Fact", BenchmarkTask::FACT}};
  auto it = kAliases.find(label);
  if (it == kAliases.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Timestamps: ISO-8601 UTC with millisecond precision, e.g.
// 2025-03-01T12:00:00.250Z.

class Timestamp {
 public:
  Timestamp() = default;
  explicit Timestamp(std::int64_t unix_ms) : ms_(unix_ms) {}

  static Timestamp now() {
    using namespace std::chrono;
    return Timestamp(
        duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
  }

  static Timestamp parse(std::string_view text) {
    int y, mo, d, h, mi, s, ms;
    char tail = 0;
    std::string buf(text);
    if (text.size() != 24 ||
        std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &y, &mo, &d, &h, &mi, &s,
                    &ms, &tail) != 8 ||
        tail != 'Z' || buf[4] != '-' || buf[7] != '-' || buf[10] != 'T' || buf[19] != '.')
      throw InvariantViolation("timestamp '" + buf + "' is not ISO-8601 UTC with milliseconds");
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 59)
      throw InvariantViolation("timestamp '" + buf + "' is out of range");
    auto t = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
    return Timestamp(t.time_since_epoch().count());
  }

  std::string to_string() const {
    using namespace std::chrono;
    sys_time<milliseconds> tp{milliseconds{ms_}};
    auto dp = floor<days>(tp);
    year_month_day ymd{dp};
    hh_mm_ss hms{tp - dp};
    char out[32];
    std::snprintf(out, sizeof out, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()),
                  static_cast<int>(hms.subseconds().count()));
    return out;
  }

  std::int64_t unix_ms() const { return ms_; }
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

 private:
  std::int64_t ms_ = 0;
};

// ---------------------------------------------------------------------------
// Records

struct AudioAsset {
  std::string uri;
  std::string format;  // wav | flac | mp3
  int sample_rate_hz = 16000;
  double duration_s = 0.0;
  std::string sha256;
  friend bool operator==(const AudioAsset&, const AudioAsset&) = default;
};

struct BenchmarkItem {
  std::string id;
  Language language;
  BenchmarkTask task = BenchmarkTask::ASR;
  AudioAsset audio;
  std::optional<std::string> text_instruction;
  std::string reference;
  json meta = json::object();
  friend bool operator==(const BenchmarkItem&, const BenchmarkItem&) = default;
};

enum class Role { user, assistant };

struct TextPart {
  std::string text;
  friend bool operator==(const TextPart&, const TextPart&) = default;
};
using Part = std::variant<TextPart, AudioAsset>;

struct Turn {
  Role role = Role::user;
  std::vector<Part> parts;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Conversation {
  std::string id;
  TrainingTask task = TrainingTask::asr;
  Language language;
  std::vector<Turn> turns;
  std::string source;

  bool multi_turn() const { return turns.size() > 2; }
  friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct ModelResponse {
  std::string item_id;
  std::string model_id;
  std::string text;
  std::string gen_config_hash;
  std::int64_t latency_ms = 0;
  Timestamp created_at;
  friend bool operator==(const ModelResponse&, const ModelResponse&) = default;
};

struct JudgeVerdict {
  std::string item_id;
  std::string model_id;
  std::string judge_id;
  int score = 0;
  std::string raw;
  int attempts = 1;
  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

struct HumanRating {
  std::string item_id;
  std::string model_id;
  std::string annotator_id;
  int overall = 0;
  int language_quality = 0;
  std::string session_id;
  Timestamp timestamp;
  friend bool operator==(const HumanRating&, const HumanRating&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string benchmark_sha256;
  json adapter_configs = json::array();
  json judge_config = nullptr;  // null until a judge stage has run
  std::uint64_t seed = 0;
  Timestamp created_at;
  json config = json::object();     // full global configuration of the run
  json artifacts = json::object();  // logical name -> path relative to run dir
  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline bool is_lower_hex(std::string_view s, std::size_t len = 0) {
  if (s.empty() || (len && s.size() != len)) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

inline void require(bool cond, const std::string& type, const std::string& what) {
  if (!cond) throw InvariantViolation(type + ": " + what);
}

}  // namespace detail

inline void validate(const AudioAsset& a) {
  using detail::require;
  require(!a.uri.empty(), "AudioAsset", "uri is empty");
  require(a.format == "wav" || a.format == "flac" || a.format == "mp3", "AudioAsset",
          "format '" + a.format + "' not in {wav, flac, mp3}");
  require(a.sample_rate_hz >= 8000 && a.sample_rate_hz <= 192000, "AudioAsset",
          "sample_rate_hz outside [8000, 192000]");
  require(std::isfinite(a.duration_s) && a.duration_s > 0, "AudioAsset",
          "duration_s must be positive");
  require(detail::is_lower_hex(a.sha256, 64), "AudioAsset",
          "sha256 must be 64 lowercase hex chars");
}

/// Checks the digest against the file the uri points to, relative to base_dir.
inline void verify_audio_content(const AudioAsset& a, const std::filesystem::path& base_dir) {
  auto digest = audio_fingerprint(base_dir / a.uri);
  if (digest != a.sha256)
    throw InvariantViolation("AudioAsset: sha256 of " + a.uri + " does not match content");
}

inline void validate(const BenchmarkItem& item) {
  using detail::require;
  require(!item.id.empty(), "BenchmarkItem", "id is empty");
  validate(item.audio);
  require(!item.reference.empty(), "BenchmarkItem " + item.id, "reference is missing");
  bool audio_only = is_audio_only(item.task);
  require(item.text_instruction.has_value() != audio_only, "BenchmarkItem " + item.id,
          audio_only ? "audio-only task " + to_string(item.task) + " must not carry a text instruction"
                     : "task " + to_string(item.task) + " requires a text instruction");
  if (item.text_instruction)
    require(!item.text_instruction->empty(), "BenchmarkItem " + item.id,
            "text_instruction is empty");
  require(item.meta.is_object(), "BenchmarkItem " + item.id, "meta must be an object");
}

inline void validate(const Conversation& c) {
  using detail::require;
  const std::string who = "Conversation " + c.id;
  require(!c.id.empty(), "Conversation", "id is empty");
  require(!c.turns.empty(), who, "has no turns");
  bool has_audio = false;
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const Turn& t = c.turns[i];
    Role expected = i % 2 == 0 ? Role::user : Role::assistant;
    require(t.role == expected, who, "roles must alternate starting with user");
    require(!t.parts.empty(), who, "turn " + std::to_string(i) + " has no parts");
    for (const Part& p : t.parts) {
      if (auto* a = std::get_if<AudioAsset>(&p)) {
        validate(*a);
        has_audio = true;
      } else {
        require(!std::get<TextPart>(p).text.empty(), who, "empty text part");
      }
    }
  }
  require(c.turns.back().role == Role::assistant, who, "final turn must be assistant");
  if (c.task != TrainingTask::mixed)
    require(has_audio, who, "audio task " + to_string(c.task) + " has no audio part");
}

inline void validate(const ModelResponse& r) {
  using detail::require;
  require(!r.item_id.empty(), "ModelResponse", "item_id is empty");
  require(!r.model_id.empty(), "ModelResponse", "model_id is empty");
  require(detail::is_lower_hex(r.gen_config_hash), "ModelResponse",
          "gen_config_hash must be lowercase hex");
  require(r.latency_ms >= 0, "ModelResponse", "latency_ms is negative");
}

inline void validate(const JudgeVerdict& v) {
  using detail::require;
  require(!v.item_id.empty() && !v.model_id.empty() && !v.judge_id.empty(), "JudgeVerdict",
          "ids must be non-empty");
  require(v.score >= 1 && v.score <= 5, "JudgeVerdict",
          "score " + std::to_string(v.score) + " outside 1..5");
  require(v.attempts >= 1, "JudgeVerdict", "attempts must be >= 1");
}

inline void validate(const HumanRating& r) {
  using detail::require;
  require(!r.item_id.empty() && !r.model_id.empty() && !r.annotator_id.empty() &&
              !r.session_id.empty(),
          "HumanRating", "ids must be non-empty");
  require(r.overall >= 1 && r.overall <= 5, "HumanRating", "overall outside 1..5");
  require(r.language_quality >= 1 && r.language_quality <= 5, "HumanRating",
          "language_quality outside 1..5");
}

inline void validate(const RunManifest& m) {
  using detail::require;
  require(!m.run_id.empty(), "RunManifest", "run_id is empty");
  require(detail::is_lower_hex(m.benchmark_sha256, 64), "RunManifest",
          "benchmark_sha256 must be a sha256 digest");
  require(m.adapter_configs.is_array(), "RunManifest", "adapter_configs must be a list");
  for (const auto& a : m.adapter_configs)
    require(a.is_object(), "RunManifest", "adapter config must be an object");
  require(m.judge_config.is_null() || m.judge_config.is_object(), "RunManifest",
          "judge_config must be an object or null");
  require(m.config.is_object(), "RunManifest", "config must be an object");
  require(m.artifacts.is_object(), "RunManifest", "artifacts must be an object");
  for (const auto& [k, v] : m.artifacts.items())
    require(v.is_string(), "RunManifest", "artifact '" + k + "' must be a path string");
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail {

/// Pulls typed fields out of a JSON object and tracks which keys were used so
/// leftovers can be rejected or routed into a meta map.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string type) : obj_(obj), type_(std::move(type)) {
    if (!obj_.is_object()) throw InvariantViolation(type_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& raw(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) throw InvariantViolation(type_ + ": missing field '" + key + "'");
    seen_.insert(key);
    return *it;
  }

  std::string str(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw InvariantViolation(type_ + ": field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::optional<std::string> opt_str(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return str(key);
  }

  std::int64_t integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer())
      throw InvariantViolation(type_ + ": field '" + key + "' must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX)
      throw InvariantViolation(type_ + ": field '" + key + "' out of range");
    return v.get<std::int64_t>();
  }

  int small_int(const std::string& key) {
    auto v = integer(key);
    if (v < INT32_MIN || v > INT32_MAX)
      throw InvariantViolation(type_ + ": field '" + key + "' out of range");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw InvariantViolation(type_ + ": field '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw InvariantViolation(type_ + ": field '" + key + "' must be a number");
    return v.get<double>();
  }

  /// Keys not consumed so far.
  json leftovers() const {
    json out = json::object();
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) out[it.key()] = it.value();
    return out;
  }

  void reject_unknown() const {
    auto rest = leftovers();
    if (!rest.empty())
      throw InvariantViolation(type_ + ": unknown field '" + rest.begin().key() + "'");
  }

 private:
  const json& obj_;
  std::string type_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json encode(const AudioAsset& a) {
  return json{{"uri", a.uri},
              {"format", a.format},
              {"sample_rate_hz", a.sample_rate_hz},
              {"duration_s", a.duration_s},
              {"sha256", a.sha256}};
}

inline json encode(const BenchmarkItem& item) {
  json j{{"id", item.id},
         {"language", item.language.code()},
         {"task", to_string(item.task)},
         {"audio", encode(item.audio)},
         {"reference", item.reference},
         {"meta", item.meta}};
  if (item.text_instruction) j["text_instruction"] = *item.text_instruction;
  return j;
}

inline json encode(const Part& p) {
  if (auto* a = std::get_if<AudioAsset>(&p)) return json{{"audio", encode(*a)}};
  return json{{"text", std::get<TextPart>(p).text}};
}

inline json encode(const Conversation& c) {
  json turns = json::array();
  for (const Turn& t : c.turns) {
    json parts = json::array();
    for (const Part& p : t.parts) parts.push_back(encode(p));
    turns.push_back(json{{"role", t.role == Role::user ? "user" : "assistant"}, {"parts", parts}});
  }
  return json{{"id", c.id},
              {"task", to_string(c.task)},
              {"language", c.language.code()},
              {"turns", turns},
              {"source", c.source}};
}

inline json encode(const ModelResponse& r) {
  return json{{"item_id", r.item_id},
              {"model_id", r.model_id},
              {"text", r.text},
              {"gen_config_hash", r.gen_config_hash},
              {"latency_ms", r.latency_ms},
              {"created_at", r.created_at.to_string()}};
}

inline json encode(const JudgeVerdict& v) {
  return json{{"item_id", v.item_id}, {"model_id", v.model_id}, {"judge_id", v.judge_id},
              {"score", v.score},     {"raw", v.raw},           {"attempts", v.attempts}};
}

inline json encode(const HumanRating& r) {
  return json{{"item_id", r.item_id},
              {"model_id", r.model_id},
              {"annotator_id", r.annotator_id},
              {"overall", r.overall},
              {"language_quality", r.language_quality},
              {"session_id", r.session_id},
              {"timestamp", r.timestamp.to_string()}};
}

inline json encode(const RunManifest& m) {
  return json{{"run_id", m.run_id},
              {"benchmark_sha256", m.benchmark_sha256},
              {"adapter_configs", m.adapter_configs},
              {"judge_config", m.judge_config},
              {"seed", m.seed},
              {"created_at", m.created_at.to_string()},
              {"config", m.config},
              {"artifacts", m.artifacts}};
}

template <class T>
T decode(const json& j);

template <>
inline AudioAsset decode<AudioAsset>(const json& j) {
  detail::FieldReader f(j, "AudioAsset");
  AudioAsset a;
  a.uri = f.str("uri");
  a.format = f.str("format");
  a.sample_rate_hz = f.small_int("sample_rate_hz");
  a.duration_s = f.number("duration_s");
  a.sha256 = f.str("sha256");
  f.reject_unknown();
  return a;
}

/// Decodes a benchmark item without the per-item content invariants
/// (reference presence, instruction/task agreement). The benchmark validator
/// uses this so such defects surface as violations instead of load errors.
inline BenchmarkItem decode_item_lenient(const json& j) {
  detail::FieldReader f(j, "BenchmarkItem");
  BenchmarkItem item;
  item.id = f.str("id");
  item.language = Language::parse(f.str("language"));
  item.task = parse_benchmark_task(f.str("task"));
  item.audio = decode<AudioAsset>(f.raw("audio"));
  item.text_instruction = f.opt_str("text_instruction");
  item.reference = f.has("reference") ? f.str("reference") : std::string();
  if (f.has("meta")) {
    item.meta = f.raw("meta");
    if (!item.meta.is_object()) throw InvariantViolation("BenchmarkItem: meta must be an object");
  }
  // Unknown top-level fields are preserved in meta.
  const json rest = f.leftovers();
  for (const auto& [k, v] : rest.items()) {
    if (item.meta.contains(k))
      throw InvariantViolation("BenchmarkItem: field '" + k + "' duplicated in meta");
    item.meta[k] = v;
  }
  return item;
}

template <>
inline BenchmarkItem decode<BenchmarkItem>(const json& j) {
  if (j.is_object() && !j.contains("reference"))
    throw InvariantViolation("BenchmarkItem: missing field 'reference'");
  return decode_item_lenient(j);
}

template <>
inline Conversation decode<Conversation>(const json& j) {
  detail::FieldReader f(j, "Conversation");
  Conversation c;
  c.id = f.str("id");
  c.task = parse_training_task(f.str("task"));
  c.language = Language::parse(f.str("language"));
  c.source = f.str("source");
  const json& turns = f.raw("turns");
  if (!turns.is_array()) throw InvariantViolation("Conversation: turns must be a list");
  for (const json& tj : turns) {
    detail::FieldReader tf(tj, "Conversation turn");
    Turn t;
    auto role = tf.str("role");
    if (role == "user") t.role = Role::user;
    else if (role == "assistant") t.role = Role::assistant;
    else throw InvariantViolation("Conversation: unknown role '" + role + "'");
    const json& parts = tf.raw("parts");
    if (!parts.is_array()) throw InvariantViolation("Conversation: parts must be a list");
    for (const json& pj : parts) {
      detail::FieldReader pf(pj, "Conversation part");
      if (pf.has("audio")) t.parts.emplace_back(decode<AudioAsset>(pf.raw("audio")));
      else t.parts.emplace_back(TextPart{pf.str("text")});
      pf.reject_unknown();
    }
    tf.reject_unknown();
    c.turns.push_back(std::move(t));
  }
  f.reject_unknown();
  return c;
}

template <>
inline ModelResponse decode<ModelResponse>(const json& j) {
  detail::FieldReader f(j, "ModelResponse");
  ModelResponse r;
  r.item_id = f.str("item_id");
  r.model_id = f.str("model_id");
  r.text = f.str("text");
  r.gen_config_hash = f.str("gen_config_hash");
  r.latency_ms = f.integer("latency_ms");
  r.created_at = Timestamp::parse(f.str("created_at"));
  f.reject_unknown();
  return r;
}

template <>
inline JudgeVerdict decode<JudgeVerdict>(const json& j) {
  detail::FieldReader f(j, "JudgeVerdict");
  JudgeVerdict v;
  v.item_id = f.str("item_id");
  v.model_id = f.str("model_id");
  v.judge_id = f.str("judge_id");
  v.score = f.small_int("score");
  v.raw = f.str("raw");
  v.attempts = f.small_int("attempts");
  f.reject_unknown();
  return v;
}

template <>
inline HumanRating decode<HumanRating>(const json& j) {
  detail::FieldReader f(j, "HumanRating");
  HumanRating r;
  r.item_id = f.str("item_id");
  r.model_id = f.str("model_id");
  r.annotator_id = f.str("annotator_id");
  r.overall = f.small_int("overall");
  r.language_quality = f.small_int("language_quality");
  r.session_id = f.str("session_id");
  r.timestamp = Timestamp::parse(f.str("timestamp"));
  f.reject_unknown();
  return r;
}

template <>
inline RunManifest decode<RunManifest>(const json& j) {
  detail::FieldReader f(j, "RunManifest");
  RunManifest m;
  m.run_id = f.str("run_id");
  m.benchmark_sha256 = f.str("benchmark_sha256");
  m.adapter_configs = f.raw("adapter_configs");
  m.judge_config = f.raw("judge_config");
  m.seed = f.unsigned_int("seed");
  m.created_at = Timestamp::parse(f.str("created_at"));
  m.config = f.raw("config");
  m.artifacts = f.raw("artifacts");
  f.reject_unknown();
  return m;
}

/// Canonical single-line dump: sorted keys, compact separators, UTF-8.
inline std::string canonical_dump(const json& j) {
  try {
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::type_error& e) {
    throw InvariantViolation(std::string("record is not valid UTF-8: ") + e.what());
  }
}

template <class T>
std::string serialize_record(const T& record) {
  validate(record);
  return canonical_dump(encode(record));
}

template <class T>
T parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!j.is_object()) throw ParseError("record line is not a JSON object");
  T record = decode<T>(j);
  validate(record);
  return record;
}

}  // namespace audiojudge
