#pragma once

// Benchmark task registry, composition profiles and the benchmark validator,
// plus the per-task rubric store used by the judge.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "audiojudge/error.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

/// One of the 14 benchmark tasks. The translation task is one family with two
/// directional variants; every other family has a single variant.
struct TaskSpec {
  std::string family;
  std::vector<BenchmarkTask> variants;
  std::string description;
  bool requires_text_instruction = true;
  bool audio_only = false;
};

inline const std::vector<TaskSpec>& task_registry() {
  using T = BenchmarkTask;
  auto spec = [](std::string family, std::vector<T> variants, std::string description) {
    bool audio_only = is_audio_only(variants.front());
    return TaskSpec{std::move(family), std::move(variants), std::move(description), !audio_only,
                    audio_only};
  };
  static const std::vector<TaskSpec> kRegistry = {
      spec("ASR", {T::ASR}, "Transcribe speech, including accented, informal and multi-sentence clips."),
      spec("S2TT", {T::S2TT_EX, T::S2TT_XE},
           "Translate speech between English and the local language, in both directions."),
      spec("SS", {T::SS}, "Summarize speech under a length or format constraint."),
      spec("SQA", {T::SQA}, "Answer a question about information carried by the speech."),
      spec("CS", {T::CS}, "Handle a customer-service call or dialogue."),
      spec("SAFETY", {T::SAFETY}, "Respond safely when the harmful content is only in the audio."),
      spec("AC", {T::AC}, "Describe non-speech audio in detail."),
      spec("AQA", {T::AQA}, "Answer questions about sound events, their order and duration."),
      spec("SKI", {T::SKI}, "Identify speaker traits: count, gender, age, accent, turn-taking."),
      spec("SER", {T::SER}, "Recognize emotion or sentiment from paralinguistic cues."),
      spec("LIFE", {T::LIFE}, "Answer an everyday question asked in the audio."),
      spec("MED", {T::MED}, "Advise on a medical question described by a patient in the audio."),
      spec("MATH", {T::MATH}, "Solve a secondary-school math problem posed in the audio."),
      spec("FACT", {T::FACT}, "Answer a factual question posed in the audio."),
  };
  return kRegistry;
}

inline const TaskSpec& task_spec(BenchmarkTask task) {
  for (const auto& s : task_registry())
    if (std::find(s.variants.begin(), s.variants.end(), task) != s.variants.end()) return s;
  throw InvariantViolation("task " + to_string(task) + " is not in the registry");
}

// ---------------------------------------------------------------------------
// Composition profile

/// Expected item count per (language, task). Any (language, task) cell not
/// listed is forbidden; languages not listed are rejected.
struct CompositionProfile {
  std::map<std::string, std::map<BenchmarkTask, std::size_t>> expected;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [l, cells] : expected)
      for (const auto& [t, c] : cells) n += c;
    return n;
  }

  json to_json() const {
    json langs = json::object();
    for (const auto& [l, cells] : expected) {
      json row = json::object();
      for (const auto& [t, c] : cells) row[to_string(t)] = c;
      langs[l] = row;
    }
    return json{{"languages", langs}, {"total", total()}};
  }

  static CompositionProfile from_json(const json& j) {
    if (!j.is_object() || !j.contains("languages") || !j["languages"].is_object())
      throw ProfileError("profile must be an object with a 'languages' map");
    CompositionProfile p;
    for (auto& [code, row] : j["languages"].items()) {
      try {
        Language::parse(code);
      } catch (const InvariantViolation& e) {
        throw ProfileError(e.what());
      }
      if (!row.is_object()) throw ProfileError("profile row for '" + code + "' must be an object");
      auto& cells = p.expected[code];
      for (auto& [task, count] : row.items()) {
        auto t = find_benchmark_task(task);
        if (!t) throw ProfileError("profile names unknown task '" + task + "'");
        if (!count.is_number_unsigned())
          throw ProfileError("profile count for " + code + "/" + task + " must be a non-negative integer");
        if (count.get<std::size_t>() > 0) cells[*t] = count.get<std::size_t>();
      }
    }
    if (j.contains("total") && (!j["total"].is_number_unsigned() ||
                                j["total"].get<std::size_t>() != p.total()))
      throw ProfileError("profile total does not equal the sum of its cells (" +
                         std::to_string(p.total()) + ")");
    return p;
  }

  /// Shipped default: 10 items per task and language; the SEA languages also
  /// carry both translation directions, English carries no translation task.
  static CompositionProfile standard() {
    CompositionProfile p;
    for (const char* code : {"en", "id", "th", "vi"}) {
      auto& cells = p.expected[code];
      for (auto t : kAllBenchmarkTasks) {
        bool translation = t == BenchmarkTask::S2TT_EX || t == BenchmarkTask::S2TT_XE;
        if (translation && std::string(code) == "en") continue;
        cells[t] = 10;
      }
    }
    return p;
  }
};

// ---------------------------------------------------------------------------
// Benchmark and validation

struct Benchmark {
  std::vector<BenchmarkItem> items;
  std::string sha256;

  /// Digest over the sorted canonical item lines, so it depends on item
  /// content only, not file order.
  static std::string digest(const std::vector<BenchmarkItem>& items) {
    std::vector<std::string> lines;
    lines.reserve(items.size());
    for (const auto& item : items) lines.push_back(canonical_dump(encode(item)));
    std::sort(lines.begin(), lines.end());
    Sha256 h;
    for (const auto& line : lines) h.update(line).update("\n");
    return h.hex_digest();
  }

  static Benchmark from_items(std::vector<BenchmarkItem> items) {
    Benchmark b;
    b.sha256 = digest(items);
    b.items = std::move(items);
    return b;
  }

  const BenchmarkItem* find(const std::string& id) const {
    for (const auto& item : items)
      if (item.id == id) return &item;
    return nullptr;
  }
};

/// Loads an items file. Item-content defects that the validator reports
/// (missing reference, instruction presence) are tolerated here; malformed
/// lines and schema errors throw.
inline Benchmark load_benchmark(const fs::path& path) {
  std::vector<BenchmarkItem> items;
  std::size_t lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      items.push_back(decode_item_lenient(j));
      validate(items.back().audio);
    } catch (const InvariantViolation& e) {
      throw InvariantViolation(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Benchmark::from_items(std::move(items));
}

inline void write_benchmark(const fs::path& path, const Benchmark& bench) {
  std::string out;
  for (const auto& item : bench.items) out += canonical_dump(encode(item)) + "\n";
  atomic_write_text(path, out);
}

struct Violation {
  std::string kind;  // duplicate_id, missing_reference, instruction_mismatch,
                     // count_mismatch, forbidden_task, unknown_language
  std::string language;
  std::string task;
  std::vector<std::string> item_ids;
  std::string message;

  std::string to_line() const {
    std::string ids;
    for (const auto& id : item_ids) ids += (ids.empty() ? "" : ",") + id;
    return kind + "\t" + (language.empty() ? "-" : language) + "\t" + (task.empty() ? "-" : task) +
           "\t" + (ids.empty() ? "-" : ids) + "\t" + message;
  }

  json to_json() const {
    return json{{"kind", kind}, {"language", language}, {"task", task},
                {"item_ids", item_ids}, {"message", message}};
  }

  friend auto operator<=>(const Violation& a, const Violation& b) {
    return std::tie(a.kind, a.language, a.task, a.item_ids, a.message) <=>
           std::tie(b.kind, b.language, b.task, b.item_ids, b.message);
  }
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;  // sorted
  std::size_t item_count = 0;
  bool ok() const { return violations.empty(); }
};

/// Checks a benchmark against a composition profile. Violations are data;
/// the report is sorted so item order never affects it.
inline ValidationReport validate_benchmark(const Benchmark& bench, const CompositionProfile& profile) {
  ValidationReport report;
  report.item_count = bench.items.size();
  auto& out = report.violations;

  std::map<std::string, std::vector<std::string>> by_id;
  std::map<std::pair<std::string, BenchmarkTask>, std::vector<std::string>> cells;
  for (const auto& item : bench.items) {
    by_id[item.id].push_back(item.id);
    const std::string code = item.language.code();
    const std::string task = to_string(item.task);
    if (item.reference.empty() || item.reference.find_first_not_of(" \t\r\n") == std::string::npos)
      out.push_back({"missing_reference", code, task, {item.id}, "item has no reference answer"});
    const TaskSpec& spec = task_spec(item.task);
    bool has_instruction = item.text_instruction && !item.text_instruction->empty();
    if (has_instruction != spec.requires_text_instruction)
      out.push_back({"instruction_mismatch", code, task, {item.id},
                     spec.requires_text_instruction ? "task requires a text instruction"
                                                    : "audio-only task must not carry a text instruction"});
    cells[{code, item.task}].push_back(item.id);
  }
  for (const auto& [id, ids] : by_id)
    if (ids.size() > 1)
      out.push_back({"duplicate_id", "", "", {id},
                     "id appears " + std::to_string(ids.size()) + " times"});

  for (auto& [cell, ids] : cells) {
    const auto& [code, task] = cell;
    std::sort(ids.begin(), ids.end());
    auto row = profile.expected.find(code);
    if (row == profile.expected.end()) {
      out.push_back({"unknown_language", code, to_string(task), ids,
                     "language is not part of the composition profile"});
      continue;
    }
    auto want = row->second.find(task);
    if (want == row->second.end())
      out.push_back({"forbidden_task", code, to_string(task), ids,
                     "task is not expected for this language"});
  }
  for (const auto& [code, row] : profile.expected) {
    for (const auto& [task, expected] : row) {
      auto it = cells.find({code, task});
      std::size_t got = it == cells.end() ? 0 : it->second.size();
      if (got != expected)
        out.push_back({"count_mismatch", code, to_string(task), {},
                       "expected " + std::to_string(expected) + " items, found " +
                           std::to_string(got)});
    }
  }
  std::sort(out.begin(), out.end());
  return report;
}

/// Deterministic synthetic benchmark matching a profile exactly; used for
/// the shipped example manifest and tests.
inline Benchmark make_synthetic_benchmark(const CompositionProfile& profile,
                                          const std::optional<fs::path>& media_dir = std::nullopt) {
  std::vector<BenchmarkItem> items;
  for (const auto& [code, row] : profile.expected) {
    for (const auto& [task, count] : row) {
      for (std::size_t n = 1; n <= count; ++n) {
        BenchmarkItem item;
        char suffix[8];
        std::snprintf(suffix, sizeof suffix, "%02zu", n);
        item.id = code + "-" + to_string(task) + "-" + suffix;
        item.language = Language::parse(code);
        item.task = task;
        const std::string bytes = "SYNTHETIC-AUDIO|" + item.id;
        item.audio = AudioAsset{"media/" + item.id + ".wav", "wav", 16000,
                                3.0 + static_cast<double>(n % 7), sha256_hex(bytes)};
        if (!is_audio_only(task))
          item.text_instruction = "Synthetic " + to_string(task) + " instruction #" + suffix + ".";
        item.reference = "Synthetic reference answer for " + item.id + ".";
        item.meta = json{{"synthetic", true}};
        if (media_dir) atomic_write_text(*media_dir / item.audio.uri, bytes);
        items.push_back(std::move(item));
      }
    }
  }
  return Benchmark::from_items(std::move(items));
}

// ---------------------------------------------------------------------------
// Rubrics

struct Rubric {
  BenchmarkTask task = BenchmarkTask::ASR;
  std::array<std::string, 5> anchors;  // anchors[s - 1] describes score s
  std::optional<Language> language;
  friend bool operator==(const Rubric&, const Rubric&) = default;
};

inline void validate(const Rubric& r) {
  for (std::size_t i = 0; i < r.anchors.size(); ++i)
    if (r.anchors[i].empty())
      throw InvariantViolation("rubric for " + to_string(r.task) + " lacks anchor " +
                               std::to_string(i + 1));
}

inline Rubric parse_rubric(const json& j) {
  detail::FieldReader f(j, "Rubric");
  Rubric r;
  r.task = parse_benchmark_task(f.str("task"));
  if (auto code = f.opt_str("language")) r.language = Language::parse(*code);
  const json& anchors = f.raw("anchors");
  if (!anchors.is_object()) throw InvariantViolation("Rubric: anchors must be an object");
  for (auto& [k, v] : anchors.items()) {
    if (k.size() != 1 || k[0] < '1' || k[0] > '5' || !v.is_string())
      throw InvariantViolation("Rubric: anchors must map \"1\"..\"5\" to text");
    r.anchors[static_cast<std::size_t>(k[0] - '1')] = v.get<std::string>();
  }
  f.reject_unknown();
  validate(r);
  return r;
}

inline json encode(const Rubric& r) {
  json anchors = json::object();
  for (std::size_t i = 0; i < 5; ++i) anchors[std::to_string(i + 1)] = r.anchors[i];
  json j{{"task", to_string(r.task)}, {"anchors", anchors}};
  if (r.language) j["language"] = r.language->code();
  return j;
}

class RubricStore {
 public:
  void add(Rubric r) {
    validate(r);
    auto key = std::make_pair(r.task, r.language ? r.language->code() : std::string());
    if (!rubrics_.emplace(key, std::move(r)).second)
      throw ParseError("duplicate rubric for " + to_string(key.first) +
                       (key.second.empty() ? "" : "/" + key.second));
  }

  static RubricStore load(const fs::path& path) {
    RubricStore store;
    for (const auto& line : read_lines(path)) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
      }
      store.add(parse_rubric(j));
    }
    return store;
  }

  /// Most specific match: (task, language) before (task, any language).
  const Rubric& get(BenchmarkTask task, const Language& language) const {
    if (auto it = rubrics_.find({task, language.code()}); it != rubrics_.end()) return it->second;
    if (auto it = rubrics_.find({task, std::string()}); it != rubrics_.end()) return it->second;
    throw RubricMissing("no rubric for " + to_string(task) + "/" + language.code());
  }

  std::size_t size() const { return rubrics_.size(); }

 private:
  std::map<std::pair<BenchmarkTask, std::string>, Rubric> rubrics_;
};

inline const Rubric& get_rubric(BenchmarkTask task, const Language& language,
                                const RubricStore& store) {
  return store.get(task, language);
}

}  // namespace audiojudge
