#pragma once

// Score aggregation and judge-vs-human statistics: grouped means, pairwise
// verdicts derived from single-answer scores, agreement with and without
// ties, and Pearson correlation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "audiojudge/error.hpp"
#include "audiojudge/eval.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

enum class JudgeKind { human, llm };
enum class Axis { overall, language_quality };

inline const char* to_string(JudgeKind k) { return k == JudgeKind::human ? "human" : "llm"; }
inline const char* to_string(Axis a) { return a == Axis::overall ? "overall" : "language_quality"; }

struct ScoreEntry {
  std::string item_id;
  std::string model_id;
  JudgeKind kind = JudgeKind::llm;
  Axis axis = Axis::overall;
  int score = 0;
  std::string rater;  // annotator id or judge id
  Language language;
  BenchmarkTask task = BenchmarkTask::ASR;
  friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

class ScoreTable {
 public:
  void add(ScoreEntry e) {
    if (e.score < 1 || e.score > 5)
      throw InvariantViolation("score " + std::to_string(e.score) + " outside 1..5");
    auto key = std::make_tuple(e.item_id, e.model_id, e.kind, e.axis, e.rater);
    if (!keys_.insert(key).second)
      throw InvariantViolation("duplicate " + std::string(to_string(e.kind)) + " " +
                               to_string(e.axis) + " score for " + e.item_id + "/" + e.model_id +
                               " by " + e.rater);
    entries_.push_back(std::move(e));
  }

  void add_verdict(const JudgeVerdict& v, const BenchmarkItem& item) {
    add({v.item_id, v.model_id, JudgeKind::llm, Axis::overall, v.score, v.judge_id, item.language,
         item.task});
  }

  void add_rating(const HumanRating& r, const BenchmarkItem& item) {
    add({r.item_id, r.model_id, JudgeKind::human, Axis::overall, r.overall, r.annotator_id,
         item.language, item.task});
    add({r.item_id, r.model_id, JudgeKind::human, Axis::language_quality, r.language_quality,
         r.annotator_id, item.language, item.task});
  }

  const std::vector<ScoreEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool has(JudgeKind kind) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const ScoreEntry& e) { return e.kind == kind; });
  }

 private:
  std::vector<ScoreEntry> entries_;
  std::set<std::tuple<std::string, std::string, JudgeKind, Axis, std::string>> keys_;
};

// ---------------------------------------------------------------------------
// Means

enum class GroupField { language, task, model, kind, axis };

inline const char* to_string(GroupField f) {
  switch (f) {
    case GroupField::language: return "language";
    case GroupField::task: return "task";
    case GroupField::model: return "model";
    case GroupField::kind: return "kind";
    case GroupField::axis: return "axis";
  }
  return "?";
}

inline std::string field_value(const ScoreEntry& e, GroupField f) {
  switch (f) {
    case GroupField::language: return e.language.code();
    case GroupField::task: return to_string(e.task);
    case GroupField::model: return e.model_id;
    case GroupField::kind: return to_string(e.kind);
    case GroupField::axis: return to_string(e.axis);
  }
  return {};
}

/// Mean kept as an exact sum/count pair.
struct GroupMean {
  std::map<std::string, std::string> key;  // field name -> value
  std::int64_t sum = 0;
  std::int64_t count = 0;

  double mean() const { return static_cast<double>(sum) / static_cast<double>(count); }

  /// One decimal, half rounded up, computed on the exact ratio.
  std::string display() const {
    std::int64_t tenths = (20 * sum + count) / (2 * count);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%lld", static_cast<long long>(tenths / 10),
                  static_cast<long long>(tenths % 10));
    return buf;
  }

  friend bool operator==(const GroupMean&, const GroupMean&) = default;
};

inline std::vector<GroupMean> mean_scores(const ScoreTable& table,
                                          const std::vector<GroupField>& group_by) {
  if (table.empty()) throw EmptySelection("mean_scores: no scores selected");
  std::map<std::vector<std::string>, GroupMean> groups;
  for (const auto& e : table.entries()) {
    std::vector<std::string> values;
    for (auto f : group_by) values.push_back(field_value(e, f));
    GroupMean& g = groups[values];
    if (g.count == 0)
      for (std::size_t i = 0; i < group_by.size(); ++i) g.key[to_string(group_by[i])] = values[i];
    g.sum += e.score;
    g.count += 1;
  }
  std::vector<GroupMean> out;
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

template <class Pred>
ScoreTable select(const ScoreTable& table, Pred&& keep) {
  ScoreTable out;
  for (const auto& e : table.entries())
    if (keep(e)) out.add(e);
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise verdicts and agreement

enum class Verdict { A, B, tie };

inline const char* to_string(Verdict v) {
  return v == Verdict::A ? "A" : v == Verdict::B ? "B" : "tie";
}

/// Outcome for one item and one unordered model pair; model_a < model_b.
struct PairVerdict {
  std::string item_id;
  std::string model_a;
  std::string model_b;
  Verdict verdict = Verdict::tie;
  Language language;
  BenchmarkTask task = BenchmarkTask::ASR;

  auto key() const { return std::tie(item_id, model_a, model_b); }
  friend bool operator==(const PairVerdict&, const PairVerdict&) = default;
};

/// Per (item, model) mean across raters, then one verdict per model pair.
inline std::vector<PairVerdict> to_pairwise(const ScoreTable& table, JudgeKind kind, Axis axis) {
  struct Acc {
    std::int64_t sum = 0, count = 0;
    Language language;
    BenchmarkTask task = BenchmarkTask::ASR;
  };
  std::map<std::string, std::map<std::string, Acc>> by_item;  // item -> model -> acc
  for (const auto& e : table.entries()) {
    if (e.kind != kind || e.axis != axis) continue;
    Acc& a = by_item[e.item_id][e.model_id];
    a.sum += e.score;
    a.count += 1;
    a.language = e.language;
    a.task = e.task;
  }
  std::vector<PairVerdict> out;
  for (const auto& [item, models] : by_item) {
    for (auto a = models.begin(); a != models.end(); ++a) {
      for (auto b = std::next(a); b != models.end(); ++b) {
        // Compare sum_a/count_a with sum_b/count_b without division.
        std::int64_t lhs = a->second.sum * b->second.count;
        std::int64_t rhs = b->second.sum * a->second.count;
        Verdict v = lhs > rhs ? Verdict::A : lhs < rhs ? Verdict::B : Verdict::tie;
        out.push_back({item, a->first, b->first, v, a->second.language, a->second.task});
      }
    }
  }
  return out;
}

enum class AgreementMode { with_tie, without_tie };

inline const char* to_string(AgreementMode m) {
  return m == AgreementMode::with_tie ? "with_tie" : "without_tie";
}

struct AgreementResult {
  std::size_t matches = 0;
  std::size_t compared = 0;           // denominator
  std::optional<double> value;        // absent when compared == 0
  friend bool operator==(const AgreementResult&, const AgreementResult&) = default;
};

inline AgreementResult agreement(const std::vector<PairVerdict>& first,
                                 const std::vector<PairVerdict>& second, AgreementMode mode) {
  using Key = std::tuple<std::string, std::string, std::string>;
  auto index = [](const std::vector<PairVerdict>& vs) {
    std::map<Key, Verdict> m;
    for (const auto& v : vs) {
      if (v.model_a >= v.model_b)
        throw InvariantViolation("pair verdict " + v.item_id + " is not in canonical model order");
      if (!m.emplace(Key{v.item_id, v.model_a, v.model_b}, v.verdict).second)
        throw KeyMismatch("duplicate pair verdict for " + v.item_id + " " + v.model_a + "/" +
                          v.model_b);
    }
    return m;
  };
  auto a = index(first), b = index(second);
  if (a.size() != b.size())
    throw KeyMismatch("verdict sets differ in size (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  AgreementResult r;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      throw KeyMismatch("verdict sets differ at item " + std::get<0>(ia->first));
    if (mode == AgreementMode::without_tie &&
        (ia->second == Verdict::tie || ib->second == Verdict::tie))
      continue;
    ++r.compared;
    if (ia->second == ib->second) ++r.matches;
  }
  if (r.compared > 0)
    r.value = static_cast<double>(r.matches) / static_cast<double>(r.compared);
  return r;
}

/// Integer percent, halves rounded up.
inline int to_percent(double fraction) {
  return static_cast<int>(std::floor(fraction * 100.0 + 0.5 + 1e-9));
}

inline std::string percent_or_na(const std::optional<double>& v) {
  return v ? std::to_string(to_percent(*v)) + "%" : std::string("NA");
}

struct ModeAgreement {
  AgreementResult with_tie;
  AgreementResult without_tie;
};

struct AgreementReport {
  Axis axis = Axis::overall;
  std::map<std::string, ModeAgreement> per_language;
  std::optional<double> average_with_tie;     // unweighted mean over languages
  std::optional<double> average_without_tie;
  std::size_t pairs = 0;
  static constexpr double kRandomWithTie = 1.0 / 3.0;
  static constexpr double kRandomWithoutTie = 1.0 / 2.0;

  json to_json() const {
    auto res = [](const AgreementResult& r) {
      return json{{"matches", r.matches},
                  {"compared", r.compared},
                  {"value", r.value ? json(*r.value) : json(nullptr)},
                  {"percent", r.value ? json(to_percent(*r.value)) : json(nullptr)}};
    };
    json langs = json::object();
    for (const auto& [code, m] : per_language)
      langs[code] = json{{"with_tie", res(m.with_tie)}, {"without_tie", res(m.without_tie)}};
    auto avg = [](const std::optional<double>& v) {
      return json{{"value", v ? json(*v) : json(nullptr)},
                  {"percent", v ? json(to_percent(*v)) : json(nullptr)}};
    };
    return json{{"axis", to_string(axis)},
                {"pairs", pairs},
                {"per_language", langs},
                {"average", json{{"with_tie", avg(average_with_tie)},
                                 {"without_tie", avg(average_without_tie)}}},
                {"random_baseline", json{{"with_tie", kRandomWithTie},
                                         {"without_tie", kRandomWithoutTie}}}};
  }
};

inline std::optional<double> mean_of_present(const std::vector<std::optional<double>>& values) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline AgreementReport agreement_from_verdicts(const std::vector<PairVerdict>& human,
                                               const std::vector<PairVerdict>& llm,
                                               Axis axis = Axis::overall) {
  AgreementReport report;
  report.axis = axis;
  report.pairs = human.size();
  std::map<std::string, std::pair<std::vector<PairVerdict>, std::vector<PairVerdict>>> split;
  for (const auto& v : human) split[v.language.code()].first.push_back(v);
  for (const auto& v : llm) split[v.language.code()].second.push_back(v);
  std::vector<std::optional<double>> with, without;
  for (const auto& [code, parts] : split) {
    ModeAgreement m{agreement(parts.first, parts.second, AgreementMode::with_tie),
                    agreement(parts.first, parts.second, AgreementMode::without_tie)};
    with.push_back(m.with_tie.value);
    without.push_back(m.without_tie.value);
    report.per_language[code] = m;
  }
  // Whole-set check so a key present under different languages is caught.
  agreement(human, llm, AgreementMode::with_tie);
  report.average_with_tie = mean_of_present(with);
  report.average_without_tie = mean_of_present(without);
  return report;
}

/// Compares human and LLM pairwise verdicts on the overall axis. Only
/// (item, model) responses scored by both kinds take part.
inline AgreementReport agreement_report(const ScoreTable& table) {
  if (!table.has(JudgeKind::human) || !table.has(JudgeKind::llm))
    throw EmptySelection("agreement needs both human and LLM scores");
  std::set<std::pair<std::string, std::string>> human_keys, llm_keys;
  for (const auto& e : table.entries()) {
    if (e.axis != Axis::overall) continue;
    (e.kind == JudgeKind::human ? human_keys : llm_keys).insert({e.item_id, e.model_id});
  }
  ScoreTable shared = select(table, [&](const ScoreEntry& e) {
    return human_keys.count({e.item_id, e.model_id}) && llm_keys.count({e.item_id, e.model_id});
  });
  return agreement_from_verdicts(to_pairwise(shared, JudgeKind::human, Axis::overall),
                                 to_pairwise(shared, JudgeKind::llm, Axis::overall));
}

// ---------------------------------------------------------------------------
// Correlation

/// Sample Pearson coefficient, computed with centered sums.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw DegenerateInput("pearson: series lengths differ (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  if (x.size() < 2) throw DegenerateInput("pearson: need at least two pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DegenerateInput("pearson: a series has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

enum class CorrelationGrouping { per_language, per_model, per_task };
enum class CorrelationPairing { per_response, task_mean };

inline const char* to_string(CorrelationGrouping g) {
  switch (g) {
    case CorrelationGrouping::per_language: return "per_language";
    case CorrelationGrouping::per_model: return "per_model";
    case CorrelationGrouping::per_task: return "per_task";
  }
  return "?";
}

inline const char* to_string(CorrelationPairing p) {
  return p == CorrelationPairing::per_response ? "per_response" : "task_mean";
}

inline CorrelationGrouping parse_grouping(std::string_view s) {
  if (s == "language" || s == "per_language") return CorrelationGrouping::per_language;
  if (s == "model" || s == "per_model") return CorrelationGrouping::per_model;
  if (s == "task" || s == "per_task") return CorrelationGrouping::per_task;
  throw PreconditionError("unknown correlation grouping '" + std::string(s) + "'");
}

inline CorrelationPairing parse_pairing(std::string_view s) {
  if (s == "response" || s == "per_response") return CorrelationPairing::per_response;
  if (s == "task_mean") return CorrelationPairing::task_mean;
  throw PreconditionError("unknown correlation pairing '" + std::string(s) + "'");
}

struct GroupCorrelation {
  std::optional<double> r;  // NA when the group is degenerate
  std::size_t n = 0;
  std::string note;
};

struct CorrelationReport {
  CorrelationGrouping grouping = CorrelationGrouping::per_language;
  CorrelationPairing pairing = CorrelationPairing::per_response;
  std::map<std::string, GroupCorrelation> groups;
  std::optional<double> average;

  json to_json() const {
    json g = json::object();
    for (const auto& [k, v] : groups) {
      g[k] = json{{"r", v.r ? json(*v.r) : json(nullptr)}, {"n", v.n}};
      if (!v.note.empty()) g[k]["note"] = v.note;
    }
    return json{{"grouping", to_string(grouping)},
                {"pairing", to_string(pairing)},
                {"groups", g},
                {"average", average ? json(*average) : json(nullptr)}};
  }
};

inline CorrelationReport correlation_report(
    const ScoreTable& table, CorrelationGrouping grouping,
    CorrelationPairing pairing = CorrelationPairing::per_response) {
  auto group_of = [&](const ScoreEntry& e) {
    switch (grouping) {
      case CorrelationGrouping::per_language: return e.language.code();
      case CorrelationGrouping::per_model: return e.model_id;
      case CorrelationGrouping::per_task: return to_string(e.task);
    }
    return std::string();
  };
  struct Acc {
    std::int64_t sum = 0, count = 0;
    double mean() const { return static_cast<double>(sum) / static_cast<double>(count); }
  };
  // group -> unit -> (human, llm). A unit is an (item, model) response or a
  // (task, model) cell, depending on the pairing.
  std::map<std::string, std::map<std::pair<std::string, std::string>, std::pair<Acc, Acc>>> cells;
  for (const auto& e : table.entries()) {
    if (e.axis != Axis::overall) continue;
    auto& pair = cells[group_of(e)][{e.item_id, e.model_id}];
    Acc& acc = e.kind == JudgeKind::human ? pair.first : pair.second;
    acc.sum += e.score;
    acc.count += 1;
  }
  // Remember task per response for the task_mean pairing.
  std::map<std::pair<std::string, std::string>, BenchmarkTask> task_of;
  for (const auto& e : table.entries()) task_of[{e.item_id, e.model_id}] = e.task;

  CorrelationReport report;
  report.grouping = grouping;
  report.pairing = pairing;
  std::vector<std::optional<double>> rs;
  for (const auto& [group, units] : cells) {
    std::vector<double> x, y;
    if (pairing == CorrelationPairing::per_response) {
      for (const auto& [unit, hl] : units)
        if (hl.first.count && hl.second.count) {
          x.push_back(hl.first.mean());
          y.push_back(hl.second.mean());
        }
    } else {
      // Each response weighs equally inside its (task, model) cell.
      std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;
      std::map<std::pair<std::string, std::string>, std::size_t> counts;
      for (const auto& [unit, hl] : units) {
        if (!hl.first.count || !hl.second.count) continue;
        auto key = std::make_pair(std::string(to_string(task_of.at(unit))), unit.second);
        sums[key].first += hl.first.mean();
        sums[key].second += hl.second.mean();
        counts[key] += 1;
      }
      for (const auto& [key, s] : sums) {
        x.push_back(s.first / static_cast<double>(counts[key]));
        y.push_back(s.second / static_cast<double>(counts[key]));
      }
    }
    GroupCorrelation gc;
    gc.n = x.size();
    try {
      gc.r = pearson(x, y);
    } catch (const DegenerateInput& e) {
      gc.note = e.what();
    }
    rs.push_back(gc.r);
    report.groups[group] = gc;
  }
  report.average = mean_of_present(rs);
  return report;
}

// ---------------------------------------------------------------------------
// Run-level loading and report files

inline constexpr const char* kHumanRatingsSuffix = ".human.jsonl";

struct RunData {
  RunManifest manifest;
  fs::path manifest_path;
  Benchmark bench;
  std::vector<JudgeVerdict> verdicts;
  std::vector<HumanRating> ratings;
  ScoreTable table;
  std::vector<std::string> models;
};

inline fs::path run_manifest_path(const fs::path& run_dir) {
  if (fs::exists(run_dir / kJudgeManifestFile)) return run_dir / kJudgeManifestFile;
  if (fs::exists(run_dir / kRunManifestFile)) return run_dir / kRunManifestFile;
  throw IoError("no run manifest in " + run_dir.string());
}

inline RunData load_run(const fs::path& run_dir) {
  RunData d;
  d.manifest_path = run_manifest_path(run_dir);
  d.manifest = read_manifest(d.manifest_path);
  d.bench = load_benchmark(run_dir / d.manifest.artifacts.at("benchmark").get<std::string>());
  for (const auto& a : d.manifest.adapter_configs) d.models.push_back(a.at("model_id"));
  std::sort(d.models.begin(), d.models.end());

  auto item_for = [&](const std::string& id) -> const BenchmarkItem& {
    const BenchmarkItem* item = d.bench.find(id);
    if (!item) throw InvariantViolation("score for unknown item " + id);
    return *item;
  };
  for (const auto& model : d.models) {
    auto it = d.manifest.artifacts.find("verdicts/" + model);
    if (it == d.manifest.artifacts.end()) continue;
    for (auto& v : read_records<JudgeVerdict>(run_dir / it->get<std::string>())) {
      d.table.add_verdict(v, item_for(v.item_id));
      d.verdicts.push_back(std::move(v));
    }
  }
  std::vector<fs::path> human_files;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > std::strlen(kHumanRatingsSuffix) &&
        name.compare(name.size() - std::strlen(kHumanRatingsSuffix), std::string::npos,
                     kHumanRatingsSuffix) == 0)
      human_files.push_back(entry.path());
  }
  std::sort(human_files.begin(), human_files.end());
  for (const auto& f : human_files)
    for (auto& r : read_records<HumanRating>(f)) {
      d.table.add_rating(r, item_for(r.item_id));
      d.ratings.push_back(std::move(r));
    }
  return d;
}

inline json means_to_json(const std::vector<GroupMean>& means) {
  json arr = json::array();
  for (const auto& g : means) {
    json row = g.key;
    row["mean"] = g.mean();
    row["display"] = g.display();
    row["n"] = g.count;
    arr.push_back(row);
  }
  return arr;
}

struct RunReport {
  json report;    // report.json
  std::string markdown;
  json plotdata;
};

namespace detail {

inline std::string md_cell(const std::vector<GroupMean>& means,
                           const std::map<std::string, std::string>& want) {
  for (const auto& g : means) {
    bool ok = true;
    for (const auto& [k, v] : want)
      if (g.key.at(k) != v) ok = false;
    if (ok) return g.display();
  }
  return "";
}

}  // namespace detail

/// Builds the report documents for a loaded run. Nothing time-dependent is
/// included so reruns produce identical bytes.
inline RunReport build_report(const RunData& d) {
  RunReport out;
  json& r = out.report;
  r["benchmark_sha256"] = d.manifest.benchmark_sha256;
  r["models"] = d.models;
  r["items"] = d.bench.items.size();
  r["llm_verdicts"] = d.verdicts.size();
  r["human_ratings"] = d.ratings.size();
  if (!d.manifest.judge_config.is_null()) r["judge_id"] = d.manifest.judge_config.value("judge_id", "");

  json scores = json::object();
  std::vector<GroupMean> by_task, by_language;
  if (!d.table.empty()) {
    using F = GroupField;
    by_task = mean_scores(d.table, {F::kind, F::axis, F::task, F::model});
    by_language = mean_scores(d.table, {F::kind, F::axis, F::language, F::model});
    scores["by_task"] = means_to_json(by_task);
    scores["by_language"] = means_to_json(by_language);
    scores["overall"] = means_to_json(mean_scores(d.table, {F::kind, F::axis, F::model}));
  }
  r["scores"] = scores;

  const bool both = d.table.has(JudgeKind::human) && d.table.has(JudgeKind::llm);
  if (both) {
    r["agreement"] = agreement_report(d.table).to_json();
    json corr = json::object();
    for (auto g : {CorrelationGrouping::per_language, CorrelationGrouping::per_model,
                   CorrelationGrouping::per_task})
      for (auto p : {CorrelationPairing::per_response, CorrelationPairing::task_mean})
        corr[std::string(to_string(g)) + "/" + to_string(p)] = correlation_report(d.table, g, p).to_json();
    r["correlation"] = corr;
  }

  // Markdown: per-task table (judge kinds side by side), then agreement.
  std::string& md = out.markdown;
  md += "# Evaluation report\n\n";
  md += "Benchmark sha256: `" + d.manifest.benchmark_sha256 + "`\n\n";
  md += "Items: " + std::to_string(d.bench.items.size()) +
        ", LLM verdicts: " + std::to_string(d.verdicts.size()) +
        ", human ratings: " + std::to_string(d.ratings.size()) + "\n\n";
  std::set<std::string> tasks;
  for (const auto& g : by_task) tasks.insert(g.key.at("task"));
  for (const char* kind : {"human", "llm"}) {
    bool any = std::any_of(by_task.begin(), by_task.end(),
                           [&](const GroupMean& g) { return g.key.at("kind") == kind; });
    if (!any) continue;
    md += std::string("## Mean overall score by task (") + kind + ")\n\n| task |";
    for (const auto& m : d.models) md += " " + m + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < d.models.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& t : tasks) {
      md += "| " + t + " |";
      for (const auto& m : d.models)
        md += " " + detail::md_cell(by_task, {{"kind", kind}, {"axis", "overall"}, {"task", t}, {"model", m}}) + " |";
      md += "\n";
    }
    md += "\n";
  }
  if (both) {
    AgreementReport ag = agreement_report(d.table);
    md += "## Human vs LLM judge agreement\n\n| setup |";
    for (const auto& [code, _] : ag.per_language) md += " " + code + " |";
    md += " avg |\n|---|";
    for (std::size_t i = 0; i <= ag.per_language.size(); ++i) md += "---|";
    md += "\n| with tie (random 33%) |";
    for (const auto& [_, m] : ag.per_language) md += " " + percent_or_na(m.with_tie.value) + " |";
    md += " " + percent_or_na(ag.average_with_tie) + " |\n| without tie (random 50%) |";
    for (const auto& [_, m] : ag.per_language) md += " " + percent_or_na(m.without_tie.value) + " |";
    md += " " + percent_or_na(ag.average_without_tie) + " |\n\n";

    CorrelationReport c = correlation_report(d.table, CorrelationGrouping::per_language);
    md += "## Pearson correlation, human vs LLM (per response)\n\n| group | r | n |\n|---|---|---|\n";
    char buf[64];
    for (const auto& [g, v] : c.groups) {
      if (v.r) std::snprintf(buf, sizeof buf, "%.2f", *v.r);
      md += "| " + g + " | " + (v.r ? std::string(buf) : std::string("NA")) + " | " +
            std::to_string(v.n) + " |\n";
    }
    if (c.average) std::snprintf(buf, sizeof buf, "%.2f", *c.average);
    md += "| average | " + (c.average ? std::string(buf) : std::string("NA")) + " | |\n";
  }

  // Plot series: one entry per (model, x) point, ready for external plotting.
  json& p = out.plotdata;
  auto series = [&](const std::vector<GroupMean>& means, const char* axis, const char* x_field) {
    json s = json::object();
    for (const auto& g : means) {
      if (g.key.at("axis") != axis) continue;
      s[g.key.at("kind")][g.key.at("model")].push_back(
          json{{"x", g.key.at(x_field)}, {"mean", g.mean()}, {"n", g.count}});
    }
    return s;
  };
  p["overall_by_language"] = series(by_language, "overall", "language");
  p["language_quality_by_language"] = series(by_language, "language_quality", "language");
  p["overall_by_task"] = series(by_task, "overall", "task");
  if (both) {
    p["correlation_by_language"] = correlation_report(d.table, CorrelationGrouping::per_language).to_json();
    json points = json::array();
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> hl;
    std::map<std::pair<std::string, std::string>, std::pair<int, int>> n;
    for (const auto& e : d.table.entries()) {
      if (e.axis != Axis::overall) continue;
      auto k = std::make_pair(e.item_id, e.model_id);
      if (e.kind == JudgeKind::human) {
        hl[k].first += e.score;
        n[k].first += 1;
      } else {
        hl[k].second += e.score;
        n[k].second += 1;
      }
    }
    for (const auto& [k, v] : hl)
      if (n[k].first && n[k].second)
        points.push_back(json{{"item_id", k.first}, {"model_id", k.second},
                              {"human", v.first / n[k].first}, {"llm", v.second / n[k].second}});
    p["human_vs_llm_points"] = points;
  }
  return out;
}

inline void write_report(const fs::path& out_dir, const RunReport& rep) {
  fs::create_directories(out_dir);
  write_json_file(out_dir / "report.json", rep.report);
  atomic_write_text(out_dir / "report.md", rep.markdown);
  write_json_file(out_dir / "plotdata.json", rep.plotdata);
}

}  // namespace audiojudge
