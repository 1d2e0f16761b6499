#pragma once

// Fixtures and independent reference implementations shared by the unit and
// acceptance suites. Oracles here avoid the library's own code paths: they
// recount, re-enumerate or use a different formula.

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "audiojudge/analytics.hpp"
#include "audiojudge/fingerprint.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"

namespace testing_support {

namespace aj = audiojudge;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "audiojudge-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline fs::path source_dir() {
#ifdef AUDIOJUDGE_SOURCE_DIR
  return AUDIOJUDGE_SOURCE_DIR;
#else
  return fs::current_path();
#endif
}

inline aj::AudioAsset asset(const std::string& name, double duration = 4.0) {
  return {"media/" + name + ".wav", "wav", 16000, duration, aj::sha256_hex(name)};
}

inline aj::BenchmarkItem item(const std::string& id, const std::string& language,
                              aj::BenchmarkTask task, const std::string& reference = "ref") {
  aj::BenchmarkItem it;
  it.id = id;
  it.language = aj::lang(language);
  it.task = task;
  it.audio = asset(id);
  if (!aj::is_audio_only(task)) it.text_instruction = "Instruction for " + id + ".";
  it.reference = reference + " " + id;
  return it;
}

// ---------------------------------------------------------------------------
// Pairwise oracle: enumerate every item and model index pair directly.

struct OracleVerdict {
  std::string item, a, b;
  char v;  // 'A', 'B', 'T'
  bool operator<(const OracleVerdict& o) const { return std::tie(item, a, b) < std::tie(o.item, o.a, o.b); }
};

inline std::vector<OracleVerdict> oracle_pairwise(const std::vector<aj::ScoreEntry>& entries,
                                                  aj::JudgeKind kind, aj::Axis axis) {
  std::set<std::string> items, models;
  for (const auto& e : entries) {
    items.insert(e.item_id);
    models.insert(e.model_id);
  }
  std::vector<std::string> ms(models.begin(), models.end());
  std::vector<OracleVerdict> out;
  for (const auto& it : items) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      for (std::size_t j = i + 1; j < ms.size(); ++j) {
        double si = 0, sj = 0;
        int ni = 0, nj = 0;
        for (const auto& e : entries) {
          if (e.item_id != it || e.kind != kind || e.axis != axis) continue;
          if (e.model_id == ms[i]) si += e.score, ++ni;
          if (e.model_id == ms[j]) sj += e.score, ++nj;
        }
        if (!ni || !nj) continue;
        double mi = si / ni, mj = sj / nj;
        out.push_back({it, ms[i], ms[j], mi > mj ? 'A' : mi < mj ? 'B' : 'T'});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline char verdict_char(aj::Verdict v) {
  return v == aj::Verdict::A ? 'A' : v == aj::Verdict::B ? 'B' : 'T';
}

struct OracleAgreement {
  std::size_t matches = 0, compared = 0;
};

/// Assumes identical key order (both lists sorted by key).
inline OracleAgreement oracle_agreement(const std::vector<OracleVerdict>& h,
                                        const std::vector<OracleVerdict>& l, bool with_tie) {
  OracleAgreement r;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!with_tie && (h[i].v == 'T' || l[i].v == 'T')) continue;
    ++r.compared;
    r.matches += h[i].v == l[i].v;
  }
  return r;
}

/// Random score table: up to max_models models x max_items items, humans
/// with one to three annotators, one LLM judge; both kinds cover the same
/// (item, model) responses.
inline aj::ScoreTable random_table(std::mt19937_64& rng, int max_models = 5, int max_items = 20) {
  const char* langs[] = {"en", "id", "th", "vi"};
  std::uniform_int_distribution<int> nm(2, max_models), ni(1, max_items), score(1, 5), nann(1, 3);
  const int models = nm(rng), items = ni(rng);
  aj::ScoreTable t;
  for (int i = 0; i < items; ++i) {
    const std::string item_id = "q" + std::to_string(i);
    const aj::Language language = aj::lang(langs[rng() % 4]);
    const auto task = aj::kAllBenchmarkTasks[rng() % aj::kAllBenchmarkTasks.size()];
    for (int m = 0; m < models; ++m) {
      if (rng() % 7 == 0) continue;  // some responses unscored
      const std::string model = "model-" + std::to_string(m);
      t.add({item_id, model, aj::JudgeKind::llm, aj::Axis::overall, score(rng), "judge", language, task});
      const int annotators = nann(rng);
      for (int a = 0; a < annotators; ++a) {
        const std::string ann = "ann" + std::to_string(a);
        t.add({item_id, model, aj::JudgeKind::human, aj::Axis::overall, score(rng), ann, language, task});
        t.add({item_id, model, aj::JudgeKind::human, aj::Axis::language_quality, score(rng), ann,
               language, task});
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Pearson oracle: single-pass raw-moment formula in extended precision.

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double n = static_cast<long double>(x.size()), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double a = x[i], b = y[i];
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  long double num = n * sxy - sx * sy;
  long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return static_cast<double>(num / den);
}

// ---------------------------------------------------------------------------
// Four-language agreement fixture: 100 item pairs per language, two models
// per item, scores chosen so each pair's verdict is fixed by construction.

struct VerdictMix {
  char human, llm;
  int count;
};

inline const std::map<std::string, std::vector<VerdictMix>>& agreement_fixture_design() {
  // with_tie matches / without_tie (matches over both-non-tie pairs):
  //   en 68/100, 68/74   id 71/100, 71/75   th 68/100, 68/74   vi 70/100, 66/70
  static const std::map<std::string, std::vector<VerdictMix>> kDesign = {
      {"en", {{'A', 'A', 68}, {'A', 'B', 6}, {'A', 'T', 26}}},
      {"id", {{'A', 'A', 71}, {'A', 'B', 4}, {'T', 'B', 25}}},
      {"th", {{'B', 'B', 68}, {'B', 'A', 6}, {'A', 'T', 26}}},
      {"vi", {{'A', 'A', 66}, {'T', 'T', 4}, {'A', 'B', 4}, {'T', 'A', 26}}},
  };
  return kDesign;
}

inline aj::ScoreTable agreement_fixture_table() {
  auto scores = [](char v) -> std::pair<int, int> {
    return v == 'A' ? std::pair{4, 2} : v == 'B' ? std::pair{2, 4} : std::pair{3, 3};
  };
  aj::ScoreTable t;
  for (const auto& [code, mixes] : agreement_fixture_design()) {
    int n = 0;
    for (const auto& m : mixes) {
      for (int k = 0; k < m.count; ++k, ++n) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%03d", n);
        const std::string id = code + "-q" + buf;
        auto [ha, hb] = scores(m.human);
        auto [la, lb] = scores(m.llm);
        const auto lang = aj::lang(code);
        const auto task = aj::BenchmarkTask::SQA;
        t.add({id, "model-a", aj::JudgeKind::human, aj::Axis::overall, ha, "ann", lang, task});
        t.add({id, "model-b", aj::JudgeKind::human, aj::Axis::overall, hb, "ann", lang, task});
        t.add({id, "model-a", aj::JudgeKind::llm, aj::Axis::overall, la, "judge", lang, task});
        t.add({id, "model-b", aj::JudgeKind::llm, aj::Axis::overall, lb, "judge", lang, task});
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Judge reply corpus: well-formed replies with the score they must yield,
// and malformed replies that must be rejected.

struct ScoreCase {
  std::string raw;
  int expected;
};

inline std::vector<ScoreCase> valid_score_corpus() {
  std::vector<ScoreCase> v = {
      {"Score: 4", 4},
      {"The answer is accurate.\nScore: 5", 5},
      {"...reasoning...\nScore: 4", 4},
      {"Score: 3\n...later text...\nScore: 5", 5},
      {"score: 2", 2},
      {"SCORE: 1", 1},
      {"Score:3", 3},
      {"Score:   2", 2},
      {"  Score: 4  ", 4},
      {"Score: 4\n", 4},
      {"Score: 4\n\n\n", 4},
      {"Score: 5\r\n", 5},
      {"Assessment\r\nScore: 1\r\n", 1},
      {"**Score: 4**", 4},
      {"**Score:** 3", 3},
      {"Score: **2**", 2},
      {"## Score: 5", 5},
      {"> Score: 2", 2},
      {"Final score: 3", 3},
      {"Final Score: 4", 4},
      {"Score: 4/5", 4},
      {"Score: 3 / 5", 3},
      {"Score: 5.", 5},
      {"Score: +4", 4},
      {"The reply misses the key fact.\nIt is fluent.\nScore: 2", 2},
      {"Reference: Hanoi\nResponse: Hanoi\nScore: 5", 5},
      {"Score: 1\nThe response is empty.\nScore: 1", 1},
      {"Score: 5\nOn reflection the answer is incomplete.\nScore: 3", 3},
      {"The rubric says 4 means minor slips.\nScore: 4", 4},
      {"Score - not applicable\nScore: 2", 2},
      {"Score: 9 would be too generous here.\nScore: 3", 3},
      {"Bahasa Indonesia yang baik.\nScore: 4", 4},
      {"Câu trả lời đúng.\nScore: 5", 5},
      {"คำตอบถูกต้องบางส่วน\nScore: 3", 3},
      {"回答基本正确。\nScore: 4", 4},
      {"Explanation:\n- accurate\n- complete\n\nScore: 5", 5},
      {"Score: 2\n", 2},
      {"\tScore: 3", 3},
      {"_Score: 1_", 1},
      {"*Score*: 4", 4},
      {"Score : 2", 2},
      {"score:5", 5},
      {"Judgement follows.\n\nScore: 1\n\n", 1},
      {"A" + std::string(2000, '.') + "\nScore: 4", 4},
      {"The response addresses the question. Score: 2 in my first pass.\nScore: 3", 3},
      {"Score: 05", 5},
      {"Line one\nLine two\nLine three\nScore: 2", 2},
      {"Score: 4 \t", 4},
      {"# Verdict\nScore: 5", 5},
      {"It fails the task entirely.\nFinal score: 1", 1},
  };
  return v;
}

inline std::vector<std::string> malformed_score_corpus() {
  return {
      "the answer deserves top marks",
      "",
      "\n\n",
      "Score: 0",
      "Score: 6",
      "Score: 10",
      "Score: -1",
      "Score: 4.5",
      "Score: four",
      "Score:",
      "Score: 4 because it is mostly right",
      "Rating: 4",
      "4/5",
      "I would give it a 4.",
      "Score: 3\nScore: 7",
      "Score: 99999999999999999999",
      "Scores: 4",
      "The score is 4",
      "Score 4",
      "Score: 2\nFinal score: 0",
  };
}

}  // namespace testing_support
