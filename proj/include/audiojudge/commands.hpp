#pragma once

// Command implementations behind the audiojudge binary. Each returns a
// process exit code: 0 success, 1 violations or failures past a threshold,
// 2 unusable input. Errors are reported on the error stream as one JSON
// object so automation can parse them.

#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "audiojudge/analytics.hpp"
#include "audiojudge/annotation.hpp"
#include "audiojudge/curation.hpp"
#include "audiojudge/error.hpp"
#include "audiojudge/eval.hpp"
#include "audiojudge/gateway.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"
#include "audiojudge/text.hpp"

namespace audiojudge::cli {

enum ExitCode { kOk = 0, kFailed = 1, kBadInput = 2 };

inline int exit_code_for(const Error& e) {
  const std::string kind = e.kind();
  if (kind == "RunAborted" || kind == "ValidationFailed" || kind == "GatewayError" ||
      kind == "JudgeFailed")
    return kFailed;
  return kBadInput;
}

inline void report_error(std::ostream& err, const std::string& command, const std::string& kind,
                         const std::string& message) {
  err << canonical_dump(json{{"command", command}, {"error", kind}, {"message", message}}) << "\n";
}

template <class F>
int guarded(const std::string& command, std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    report_error(err, command, e.kind(), e.what());
    return exit_code_for(e);
  } catch (const json::exception& e) {
    report_error(err, command, "ParseError", e.what());
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    report_error(err, command, "IoError", e.what());
    return kBadInput;
  }
}

inline json load_config(const std::optional<fs::path>& path) {
  if (!path) return json::object();
  json j = read_json_file(*path);
  if (!j.is_object()) throw ParseError(path->string() + " must hold a JSON object");
  return j;
}

inline CompositionProfile load_profile(const std::optional<fs::path>& path) {
  return path ? CompositionProfile::from_json(read_json_file(*path)) : CompositionProfile::standard();
}

// ---------------------------------------------------------------------------
// curate

struct CurateOptions {
  std::string task;  // asr | s2tt | ac | qa | math | fact | chat | ss | aqa
  fs::path in;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> targets;   // s2tt / ac target languages
  std::optional<std::string> asr_mode;  // tags | restore
};

/// Curation config keys: llm, tts (gateway configs), voices (voice policy),
/// tags (tag map), asr_mode, targets, seed, prompts, instructions,
/// duration_bounds {min_s, max_s}, media_dir.
inline int cmd_curate(const CurateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("curate", err, [&] {
    const TrainingTask task = parse_training_task(o.task);
    json cfg = load_config(o.config);
    const std::uint64_t seed = o.seed.value_or(cfg.value("seed", std::uint64_t{0}));
    if (!fs::exists(o.in)) throw IoError("input " + o.in.string() + " does not exist");
    std::vector<std::string> lines = read_lines(o.in);

    CurationPrompts prompts;
    if (cfg.contains("prompts")) {
      const json& p = cfg["prompts"];
      prompts.restore_punctuation = p.value("restore_punctuation", prompts.restore_punctuation);
      prompts.translate = p.value("translate", prompts.translate);
      prompts.caption_translate = p.value("caption_translate", prompts.caption_translate);
      prompts.summarize = p.value("summarize", prompts.summarize);
      prompts.aqa = p.value("aqa", prompts.aqa);
    }
    InstructionPools pools;
    if (cfg.contains("instructions")) {
      const json& ins = cfg["instructions"];
      auto pool = [&](const char* k, InstructionPool& p) {
        if (ins.contains(k)) p = InstructionPool(ins[k].get<std::vector<std::string>>());
      };
      pool("asr", pools.asr);
      pool("s2tt", pools.s2tt);
      pool("ac", pools.ac);
      pool("ss", pools.ss);
    }
    std::vector<std::string> targets = o.targets;
    if (targets.empty() && cfg.contains("targets"))
      targets = cfg["targets"].get<std::vector<std::string>>();
    TagMap tags = cfg.contains("tags") ? TagMap::from_json(cfg["tags"]) : TagMap::gigaspeech();
    const std::string mode_name = o.asr_mode.value_or(cfg.value("asr_mode", "tags"));
    if (mode_name != "tags" && mode_name != "restore")
      throw PreconditionError("asr_mode must be 'tags' or 'restore'");
    DurationBounds bounds;
    if (cfg.contains("duration_bounds")) {
      bounds.min_s = cfg["duration_bounds"].value("min_s", bounds.min_s);
      bounds.max_s = cfg["duration_bounds"].value("max_s", bounds.max_s);
    }
    std::optional<fs::path> media_dir;
    if (cfg.contains("media_dir")) media_dir = fs::path(cfg["media_dir"].get<std::string>());
    else media_dir = o.out;

    std::unique_ptr<LlmGateway> llm;
    std::unique_ptr<TtsGateway> tts;
    std::unique_ptr<VoiceSelector> voices;
    auto need_llm = [&]() -> LlmGateway& {
      if (!llm) {
        if (!cfg.contains("llm")) throw PreconditionError("curation config lacks an 'llm' gateway");
        llm = make_llm_gateway(cfg["llm"]);
      }
      return *llm;
    };
    auto need_tts = [&]() -> std::pair<TtsGateway&, VoiceSelector&> {
      if (!tts) {
        if (!cfg.contains("tts")) throw PreconditionError("curation config lacks a 'tts' gateway");
        tts = make_tts_gateway(cfg["tts"], media_dir);
        voices = std::make_unique<VoiceSelector>(VoicePolicy::from_json(cfg.value("voices", json::object())));
      }
      return {*tts, *voices};
    };
    if ((task == TrainingTask::s2tt || task == TrainingTask::ac) && targets.empty())
      throw PreconditionError(o.task + " curation needs at least one target language");

    std::map<std::string, Conversation> convs;  // by id
    json errors = json::array();
    std::size_t filtered = 0;
    std::size_t lineno = 0;
    auto keep = [&](Conversation c) { convs.emplace(c.id, std::move(c)); };

    for (const auto& line : lines) {
      ++lineno;
      try {
        json u;
        try {
          u = json::parse(line);
        } catch (const json::parse_error& e) {
          throw ParseError(e.what());
        }
        if (!u.is_object()) throw ParseError("unit is not a JSON object");
        switch (task) {
          case TrainingTask::asr: {
            auto c = build_asr(parse_asr_unit(u), mode_name == "tags" ? AsrMode::tags : AsrMode::restore,
                               tags, mode_name == "restore" ? &need_llm() : nullptr, pools.asr, seed,
                               prompts);
            if (c) keep(std::move(*c));
            else ++filtered;
            break;
          }
          case TrainingTask::s2tt: {
            AsrUnit unit = parse_asr_unit(u);
            for (const auto& t : targets) {
              Language target = Language::parse(t);
              if (target == unit.language) continue;
              keep(build_s2tt(unit, target, need_llm(), pools.s2tt, seed, prompts));
            }
            break;
          }
          case TrainingTask::ac: {
            AudioAsset audio = decode<AudioAsset>(u.at("audio"));
            validate(audio);
            for (const auto& t : targets)
              keep(build_caption_translation(u.at("caption").get<std::string>(), audio,
                                             Language::parse(t), need_llm(), pools.ac, seed,
                                             u.value("source", "captions"), prompts));
            break;
          }
          case TrainingTask::qa:
          case TrainingTask::math:
          case TrainingTask::fact: {
            auto [t, v] = need_tts();
            keep(build_spoken_qa(u.at("question").get<std::string>(), u.at("answer").get<std::string>(),
                                 Language::parse(u.at("language").get<std::string>()), task, t, v,
                                 u.value("source", o.task)));
            break;
          }
          case TrainingTask::chat: {
            auto [t, v] = need_tts();
            std::vector<std::pair<std::string, std::string>> ex;
            for (const auto& pair : u.at("exchanges"))
              ex.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
            keep(build_voice_chat(ex, Language::parse(u.at("language").get<std::string>()), t, v,
                                  u.value("source", "chat")));
            break;
          }
          case TrainingTask::ss:
          case TrainingTask::aqa: {
            AudioAsset audio = decode<AudioAsset>(u.at("audio"));
            validate(audio);
            keep(build_generated_item(audio, Language::parse(u.at("language").get<std::string>()),
                                      task, need_llm(), pools.ss, seed, bounds,
                                      u.value("source", "longform"), prompts));
            break;
          }
          case TrainingTask::mixed:
            throw PreconditionError("mixed conversations are not curated by a constructor");
        }
      } catch (const Error& e) {
        errors.push_back(json{{"line", lineno}, {"error", e.kind()}, {"message", e.what()}});
      } catch (const json::exception& e) {
        errors.push_back(json{{"line", lineno}, {"error", "ParseError"}, {"message", e.what()}});
      }
    }

    std::vector<Conversation> sorted;
    for (auto& [_, c] : convs) sorted.push_back(std::move(c));
    fs::create_directories(o.out);
    const fs::path conv_path = o.out / (o.task + ".conv.jsonl");
    write_records(conv_path, sorted);
    json stats = corpus_stats(sorted).to_json();
    stats["input_units"] = lines.size();
    stats["filtered"] = filtered;
    stats["errors"] = errors;
    write_json_file(o.out / "stats.json", stats);
    out << "conversations: " << sorted.size() << "\n"
        << "filtered: " << filtered << "\n"
        << "errors: " << errors.size() << "\n"
        << "output: " << conv_path.string() << "\n";
    for (const auto& e : errors) err << canonical_dump(e) << "\n";
    return errors.empty() ? kOk : kFailed;
  });
}

// ---------------------------------------------------------------------------
// validate

struct ValidateOptions {
  fs::path bench;
  std::optional<fs::path> profile;
};

inline int cmd_validate(const ValidateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("validate", err, [&] {
    CompositionProfile profile = load_profile(o.profile);
    Benchmark bench = load_benchmark(o.bench);
    ValidationReport report = validate_benchmark(bench, profile);
    for (const auto& v : report.violations) out << v.to_line() << "\n";
    if (report.ok())
      out << "ok: " << report.item_count << " items, sha256 " << bench.sha256 << "\n";
    return report.ok() ? kOk : kFailed;
  });
}

// ---------------------------------------------------------------------------
// synth-bench

struct SynthBenchOptions {
  fs::path out;
  std::optional<fs::path> profile;
  std::optional<fs::path> media_dir;
};

inline int cmd_synth_bench(const SynthBenchOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("synth-bench", err, [&] {
    Benchmark b = make_synthetic_benchmark(load_profile(o.profile), o.media_dir);
    write_benchmark(o.out, b);
    out << "items: " << b.items.size() << "\nsha256: " << b.sha256 << "\noutput: " << o.out.string() << "\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// run / judge

/// Global run configuration keys: seed, failure_threshold, workers, profile.
struct RunCmdOptions {
  fs::path bench;
  std::vector<fs::path> adapters;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> profile;
  std::optional<fs::path> config;
  std::optional<double> failure_threshold;
  std::optional<int> workers;
  bool resume = false;
};

inline StageOptions stage_options(const json& cfg, std::optional<double> threshold,
                                  std::optional<int> workers) {
  StageOptions s;
  s.failure_threshold = threshold.value_or(cfg.value("failure_threshold", s.failure_threshold));
  s.workers = workers.value_or(cfg.value("workers", s.workers));
  if (s.failure_threshold < 0 || s.failure_threshold > 1)
    throw PreconditionError("failure_threshold must lie in [0, 1]");
  if (s.workers < 1) throw PreconditionError("workers must be >= 1");
  return s;
}

inline int cmd_run(const RunCmdOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("run", err, [&] {
    json cfg = load_config(o.config);
    std::optional<fs::path> profile_path = o.profile;
    if (!profile_path && cfg.contains("profile")) profile_path = fs::path(cfg["profile"].get<std::string>());
    CompositionProfile profile = load_profile(profile_path);
    Benchmark bench = load_benchmark(o.bench);
    ValidationReport report = validate_benchmark(bench, profile);
    if (!report.ok()) {
      for (const auto& v : report.violations) out << v.to_line() << "\n";
      throw ValidationFailed("benchmark has " + std::to_string(report.violations.size()) +
                             " violations; run refused");
    }
    if (o.adapters.empty()) throw PreconditionError("at least one --adapter is required");

    std::vector<std::unique_ptr<GenerationGateway>> gateways;
    std::vector<AdapterBinding> bindings;
    for (const auto& path : o.adapters) {
      ModelAdapterConfig a = ModelAdapterConfig::from_json(read_json_file(path));
      gateways.push_back(make_generation_gateway(a));
      bindings.push_back({a, gateways.back().get()});
    }
    RunOptions ro;
    ro.out_dir = o.out;
    ro.seed = o.seed.value_or(cfg.value("seed", std::uint64_t{0}));
    ro.stage = stage_options(cfg, o.failure_threshold, o.workers);
    ro.resume = o.resume;
    ro.global_config = cfg;
    ro.global_config["seed"] = ro.seed;
    ro.global_config["failure_threshold"] = ro.stage.failure_threshold;
    ro.global_config["workers"] = ro.stage.workers;
    ro.global_config["profile"] = profile.to_json();
    RunResult r = run_generation(bench, bindings, ro);
    for (const auto& f : r.failures)
      err << canonical_dump(json{{"item_id", f.item_id}, {"model_id", f.model_id}, {"error", f.message}}) << "\n";
    out << "manifest: " << r.manifest_path.string() << "\n"
        << "run_id: " << r.manifest.run_id << "\n"
        << "generation_gateway_calls: " << r.generation_calls << "\n"
        << "failures: " << r.failures.size() << "\n";
    return kOk;
  });
}

struct JudgeCmdOptions {
  fs::path run;
  fs::path judge;
  fs::path rubrics;
  std::optional<fs::path> tmpl;  // {"template": ..., "output_format": ...}
  std::optional<double> failure_threshold;
  std::optional<int> workers;
  bool resume = false;
};

inline JudgePromptTemplate load_template(const std::optional<fs::path>& path) {
  if (!path) return JudgePromptTemplate();
  json j = read_json_file(*path);
  return JudgePromptTemplate(j.at("template").get<std::string>(),
                             j.value("output_format", JudgePromptTemplate::kDefaultOutputFormat));
}

inline int cmd_judge(const JudgeCmdOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("judge", err, [&] {
    JudgeConfig jc = JudgeConfig::from_json(read_json_file(o.judge));
    RubricStore rubrics = RubricStore::load(o.rubrics);
    auto gateway = make_llm_gateway(jc.gateway);
    RunManifest base = read_manifest(o.run / kRunManifestFile);
    RunOptions ro;
    ro.out_dir = o.run;
    ro.seed = base.seed;
    ro.stage = stage_options(base.config, o.failure_threshold, o.workers);
    ro.resume = o.resume;
    JudgeBinding jb{jc, load_template(o.tmpl), &rubrics, gateway.get()};
    RunResult r = run_judging(o.run, jb, ro);
    for (const auto& f : r.failures)
      err << canonical_dump(json{{"item_id", f.item_id}, {"model_id", f.model_id}, {"error", f.message}}) << "\n";
    out << "manifest: " << r.manifest_path.string() << "\n"
        << "judge_gateway_calls: " << r.judge_calls << "\n"
        << "failures: " << r.failures.size() << "\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// report / agreement / correlate / export-ratings / serve

struct ReportOptions {
  fs::path run;
  std::optional<fs::path> out;
};

inline int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("report", err, [&] {
    RunData d = load_run(o.run);
    RunReport rep = build_report(d);
    const fs::path dir = o.out.value_or(o.run);
    write_report(dir, rep);
    out << "manifest: " << d.manifest_path.string() << "\n"
        << "report: " << (dir / "report.json").string() << "\n"
        << "markdown: " << (dir / "report.md").string() << "\n"
        << "plotdata: " << (dir / "plotdata.json").string() << "\n";
    return kOk;
  });
}

struct AgreementOptions {
  fs::path run;
};

inline void print_agreement(const AgreementReport& ag, std::ostream& out) {
  out << "language";
  for (const auto& [code, _] : ag.per_language) out << "\t" << code;
  out << "\tavg\n"
      << "with_tie";
  for (const auto& [_, m] : ag.per_language) out << "\t" << percent_or_na(m.with_tie.value);
  out << "\t" << percent_or_na(ag.average_with_tie) << "\n"
      << "without_tie";
  for (const auto& [_, m] : ag.per_language) out << "\t" << percent_or_na(m.without_tie.value);
  out << "\t" << percent_or_na(ag.average_without_tie) << "\n"
      << "pairs\t" << ag.pairs << "\n";
}

inline int cmd_agreement(const AgreementOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("agreement", err, [&] {
    RunData d = load_run(o.run);
    out << "manifest: " << d.manifest_path.string() << "\n";
    print_agreement(agreement_report(d.table), out);
    return kOk;
  });
}

struct CorrelateOptions {
  fs::path run;
  std::string group = "language";
  std::string pairing = "per_response";
};

inline int cmd_correlate(const CorrelateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("correlate", err, [&] {
    RunData d = load_run(o.run);
    if (!d.table.has(JudgeKind::human) || !d.table.has(JudgeKind::llm))
      throw EmptySelection("correlation needs both human and LLM scores");
    CorrelationReport c = correlation_report(d.table, parse_grouping(o.group), parse_pairing(o.pairing));
    out << "manifest: " << d.manifest_path.string() << "\n";
    char buf[64];
    for (const auto& [g, v] : c.groups) {
      if (v.r) std::snprintf(buf, sizeof buf, "%.4f", *v.r);
      out << g << "\t" << (v.r ? buf : "NA") << "\tn=" << v.n << "\n";
    }
    if (c.average) std::snprintf(buf, sizeof buf, "%.4f", *c.average);
    out << "average\t" << (c.average ? buf : "NA") << "\n";
    return kOk;
  });
}

struct ExportOptions {
  fs::path run;
  std::optional<fs::path> out;
  std::optional<fs::path> criteria;
};

inline RatingCriteria load_criteria(const std::optional<fs::path>& path) {
  return path ? RatingCriteria::load(*path) : RatingCriteria::builtin();
}

inline int cmd_export_ratings(const ExportOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("export-ratings", err, [&] {
    AnnotationStore store(o.run, load_criteria(o.criteria));
    fs::path path = store.export_ratings(o.out.value_or(store.default_export_path()));
    out << "manifest: " << run_manifest_path(o.run).string() << "\n"
        << "ratings: " << store.ratings().size() << "\n"
        << "output: " << path.string() << "\n";
    return kOk;
  });
}

struct ServeOptions {
  fs::path run;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<fs::path> criteria;
  std::optional<fs::path> media;
};

inline int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  return guarded("serve", err, [&] {
    AnnotationStore store(o.run, load_criteria(o.criteria));
    AnnotationServer server(store, o.media.value_or(o.run));
    out << "manifest: " << run_manifest_path(o.run).string() << "\n"
        << "run_id: " << store.run_id() << "\n"
        << "listening: http://" << o.host << ":" << o.port << "\n"
        << std::flush;
    server.run(o.host, o.port);
    return kOk;
  });
}

}  // namespace audiojudge::cli
