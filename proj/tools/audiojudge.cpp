#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "audiojudge/commands.hpp"

namespace cli = audiojudge::cli;

namespace {

// CLI11 fills plain members; optionals are set only when the flag was given.
template <class T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target,
                   const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audiojudge: audio-language data curation, benchmark evaluation and judge analytics"};
  app.require_subcommand(1);
  int code = 0;

  cli::CurateOptions curate;
  auto* c = app.add_subcommand("curate", "Build training conversations from source units");
  c->add_option("--task", curate.task, "asr, s2tt, ac, qa, math, fact, chat, ss or aqa")->required();
  c->add_option("--in", curate.in, "Input units (JSONL)")->required();
  c->add_option("--out", curate.out, "Output directory for <task>.conv.jsonl and stats.json")->required();
  optional_flag(c, "--config", curate.config, "Curation config (gateways, voices, tags, prompts)");
  optional_flag(c, "--seed", curate.seed, "Seed for instruction and voice choices");
  c->add_option("--target", curate.targets, "Target language for s2tt/ac (repeatable)");
  optional_flag(c, "--asr-mode", curate.asr_mode, "ASR normalization: tags or restore");
  c->callback([&] { code = cli::cmd_curate(curate, std::cout, std::cerr); });

  cli::ValidateOptions validate;
  auto* v = app.add_subcommand("validate", "Check a benchmark manifest against a composition profile");
  v->add_option("bench", validate.bench, "Benchmark items (JSONL)")->required();
  optional_flag(v, "--profile", validate.profile, "Composition profile (default: 580-item standard)");
  v->callback([&] { code = cli::cmd_validate(validate, std::cout, std::cerr); });

  cli::SynthBenchOptions synth;
  auto* sb = app.add_subcommand("synth-bench", "Write a synthetic benchmark matching a profile");
  sb->add_option("--out", synth.out, "Output items file")->required();
  optional_flag(sb, "--profile", synth.profile, "Composition profile (default: standard)");
  optional_flag(sb, "--media", synth.media_dir, "Directory to write placeholder audio into");
  sb->callback([&] { code = cli::cmd_synth_bench(synth, std::cout, std::cerr); });

  cli::RunCmdOptions run;
  auto* r = app.add_subcommand("run", "Generate responses for every adapter");
  r->add_option("--bench", run.bench, "Benchmark items (JSONL)")->required();
  r->add_option("--adapter", run.adapters, "Adapter config (repeatable)")->required();
  r->add_option("--out", run.out, "Run directory")->required();
  optional_flag(r, "--seed", run.seed, "Run seed");
  optional_flag(r, "--profile", run.profile, "Composition profile used to validate the benchmark");
  optional_flag(r, "--config", run.config, "Global config (seed, failure_threshold, workers, profile)");
  optional_flag(r, "--failure-threshold", run.failure_threshold, "Abort above this failed-item fraction");
  optional_flag(r, "--workers", run.workers, "Concurrent items");
  r->add_flag("--resume", run.resume, "Reuse the run directory's caches");
  r->callback([&] { code = cli::cmd_run(run, std::cout, std::cerr); });

  cli::JudgeCmdOptions judge;
  auto* j = app.add_subcommand("judge", "Score a run's responses with the LLM judge");
  j->add_option("--run", judge.run, "Run directory")->required();
  j->add_option("--judge", judge.judge, "Judge config")->required();
  j->add_option("--rubrics", judge.rubrics, "Rubrics (JSONL)")->required();
  optional_flag(j, "--template", judge.tmpl, "Judge prompt template (JSON)");
  optional_flag(j, "--failure-threshold", judge.failure_threshold, "Abort above this failed-item fraction");
  optional_flag(j, "--workers", judge.workers, "Concurrent items");
  j->add_flag("--resume", judge.resume, "Reuse the run directory's verdict cache");
  j->callback([&] { code = cli::cmd_judge(judge, std::cout, std::cerr); });

  cli::ReportOptions report;
  auto* rp = app.add_subcommand("report", "Write report.json, report.md and plotdata.json");
  rp->add_option("--run", report.run, "Run directory")->required();
  optional_flag(rp, "--out", report.out, "Output directory (default: the run directory)");
  rp->callback([&] { code = cli::cmd_report(report, std::cout, std::cerr); });

  cli::AgreementOptions agreement;
  auto* ag = app.add_subcommand("agreement", "Pairwise agreement between human and LLM judges");
  ag->add_option("--run", agreement.run, "Run directory")->required();
  ag->callback([&] { code = cli::cmd_agreement(agreement, std::cout, std::cerr); });

  cli::CorrelateOptions correlate;
  auto* co = app.add_subcommand("correlate", "Pearson correlation between human and LLM scores");
  co->add_option("--run", correlate.run, "Run directory")->required();
  co->add_option("--group", correlate.group, "language, model or task")->capture_default_str();
  co->add_option("--pairing", correlate.pairing, "per_response or task_mean")->capture_default_str();
  co->callback([&] { code = cli::cmd_correlate(correlate, std::cout, std::cerr); });

  cli::ServeOptions serve;
  auto* se = app.add_subcommand("serve", "Serve blind rating sessions over HTTP");
  se->add_option("--run", serve.run, "Run directory")->required();
  se->add_option("--host", serve.host, "Bind address")->capture_default_str();
  se->add_option("--port", serve.port, "Port")->capture_default_str();
  optional_flag(se, "--criteria", serve.criteria, "Human rating criteria (JSON)");
  optional_flag(se, "--media", serve.media, "Directory served under /media/ (default: the run directory)");
  se->callback([&] { code = cli::cmd_serve(serve, std::cout, std::cerr); });

  cli::ExportOptions exp;
  auto* ex = app.add_subcommand("export-ratings", "Write collected human ratings as JSONL");
  ex->add_option("--run", exp.run, "Run directory")->required();
  optional_flag(ex, "--out", exp.out, "Output file (default: <run>/ratings.human.jsonl)");
  ex->callback([&] { code = cli::cmd_export_ratings(exp, std::cout, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kBadInput;
  }
  return code;
}
