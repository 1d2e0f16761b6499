#pragma once

// Evaluation runner: model adapters generate one response per benchmark item
// (through a write-once response cache), an audio-capable judge scores each
// response 1..5 against the reference and a task rubric, and each stage
// leaves canonical JSONL files plus a run manifest behind.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <exception>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "audiojudge/error.hpp"
#include "audiojudge/gateway.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

// ---------------------------------------------------------------------------
// Adapters

/// Adapter configuration file keys: model_id, endpoint,
/// default_text_instruction (optional), temperature, max_tokens, plus
/// optional modalities, api_key_env, max_in_flight, retry_budget, timeout_s.
struct ModelAdapterConfig {
  std::string model_id;
  std::string endpoint;
  std::optional<std::string> default_text_instruction;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::vector<std::string> modalities{"audio", "text"};
  json transport = json::object();  // api_key_env, max_in_flight, retry_budget, timeout_s

  static ModelAdapterConfig from_json(const json& j) {
    if (!j.is_object()) throw ParseError("adapter config must be a JSON object");
    for (const char* key : {"model_id", "endpoint", "temperature", "max_tokens"})
      if (!j.contains(key)) throw ParseError(std::string("adapter config lacks '") + key + "'");
    ModelAdapterConfig c;
    try {
      c.model_id = j.at("model_id").get<std::string>();
      c.endpoint = j.at("endpoint").get<std::string>();
      if (j.contains("default_text_instruction") && !j["default_text_instruction"].is_null())
        c.default_text_instruction = j["default_text_instruction"].get<std::string>();
      c.temperature = j.at("temperature").get<double>();
      c.max_tokens = j.at("max_tokens").get<int>();
      if (j.contains("modalities")) c.modalities = j["modalities"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("adapter config: ") + e.what());
    }
    for (const char* key : {"api_key_env", "max_in_flight", "retry_budget", "timeout_s"})
      if (j.contains(key)) c.transport[key] = j[key];
    if (c.model_id.empty()) throw ParseError("adapter config: model_id is empty");
    if (c.max_tokens <= 0) throw ParseError("adapter config: max_tokens must be positive");
    return c;
  }

  json to_json() const {
    json j{{"model_id", model_id},
           {"endpoint", endpoint},
           {"default_text_instruction",
            default_text_instruction ? json(*default_text_instruction) : json(nullptr)},
           {"temperature", temperature},
           {"max_tokens", max_tokens},
           {"modalities", modalities}};
    for (auto& [k, v] : transport.items()) j[k] = v;
    return j;
  }

  /// Digest of everything that changes what the model is asked to produce.
  std::string gen_config_hash() const {
    json params{{"default_text_instruction",
                 default_text_instruction ? json(*default_text_instruction) : json(nullptr)},
                {"temperature", temperature},
                {"max_tokens", max_tokens}};
    return sha256_hex(canonical_dump(params));
  }
};

/// The instruction actually sent with the audio: the item's own instruction,
/// else the adapter default (for models that always expect text), else none.
inline std::optional<std::string> effective_instruction(const BenchmarkItem& item,
                                                        const ModelAdapterConfig& adapter) {
  if (item.text_instruction) return item.text_instruction;
  return adapter.default_text_instruction;
}

struct GenerationRequest {
  std::string model_id;
  AudioAsset audio;
  std::optional<std::string> instruction;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct GenerationResult {
  std::string text;
  std::int64_t latency_ms = 0;
  Timestamp created_at;
};

class GenerationGateway {
 public:
  explicit GenerationGateway(GatewayOptions options = {})
      : options_(options), limiter_(options.max_in_flight) {}
  virtual ~GenerationGateway() = default;

  GenerationResult generate(const GenerationRequest& request) {
    calls_.fetch_add(1);
    InFlightLimiter::Slot slot(limiter_);
    return do_generate(request);
  }

  Attempted<GenerationResult> generate_with_retry(const GenerationRequest& request) {
    return with_retry(options_.retry, [&] { return generate(request); });
  }

  std::size_t calls() const { return calls_.load(); }
  const GatewayOptions& options() const { return options_; }

 protected:
  virtual GenerationResult do_generate(const GenerationRequest& request) = 0;

 private:
  GatewayOptions options_;
  InFlightLimiter limiter_;
  std::atomic<std::size_t> calls_{0};
};

class FunctionGeneration : public GenerationGateway {
 public:
  using Fn = std::function<GenerationResult(const GenerationRequest&)>;
  explicit FunctionGeneration(Fn fn, GatewayOptions options = {})
      : GenerationGateway(options), fn_(std::move(fn)) {}

 protected:
  GenerationResult do_generate(const GenerationRequest& r) override { return fn_(r); }

 private:
  Fn fn_;
};

/// Deterministic model stand-in: the answer depends on the request only and
/// never contains the model id. Timing metadata is fixed so reruns produce
/// identical bytes.
class MockGeneration : public GenerationGateway {
 public:
  using GenerationGateway::GenerationGateway;

 protected:
  GenerationResult do_generate(const GenerationRequest& r) override {
    const std::string h = sha256_hex(r.model_id + "|" + r.audio.sha256 + "|" +
                                     r.instruction.value_or("") + "|" +
                                     std::to_string(r.temperature))
                              .substr(0, 12);
    return {"Generated answer " + h + ".", 0, Timestamp(0)};
  }
};

/// Generic HTTP contract: POST {model, audio, instruction, temperature,
/// max_tokens} and read {"text": ...}.
class HttpGeneration : public GenerationGateway {
 public:
  HttpGeneration(std::string endpoint, std::string api_key_env, int timeout_s,
                 GatewayOptions options)
      : GenerationGateway(options), endpoint_(std::move(endpoint)),
        api_key_env_(std::move(api_key_env)), timeout_s_(timeout_s) {}

 protected:
  GenerationResult do_generate(const GenerationRequest& r) override {
    json body{{"model", r.model_id},
              {"audio", encode(r.audio)},
              {"instruction", r.instruction ? json(*r.instruction) : json(nullptr)},
              {"temperature", r.temperature},
              {"max_tokens", r.max_tokens}};
    auto start = std::chrono::steady_clock::now();
    json reply = detail::post_json(endpoint_, body, api_key_env_, timeout_s_);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    if (!reply.contains("text") || !reply["text"].is_string())
      throw GatewayError("generation endpoint reply lacks a text field");
    return {reply["text"].get<std::string>(), elapsed.count(), Timestamp::now()};
  }

 private:
  std::string endpoint_, api_key_env_;
  int timeout_s_;
};

inline std::unique_ptr<GenerationGateway> make_generation_gateway(const ModelAdapterConfig& a) {
  auto options = gateway_options_from(a.transport);
  if (is_mock_endpoint(a.endpoint)) return std::make_unique<MockGeneration>(options);
  if (a.endpoint.rfind("http", 0) == 0)
    return std::make_unique<HttpGeneration>(a.endpoint, a.transport.value("api_key_env", ""),
                                            a.transport.value("timeout_s", 300), options);
  throw PreconditionError("unsupported adapter endpoint '" + a.endpoint + "'");
}

// ---------------------------------------------------------------------------
// Cache

/// Write-once record store. Entries live in memory and, when a directory is
/// given, as one file per key published atomically; the first complete
/// write for a key wins and later writers get the stored record back.
template <class T>
class RecordCache {
 public:
  explicit RecordCache(std::optional<fs::path> dir = std::nullopt) : dir_(std::move(dir)) {}

  std::optional<T> lookup(const std::string& key) {
    std::lock_guard lock(m_);
    if (auto it = memory_.find(key); it != memory_.end()) return parse_record<T>(it->second);
    if (dir_) {
      auto path = file_for(key);
      if (fs::exists(path)) {
        std::string line = read_text_file(path);
        memory_[key] = line;
        return parse_record<T>(line);
      }
    }
    return std::nullopt;
  }

  /// Stores the record unless the key is taken; returns what the cache holds.
  T publish(const std::string& key, const T& record) {
    std::string line = serialize_record(record);
    std::lock_guard lock(m_);
    if (auto it = memory_.find(key); it != memory_.end()) return parse_record<T>(it->second);
    if (dir_ && !publish_once(file_for(key), line)) line = read_text_file(file_for(key));
    memory_[key] = line;
    return parse_record<T>(line);
  }

  std::size_t size() const {
    std::lock_guard lock(m_);
    return memory_.size();
  }

 private:
  fs::path file_for(const std::string& key) const { return *dir_ / (sha256_hex(key) + ".json"); }

  std::optional<fs::path> dir_;
  mutable std::mutex m_;
  std::map<std::string, std::string> memory_;
};

using ResponseCache = RecordCache<ModelResponse>;
using VerdictCache = RecordCache<JudgeVerdict>;

inline std::string response_cache_key(const std::string& item_id, const std::string& model_id,
                                      const std::string& gen_config_hash) {
  return item_id + '\x1f' + model_id + '\x1f' + gen_config_hash;
}

// ---------------------------------------------------------------------------
// Parallel map with bounded workers

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          // First error wins; remaining indices are skipped.
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

struct ItemFailure {
  std::string item_id;
  std::string model_id;
  std::string message;
  friend bool operator==(const ItemFailure&, const ItemFailure&) = default;
};

struct StageOptions {
  double failure_threshold = 0.02;  // abort if failures / items exceeds this
  int workers = 4;
};

inline void check_failure_threshold(std::size_t failures, std::size_t total, double threshold,
                                    const std::string& stage) {
  if (total > 0 && static_cast<double>(failures) / static_cast<double>(total) > threshold)
    throw RunAborted(stage + ": " + std::to_string(failures) + " of " + std::to_string(total) +
                     " items failed, above the failure threshold");
}

// ---------------------------------------------------------------------------
// Generation

struct GenerationOutcome {
  std::vector<ModelResponse> responses;  // sorted by item_id
  std::vector<ItemFailure> failures;     // sorted by item_id
};

inline GenerationOutcome generate_responses(const Benchmark& bench, const ModelAdapterConfig& adapter,
                                            ResponseCache& cache, GenerationGateway& gateway,
                                            const StageOptions& options = {}) {
  const std::string hash = adapter.gen_config_hash();
  std::vector<std::optional<ModelResponse>> slots(bench.items.size());
  std::vector<std::optional<std::string>> errors(bench.items.size());

  detail::parallel_for(bench.items.size(), options.workers, [&](std::size_t i) {
    const BenchmarkItem& item = bench.items[i];
    const std::string key = response_cache_key(item.id, adapter.model_id, hash);
    if (auto hit = cache.lookup(key)) {
      slots[i] = std::move(hit);
      return;
    }
    try {
      GenerationRequest req{adapter.model_id, item.audio, effective_instruction(item, adapter),
                            adapter.temperature, adapter.max_tokens};
      GenerationResult result = gateway.generate_with_retry(req).value;
      ModelResponse r{item.id, adapter.model_id, result.text, hash, result.latency_ms,
                      result.created_at};
      slots[i] = cache.publish(key, r);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  GenerationOutcome out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) out.responses.push_back(std::move(*slots[i]));
    if (errors[i]) out.failures.push_back({bench.items[i].id, adapter.model_id, *errors[i]});
  }
  auto by_item = [](const auto& a, const auto& b) { return a.item_id < b.item_id; };
  std::sort(out.responses.begin(), out.responses.end(), by_item);
  std::sort(out.failures.begin(), out.failures.end(), by_item);
  check_failure_threshold(out.failures.size(), bench.items.size(), options.failure_threshold,
                          "generation for " + adapter.model_id);
  return out;
}

// ---------------------------------------------------------------------------
// Judge prompt

/// Judge prompt template. Required slots {reference}, {response}, {rubric},
/// {output_format} appear exactly once; {text_instruction} is optional and,
/// when the item has no instruction, its line (and a label line directly
/// above a slot-only line) is removed.
class JudgePromptTemplate {
 public:
  static constexpr const char* kDefaultText =
      "You are grading the reply of an audio assistant. You can hear the audio input that the "
      "assistant received. Compare the reply with the reference answer and grade it with the "
      "rubric below.\n"
      "\n"
      "Text instruction given with the audio: {text_instruction}\n"
      "\n"
      "Reference answer:\n"
      "{reference}\n"
      "\n"
      "Assistant reply:\n"
      "{response}\n"
      "\n"
      "Rubric:\n"
      "{rubric}\n"
      "\n"
      "{output_format}";

  static constexpr const char* kDefaultOutputFormat =
      "Explain your assessment briefly, then finish with a final line of the form "
      "\"Score: <integer 1-5>\".";

  static constexpr const char* kRetryReminder =
      "\n\nYour previous reply did not end with a valid score line. Reply again and finish with "
      "a final line exactly of the form \"Score: N\" where N is an integer from 1 to 5.";

  explicit JudgePromptTemplate(std::string text = kDefaultText,
                               std::string output_format = kDefaultOutputFormat)
      : text_(std::move(text)), output_format_(std::move(output_format)) {
    for (const char* slot : {"{reference}", "{response}", "{rubric}", "{output_format}"}) {
      auto n = count(slot);
      if (n == 0) throw SlotMissing(std::string("judge template lacks slot ") + slot);
      if (n > 1) throw TemplateError(std::string("judge template repeats slot ") + slot);
    }
    if (count("{text_instruction}") > 1)
      throw TemplateError("judge template repeats slot {text_instruction}");
    if (output_format_.find("Score:") == std::string::npos)
      throw TemplateError("judge output format must require a final 'Score: <integer 1-5>' line");
  }

  const std::string& text() const { return text_; }
  const std::string& output_format() const { return output_format_; }

  std::string render(const std::optional<std::string>& instruction, const std::string& reference,
                     const std::string& response, const Rubric& rubric) const {
    std::string body = text_;
    if (!instruction) body = elide_instruction_line(body);
    std::string rubric_text;
    for (std::size_t i = 0; i < rubric.anchors.size(); ++i)
      rubric_text += (i ? "\n" : "") + std::to_string(i + 1) + ": " + rubric.anchors[i];
    const std::map<std::string, std::string> values{
        {"text_instruction", instruction.value_or("")},
        {"reference", reference},
        {"response", response},
        {"rubric", rubric_text},
        {"output_format", output_format_}};
    // Single left-to-right pass so slot-like text inside values stays literal.
    std::string out;
    for (std::size_t i = 0; i < body.size();) {
      if (body[i] == '{') {
        auto close = body.find('}', i);
        if (close != std::string::npos) {
          auto it = values.find(body.substr(i + 1, close - i - 1));
          if (it != values.end()) {
            out += it->second;
            i = close + 1;
            continue;
          }
        }
      }
      out += body[i++];
    }
    return out;
  }

  json to_json() const { return json{{"template", text_}, {"output_format", output_format_}}; }

 private:
  std::size_t count(const std::string& slot) const {
    std::size_t n = 0;
    for (auto pos = text_.find(slot); pos != std::string::npos; pos = text_.find(slot, pos + 1)) ++n;
    return n;
  }

  static std::string elide_instruction_line(const std::string& body) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (true) {
      auto nl = body.find('\n', start);
      lines.push_back(body.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
      if (nl == std::string::npos) break;
      start = nl + 1;
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].find("{text_instruction}") == std::string::npos) continue;
      bool slot_only = trim_view(lines[i]) == "{text_instruction}";
      std::size_t first = i;
      if (slot_only && i > 0 && !trim_view(lines[i - 1]).empty()) first = i - 1;
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(first),
                  lines.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      // Avoid leaving two blank lines where the block was.
      if (first < lines.size() && first > 0 && trim_view(lines[first]).empty() &&
          trim_view(lines[first - 1]).empty())
        lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(first));
      break;
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) out += (i ? "\n" : "") + lines[i];
    return out;
  }

  static std::string_view trim_view(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  std::string text_;
  std::string output_format_;
};

inline std::string build_judge_prompt(const BenchmarkItem& item, const ModelResponse& response,
                                      const Rubric& rubric, const JudgePromptTemplate& tmpl) {
  validate(rubric);
  return tmpl.render(item.text_instruction, item.reference, response.text, rubric);
}

// ---------------------------------------------------------------------------
// Score extraction and judging

/// Scans from the last line upwards; the first "Score: N" line decides.
inline int extract_score(const std::string& raw) {
  static const std::regex kScoreLine(
      R"(^[\s#>*_]*(?:final\s+)?score[*_]*\s*:[\s*_]*([+-]?\d+)[*_]*\s*(?:/\s*5)?[\s*_.]*$)",
      std::regex::icase);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto nl = raw.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(raw.substr(start));
      break;
    }
    lines.push_back(raw.substr(start, nl - start));
    start = nl + 1;
  }
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string line = *it;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (!std::regex_match(line, m, kScoreLine)) continue;
    const std::string digits = m[1].str();
    if (digits.size() > 3) throw ScoreParseError("score '" + digits + "' outside 1..5");
    int score = std::stoi(digits);
    if (score < 1 || score > 5)
      throw ScoreParseError("score " + std::to_string(score) + " outside 1..5");
    return score;
  }
  throw ScoreParseError("no 'Score: N' line in judge reply");
}

struct JudgeConfig {
  std::string judge_id = "judge";
  json gateway = json{{"endpoint", "mock:"}};  // LLM gateway config for the judge
  double temperature = 0.0;
  int retry_budget = 3;  // total attempts when the reply has no parseable score

  static JudgeConfig from_json(const json& j) {
    if (!j.is_object()) throw ParseError("judge config must be a JSON object");
    JudgeConfig c;
    c.judge_id = j.value("judge_id", c.judge_id);
    c.temperature = j.value("temperature", 0.0);
    c.retry_budget = j.value("retry_budget", 3);
    c.gateway = j;
    c.gateway["temperature"] = c.temperature;
    if (c.judge_id.empty()) throw ParseError("judge config: judge_id is empty");
    if (c.retry_budget < 1) throw ParseError("judge config: retry_budget must be >= 1");
    if (!j.contains("endpoint")) throw ParseError("judge config lacks 'endpoint'");
    return c;
  }

  json to_json() const {
    json j = gateway;
    j["judge_id"] = judge_id;
    j["temperature"] = temperature;
    j["retry_budget"] = retry_budget;
    return j;
  }
};

/// Sends the item audio plus the rendered prompt to the judge and re-prompts
/// with a format reminder while no score can be extracted.
inline JudgeVerdict judge_response(const BenchmarkItem& item, const ModelResponse& response,
                                   const Rubric& rubric, const JudgePromptTemplate& tmpl,
                                   LlmGateway& judge, int retry_budget,
                                   const std::string& judge_id = "judge") {
  const std::string prompt = build_judge_prompt(item, response, rubric, tmpl);
  const int budget = std::max(1, retry_budget);
  std::string last_error;
  for (int attempt = 1; attempt <= budget; ++attempt) {
    LlmRequest req{"judge", attempt == 1 ? prompt : prompt + JudgePromptTemplate::kRetryReminder,
                   response.text, item.audio, item.language};
    std::string raw = judge.complete_with_retry(req).value;
    try {
      int score = extract_score(raw);
      return JudgeVerdict{item.id, response.model_id, judge_id, score, raw, attempt};
    } catch (const ScoreParseError& e) {
      last_error = e.what();
    }
  }
  throw JudgeFailed("judge gave no usable score for " + item.id + "/" + response.model_id +
                    " after " + std::to_string(budget) + " attempts: " + last_error);
}

struct JudgingOutcome {
  std::vector<JudgeVerdict> verdicts;  // sorted by (model_id, item_id)
  std::vector<ItemFailure> failures;
};

inline std::string verdict_cache_key(const JudgeConfig& judge, const JudgePromptTemplate& tmpl,
                                     const std::string& prompt, const ModelResponse& r) {
  return r.item_id + '\x1f' + r.model_id + '\x1f' + judge.judge_id + '\x1f' +
         sha256_hex(canonical_dump(judge.to_json()) + "\x1f" + canonical_dump(tmpl.to_json()) +
                    "\x1f" + prompt);
}

inline JudgingOutcome judge_responses(const Benchmark& bench,
                                      const std::vector<ModelResponse>& responses,
                                      const RubricStore& rubrics, const JudgePromptTemplate& tmpl,
                                      const JudgeConfig& config, LlmGateway& judge,
                                      VerdictCache& cache, const StageOptions& options = {}) {
  std::map<std::string, const BenchmarkItem*> items;
  for (const auto& item : bench.items) items[item.id] = &item;
  std::vector<std::optional<JudgeVerdict>> slots(responses.size());
  std::vector<std::optional<std::string>> errors(responses.size());

  detail::parallel_for(responses.size(), options.workers, [&](std::size_t i) {
    const ModelResponse& r = responses[i];
    try {
      auto it = items.find(r.item_id);
      if (it == items.end()) throw InvariantViolation("response for unknown item " + r.item_id);
      const BenchmarkItem& item = *it->second;
      const Rubric& rubric = rubrics.get(item.task, item.language);
      const std::string key =
          verdict_cache_key(config, tmpl, build_judge_prompt(item, r, rubric, tmpl), r);
      if (auto hit = cache.lookup(key)) {
        slots[i] = std::move(hit);
        return;
      }
      slots[i] = cache.publish(
          key, judge_response(item, r, rubric, tmpl, judge, config.retry_budget, config.judge_id));
    } catch (const RubricMissing&) {
      throw;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  JudgingOutcome out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) out.verdicts.push_back(std::move(*slots[i]));
    if (errors[i]) out.failures.push_back({responses[i].item_id, responses[i].model_id, *errors[i]});
  }
  std::sort(out.verdicts.begin(), out.verdicts.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.item_id) < std::tie(b.model_id, b.item_id);
  });
  std::sort(out.failures.begin(), out.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_id, a.item_id) < std::tie(b.model_id, b.item_id);
  });
  check_failure_threshold(out.failures.size(), responses.size(), options.failure_threshold,
                          "judging");
  return out;
}

// ---------------------------------------------------------------------------
// Run orchestration

inline std::string file_safe(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
  return out;
}

inline std::string responses_file(const std::string& model_id) {
  return file_safe(model_id) + ".resp.jsonl";
}
inline std::string verdicts_file(const std::string& model_id) {
  return file_safe(model_id) + ".judge.jsonl";
}

inline constexpr const char* kRunManifestFile = "run.json";
inline constexpr const char* kJudgeManifestFile = "judge.json";
inline constexpr const char* kRunBenchmarkFile = "bench.items.jsonl";

struct AdapterBinding {
  ModelAdapterConfig config;
  GenerationGateway* gateway = nullptr;
};

struct JudgeBinding {
  JudgeConfig config;
  JudgePromptTemplate tmpl;
  const RubricStore* rubrics = nullptr;
  LlmGateway* gateway = nullptr;
};

struct RunOptions {
  fs::path out_dir;
  std::uint64_t seed = 0;
  StageOptions stage;
  bool resume = false;
  json global_config = json::object();
  std::optional<Timestamp> created_at;  // defaults to now
};

struct RunResult {
  RunManifest manifest;
  fs::path manifest_path;
  std::vector<ItemFailure> failures;
  std::size_t generation_calls = 0;
  std::size_t judge_calls = 0;
};

inline RunManifest read_manifest(const fs::path& path) {
  return parse_record<RunManifest>(read_text_file(path));
}

inline std::string make_run_id(const Timestamp& created, const std::string& bench_sha,
                               std::uint64_t seed, const json& adapters) {
  std::string stamp = created.to_string();
  stamp.erase(std::remove_if(stamp.begin(), stamp.end(),
                             [](char c) { return c == '-' || c == ':' || c == '.'; }),
              stamp.end());
  return "run-" + stamp + "-" +
         sha256_hex(bench_sha + "|" + std::to_string(seed) + "|" + canonical_dump(adapters))
             .substr(0, 8);
}

namespace detail {

inline void write_failures(const fs::path& dir, const std::string& name,
                           const std::vector<ItemFailure>& failures) {
  if (failures.empty()) return;
  json arr = json::array();
  for (const auto& f : failures)
    arr.push_back(json{{"item_id", f.item_id}, {"model_id", f.model_id}, {"error", f.message}});
  write_json_file(dir / name, arr);
}

/// Writes a manifest once. An existing manifest is kept if it describes the
/// same run (everything except run_id and created_at); otherwise refuse.
inline RunManifest publish_manifest(const fs::path& path, RunManifest manifest) {
  if (fs::exists(path)) {
    RunManifest existing = read_manifest(path);
    RunManifest probe = manifest;
    probe.run_id = existing.run_id;
    probe.created_at = existing.created_at;
    if (!(probe == existing))
      throw PreconditionError(path.string() + " already describes a different run");
    return existing;
  }
  atomic_write_text(path, serialize_record(manifest) + "\n");
  return manifest;
}

}  // namespace detail

/// Generation stage: one *.resp.jsonl per adapter plus run.json.
inline RunResult run_generation(const Benchmark& bench, const std::vector<AdapterBinding>& adapters,
                                const RunOptions& options) {
  std::set<std::string> ids;
  for (const auto& a : adapters)
    if (!ids.insert(a.config.model_id).second)
      throw PreconditionError("duplicate model_id " + a.config.model_id + " in one run");
  const fs::path dir = options.out_dir;
  fs::create_directories(dir);
  if (!options.resume && fs::exists(dir / "cache" / "responses") &&
      !fs::is_empty(dir / "cache" / "responses"))
    throw PreconditionError(dir.string() + " already holds a response cache; pass --resume or use a fresh --out");

  ResponseCache cache(dir / "cache" / "responses");
  RunResult result;
  json adapter_configs = json::array();
  json artifacts{{"benchmark", kRunBenchmarkFile}};
  write_benchmark(dir / kRunBenchmarkFile, bench);
  for (const auto& a : adapters) {
    std::size_t before = a.gateway->calls();
    auto outcome = generate_responses(bench, a.config, cache, *a.gateway, options.stage);
    result.generation_calls += a.gateway->calls() - before;
    write_records(dir / responses_file(a.config.model_id), outcome.responses);
    result.failures.insert(result.failures.end(), outcome.failures.begin(), outcome.failures.end());
    adapter_configs.push_back(a.config.to_json());
    artifacts["responses/" + a.config.model_id] = responses_file(a.config.model_id);
  }
  detail::write_failures(dir, "generation.failures.json", result.failures);

  RunManifest m;
  m.created_at = options.created_at.value_or(Timestamp::now());
  m.benchmark_sha256 = bench.sha256;
  m.adapter_configs = adapter_configs;
  m.seed = options.seed;
  m.config = options.global_config;
  m.artifacts = artifacts;
  m.run_id = make_run_id(m.created_at, bench.sha256, options.seed, adapter_configs);
  result.manifest_path = dir / kRunManifestFile;
  result.manifest = detail::publish_manifest(result.manifest_path, m);
  return result;
}

/// Judge stage over a run directory produced by run_generation.
inline RunResult run_judging(const fs::path& run_dir, const JudgeBinding& judge,
                             const RunOptions& options) {
  RunManifest base = read_manifest(run_dir / kRunManifestFile);
  Benchmark bench = load_benchmark(run_dir / base.artifacts.at("benchmark").get<std::string>());
  if (bench.sha256 != base.benchmark_sha256)
    throw InvariantViolation("benchmark in " + run_dir.string() + " does not match its manifest");
  if (!options.resume && fs::exists(run_dir / "cache" / "verdicts") &&
      !fs::is_empty(run_dir / "cache" / "verdicts"))
    throw PreconditionError(run_dir.string() + " already holds a verdict cache; pass --resume");

  VerdictCache cache(run_dir / "cache" / "verdicts");
  RunResult result;
  RunManifest m = base;
  m.judge_config = judge.config.to_json();
  m.judge_config["template"] = judge.tmpl.to_json();
  std::size_t before = judge.gateway->calls();
  for (const auto& adapter_json : base.adapter_configs) {
    const std::string model_id = adapter_json.at("model_id").get<std::string>();
    auto responses = read_records<ModelResponse>(
        run_dir / m.artifacts.at("responses/" + model_id).get<std::string>());
    auto outcome = judge_responses(bench, responses, *judge.rubrics, judge.tmpl, judge.config,
                                   *judge.gateway, cache, options.stage);
    write_records(run_dir / verdicts_file(model_id), outcome.verdicts);
    m.artifacts["verdicts/" + model_id] = verdicts_file(model_id);
    result.failures.insert(result.failures.end(), outcome.failures.begin(), outcome.failures.end());
  }
  result.judge_calls = judge.gateway->calls() - before;
  detail::write_failures(run_dir, "judging.failures.json", result.failures);
  result.manifest_path = run_dir / kJudgeManifestFile;
  result.manifest = detail::publish_manifest(result.manifest_path, m);
  return result;
}

/// Both stages in one call; refuses benchmarks with validation violations.
inline RunResult run_evaluation(const Benchmark& bench, const CompositionProfile& profile,
                                const std::vector<AdapterBinding>& adapters,
                                const JudgeBinding& judge, const RunOptions& options) {
  auto report = validate_benchmark(bench, profile);
  if (!report.ok())
    throw ValidationFailed("benchmark has " + std::to_string(report.violations.size()) +
                           " violations; first: " + report.violations.front().to_line());
  RunResult gen = run_generation(bench, adapters, options);
  RunResult judged = run_judging(options.out_dir, judge, options);
  judged.generation_calls = gen.generation_calls;
  judged.failures.insert(judged.failures.begin(), gen.failures.begin(), gen.failures.end());
  return judged;
}

}  // namespace audiojudge
