#pragma once

// Mockable seams to external generation services: a text/audio LLM gateway
// (punctuation restoration, translation, summarization, judging) and a TTS
// gateway. Concrete backends are either the generic HTTP JSON contract or the
// deterministic built-in mock selected with endpoint "mock:".

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "httplib.h"

#include "audiojudge/error.hpp"
#include "audiojudge/fingerprint.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

struct RetryPolicy {
  int max_attempts = 3;  // total attempts, including the first
};

template <class T>
struct Attempted {
  T value;
  int attempts = 1;
};

/// Calls f until it returns without throwing GatewayError or the attempt
/// budget is spent; the last GatewayError is rethrown with the count.
template <class F>
auto with_retry(const RetryPolicy& policy, F&& f) -> Attempted<decltype(f())> {
  const int budget = std::max(1, policy.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      return {f(), attempt};
    } catch (const GatewayError& e) {
      if (attempt >= budget)
        throw GatewayError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                           " attempts)");
    }
  }
}

/// Bounds the number of concurrent calls into one gateway.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(std::max(1, limit)) {}

  class Slot {
   public:
    explicit Slot(InFlightLimiter& l) : l_(l) {
      std::unique_lock lock(l_.m_);
      l_.cv_.wait(lock, [&] { return l_.active_ < l_.limit_; });
      ++l_.active_;
    }
    ~Slot() {
      {
        std::lock_guard lock(l_.m_);
        --l_.active_;
      }
      l_.cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    InFlightLimiter& l_;
  };

  int limit() const { return limit_; }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

struct GatewayOptions {
  RetryPolicy retry;
  int max_in_flight = 4;
};

// ---------------------------------------------------------------------------
// LLM gateway

/// One LLM call. `purpose` names the pipeline step (restore_punctuation,
/// translate, caption_translate, summarize, aqa, judge) and `payload` carries
/// the raw input text embedded in the prompt; both are routing metadata and
/// never change the prompt itself.
struct LlmRequest {
  std::string purpose;
  std::string prompt;
  std::string payload;
  std::optional<AudioAsset> audio;
  Language language;
};

class LlmGateway {
 public:
  explicit LlmGateway(GatewayOptions options = {})
      : options_(options), limiter_(options.max_in_flight) {}
  virtual ~LlmGateway() = default;

  /// Single attempt. Throws GatewayError on transport failure.
  std::string complete(const LlmRequest& request) {
    calls_.fetch_add(1);
    InFlightLimiter::Slot slot(limiter_);
    return do_complete(request);
  }

  std::string complete(const std::string& prompt, const std::optional<AudioAsset>& audio,
                       const Language& language) {
    return complete(LlmRequest{"", prompt, "", audio, language});
  }

  /// Retries transport failures according to the gateway's retry policy.
  Attempted<std::string> complete_with_retry(const LlmRequest& request) {
    return with_retry(options_.retry, [&] { return complete(request); });
  }

  std::size_t calls() const { return calls_.load(); }
  const GatewayOptions& options() const { return options_; }

 protected:
  virtual std::string do_complete(const LlmRequest& request) = 0;

 private:
  GatewayOptions options_;
  InFlightLimiter limiter_;
  std::atomic<std::size_t> calls_{0};
};

/// Replies come from a queue of scripted outcomes, then from a fallback
/// function. A scripted outcome without a value is a transport failure.
class ScriptedLlm : public LlmGateway {
 public:
  using Fallback = std::function<std::string(const LlmRequest&)>;

  explicit ScriptedLlm(std::vector<std::optional<std::string>> script = {},
                       Fallback fallback = nullptr, GatewayOptions options = {})
      : LlmGateway(options), script_(script.begin(), script.end()),
        fallback_(std::move(fallback)) {}

  static ScriptedLlm replying(std::string reply, GatewayOptions options = {}) {
    return ScriptedLlm({}, [reply](const LlmRequest&) { return reply; }, options);
  }

  std::vector<LlmRequest> requests() const {
    std::lock_guard lock(m_);
    return seen_;
  }

 protected:
  std::string do_complete(const LlmRequest& request) override {
    std::optional<std::string> outcome;
    {
      std::lock_guard lock(m_);
      seen_.push_back(request);
      if (!script_.empty()) {
        outcome = script_.front();
        script_.pop_front();
        if (!outcome) throw GatewayError("scripted transport failure");
        return *outcome;
      }
    }
    if (!fallback_) throw GatewayError("script exhausted");
    return fallback_(request);
  }

 private:
  mutable std::mutex m_;
  std::deque<std::optional<std::string>> script_;
  Fallback fallback_;
  std::vector<LlmRequest> seen_;
};

namespace detail {

inline std::string short_hash(std::string_view text) { return sha256_hex(text).substr(0, 8); }

}  // namespace detail

/// Deterministic stand-in for a real LLM; the reply depends only on the
/// request. Punctuation restoration capitalizes and terminates the payload
/// without changing words, so restored text passes the consistency filter.
class MockLlm : public LlmGateway {
 public:
  using LlmGateway::LlmGateway;

 protected:
  std::string do_complete(const LlmRequest& r) override {
    const std::string audio_key = r.audio ? r.audio->sha256 : std::string();
    const std::string h = detail::short_hash(r.purpose + "|" + r.prompt + "|" + audio_key);
    if (r.purpose == "restore_punctuation") {
      std::string out = r.payload;
      if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 32);
      return out + ".";
    }
    if (r.purpose == "translate" || r.purpose == "caption_translate")
      return "[" + r.language.code() + "] " + r.payload;
    if (r.purpose == "summarize") return "Summary " + h + ".";
    if (r.purpose == "aqa") return "Q: What can be heard in clip " + h + "?\nA: Sound " + h + ".";
    if (r.purpose == "judge") {
      int score = 1 + static_cast<int>(fnv1a64(h) % 5);
      return "The response was compared with the reference.\nScore: " + std::to_string(score);
    }
    return r.payload.empty() ? "ok " + h : r.payload;
  }
};

namespace detail {

struct HttpTarget {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline HttpTarget split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw PreconditionError("bad endpoint url '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

/// POSTs a JSON body and returns the parsed JSON reply; any transport
/// failure or non-2xx status is a GatewayError.
inline json post_json(const std::string& url, const json& body, const std::string& api_key_env,
                      int timeout_s) {
  auto target = split_url(url);
  httplib::Client client(target.base);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  httplib::Headers headers;
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(target.path, headers, body.dump(), "application/json");
  if (!res) throw GatewayError("POST " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw GatewayError("POST " + url + " returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw GatewayError("POST " + url + " returned malformed JSON");
  }
}

}  // namespace detail

/// Generic HTTP contract: POST {model, purpose, prompt, payload, language,
/// audio, temperature} and read {"text": ...}.
class HttpLlm : public LlmGateway {
 public:
  HttpLlm(std::string endpoint, std::string model, double temperature, std::string api_key_env,
          int timeout_s, GatewayOptions options)
      : LlmGateway(options), endpoint_(std::move(endpoint)), model_(std::move(model)),
        temperature_(temperature), api_key_env_(std::move(api_key_env)), timeout_s_(timeout_s) {}

 protected:
  std::string do_complete(const LlmRequest& r) override {
    json body{{"model", model_},          {"purpose", r.purpose},
              {"prompt", r.prompt},       {"payload", r.payload},
              {"language", r.language.code()}, {"temperature", temperature_},
              {"audio", r.audio ? encode(*r.audio) : json(nullptr)}};
    json reply = detail::post_json(endpoint_, body, api_key_env_, timeout_s_);
    if (!reply.contains("text") || !reply["text"].is_string())
      throw GatewayError("LLM endpoint reply lacks a text field");
    return reply["text"].get<std::string>();
  }

 private:
  std::string endpoint_, model_;
  double temperature_;
  std::string api_key_env_;
  int timeout_s_;
};

// ---------------------------------------------------------------------------
// TTS gateway

class TtsGateway {
 public:
  explicit TtsGateway(GatewayOptions options = {})
      : options_(options), limiter_(options.max_in_flight) {}
  virtual ~TtsGateway() = default;

  AudioAsset synthesize(const std::string& text, const Language& language,
                        const std::string& voice_id) {
    calls_.fetch_add(1);
    InFlightLimiter::Slot slot(limiter_);
    AudioAsset a = do_synthesize(text, language, voice_id);
    try {
      validate(a);
    } catch (const InvariantViolation& e) {
      throw GatewayError(std::string("TTS returned an invalid asset: ") + e.what());
    }
    return a;
  }

  Attempted<AudioAsset> synthesize_with_retry(const std::string& text, const Language& language,
                                              const std::string& voice_id) {
    return with_retry(options_.retry, [&] { return synthesize(text, language, voice_id); });
  }

  std::size_t calls() const { return calls_.load(); }
  const GatewayOptions& options() const { return options_; }

 protected:
  virtual AudioAsset do_synthesize(const std::string& text, const Language& language,
                                   const std::string& voice_id) = 0;

 private:
  GatewayOptions options_;
  InFlightLimiter limiter_;
  std::atomic<std::size_t> calls_{0};
};

/// Deterministic TTS stand-in. When a media directory is set, the synthetic
/// clip bytes are written there so the asset digest matches file content.
class MockTts : public TtsGateway {
 public:
  explicit MockTts(std::optional<fs::path> media_dir = std::nullopt, GatewayOptions options = {})
      : TtsGateway(options), media_dir_(std::move(media_dir)) {}

 protected:
  AudioAsset do_synthesize(const std::string& text, const Language& language,
                           const std::string& voice_id) override {
    const std::string bytes = "MOCKWAV|" + voice_id + "|" + language.code() + "|" + text;
    AudioAsset a;
    a.sha256 = sha256_hex(bytes);
    a.uri = "tts/" + a.sha256.substr(0, 16) + ".wav";
    a.format = "wav";
    a.sample_rate_hz = 24000;
    a.duration_s = 0.5 + 0.06 * static_cast<double>(text.size());
    if (media_dir_) {
      auto path = *media_dir_ / a.uri;
      if (!fs::exists(path)) atomic_write_text(path, bytes);
    }
    return a;
  }

 private:
  std::optional<fs::path> media_dir_;
};

/// Generic HTTP contract: POST {model, text, language, voice} and read an
/// AudioAsset object.
class HttpTts : public TtsGateway {
 public:
  HttpTts(std::string endpoint, std::string model, std::string api_key_env, int timeout_s,
          GatewayOptions options)
      : TtsGateway(options), endpoint_(std::move(endpoint)), model_(std::move(model)),
        api_key_env_(std::move(api_key_env)), timeout_s_(timeout_s) {}

 protected:
  AudioAsset do_synthesize(const std::string& text, const Language& language,
                           const std::string& voice_id) override {
    json body{{"model", model_}, {"text", text}, {"language", language.code()}, {"voice", voice_id}};
    json reply = detail::post_json(endpoint_, body, api_key_env_, timeout_s_);
    try {
      return decode<AudioAsset>(reply);
    } catch (const InvariantViolation& e) {
      throw GatewayError(std::string("TTS endpoint reply is not an audio asset: ") + e.what());
    }
  }

 private:
  std::string endpoint_, model_, api_key_env_;
  int timeout_s_;
};

// ---------------------------------------------------------------------------
// Construction from configuration
//
//   {"endpoint": "mock:" | "http://host:port/path", "model": "...",
//    "retry_budget": 3, "max_in_flight": 4, "api_key_env": "NAME",
//    "timeout_s": 60, "temperature": 0}

inline GatewayOptions gateway_options_from(const json& cfg) {
  GatewayOptions o;
  o.retry.max_attempts = cfg.value("retry_budget", 3);
  o.max_in_flight = cfg.value("max_in_flight", 4);
  if (o.retry.max_attempts < 1) throw PreconditionError("retry_budget must be >= 1");
  if (o.max_in_flight < 1) throw PreconditionError("max_in_flight must be >= 1");
  return o;
}

inline bool is_mock_endpoint(const std::string& endpoint) { return endpoint.rfind("mock:", 0) == 0; }

inline std::unique_ptr<LlmGateway> make_llm_gateway(const json& cfg) {
  const std::string endpoint = cfg.value("endpoint", "");
  auto options = gateway_options_from(cfg);
  if (is_mock_endpoint(endpoint)) return std::make_unique<MockLlm>(options);
  if (endpoint.rfind("http", 0) == 0)
    return std::make_unique<HttpLlm>(endpoint, cfg.value("model", ""),
                                     cfg.value("temperature", 0.0), cfg.value("api_key_env", ""),
                                     cfg.value("timeout_s", 120), options);
  throw PreconditionError("unsupported LLM endpoint '" + endpoint + "'");
}

inline std::unique_ptr<TtsGateway> make_tts_gateway(const json& cfg,
                                                    std::optional<fs::path> media_dir) {
  const std::string endpoint = cfg.value("endpoint", "");
  auto options = gateway_options_from(cfg);
  if (is_mock_endpoint(endpoint)) return std::make_unique<MockTts>(std::move(media_dir), options);
  if (endpoint.rfind("http", 0) == 0)
    return std::make_unique<HttpTts>(endpoint, cfg.value("model", ""), cfg.value("api_key_env", ""),
                                     cfg.value("timeout_s", 120), options);
  throw PreconditionError("unsupported TTS endpoint '" + endpoint + "'");
}

}  // namespace audiojudge
