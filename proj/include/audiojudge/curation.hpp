#pragma once

// Training-data factory: per-task constructors that turn raw source units
// (ASR pairs, English captions, text QA pairs, long-form audio) into
// Conversation records through the LLM and TTS gateways, plus the
// distribution report over a finished corpus.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "audiojudge/error.hpp"
#include "audiojudge/gateway.hpp"
#include "audiojudge/schema.hpp"
#include "audiojudge/text.hpp"

namespace audiojudge {

// ---------------------------------------------------------------------------
// Source units

struct AsrUnit {
  AudioAsset audio;
  std::string transcript;
  Language language;
  std::string source;
};

inline AsrUnit parse_asr_unit(const json& j) {
  detail::FieldReader f(j, "AsrUnit");
  AsrUnit u;
  u.audio = decode<AudioAsset>(f.raw("audio"));
  u.transcript = f.str("transcript");
  u.language = Language::parse(f.str("language"));
  u.source = f.str("source");
  f.reject_unknown();
  validate(u.audio);
  if (u.transcript.empty()) throw InvariantViolation("AsrUnit: transcript is empty");
  return u;
}

// ---------------------------------------------------------------------------
// Seeded choices

/// Index in [0, n) fixed by (seed, key); independent of call order.
inline std::size_t seeded_index(std::uint64_t seed, std::string_view key, std::size_t n) {
  if (n == 0) throw PreconditionError("seeded_index: empty range");
  std::mt19937_64 rng(seed ^ fnv1a64(key));
  return static_cast<std::size_t>(rng() % n);
}

inline std::string fill(std::string text, const std::string& slot, const std::string& value) {
  for (std::size_t pos = 0; (pos = text.find(slot, pos)) != std::string::npos; pos += value.size())
    text.replace(pos, slot.size(), value);
  return text;
}

/// Phrasings for a user instruction; "{language}" expands to the target
/// language's English name.
class InstructionPool {
 public:
  InstructionPool() = default;
  InstructionPool(std::initializer_list<std::string> phrasings) : phrasings_(phrasings) {}
  explicit InstructionPool(std::vector<std::string> phrasings) : phrasings_(std::move(phrasings)) {}

  bool empty() const { return phrasings_.empty(); }
  std::size_t size() const { return phrasings_.size(); }

  std::string pick(std::uint64_t seed, std::string_view key, const Language& target) const {
    if (phrasings_.empty()) throw PreconditionError("instruction pool is empty");
    return fill(phrasings_[seeded_index(seed, key, phrasings_.size())], "{language}",
                target.display_name());
  }

 private:
  std::vector<std::string> phrasings_;
};

struct InstructionPools {
  InstructionPool asr{"Transcribe the speech in this audio.",
                      "Write down exactly what is said in the recording.",
                      "Please provide a transcript of this audio clip.",
                      "What is being said here? Give the verbatim transcription."};
  InstructionPool s2tt{"Translate the speech into {language}.",
                       "Listen to the audio and write its translation in {language}.",
                       "Render what the speaker says in {language}.",
                       "Give a {language} translation of this recording."};
  InstructionPool ac{"Describe the sounds in this audio in {language}.",
                     "Write a short {language} caption for this audio clip.",
                     "What can be heard in this recording? Answer in {language}."};
  InstructionPool ss{"Summarize the speech in {language}.",
                     "Give a brief {language} summary of what is said.",
                     "Write a short summary of this recording in {language}."};
};

/// Prompt templates sent to the LLM gateway. Slots: {text}, {language}.
struct CurationPrompts {
  std::string restore_punctuation =
      "Restore punctuation and spacing in the following {language} transcript. "
      "Do not add, remove or change any word. Reply with the corrected text only.\n\n{text}";
  std::string translate =
      "Translate the following transcript into {language}. Reply with the translation only."
      "\n\n{text}";
  std::string caption_translate =
      "Translate the following English audio caption into {language}. Reply with the "
      "translation only.\n\n{text}";
  std::string summarize =
      "Listen to the audio and summarize what is said in {language}. Reply with the summary only.";
  std::string aqa =
      "Listen to the audio. Write one natural question about it in {language} and its answer, "
      "using exactly this format:\nQ: <question>\nA: <answer>";
};

inline std::string render_prompt(const std::string& tmpl, const std::string& text,
                                 const Language& language) {
  return fill(fill(tmpl, "{language}", language.display_name()), "{text}", text);
}

inline std::string conversation_id(TrainingTask task, const std::string& key) {
  return to_string(task) + "-" + sha256_hex(key).substr(0, 16);
}

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// ---------------------------------------------------------------------------
// ASR

/// Punctuation restoration through the LLM. The reply is returned verbatim;
/// acceptance is the consistency filter's job.
inline Attempted<std::string> restore_punctuation(const std::string& text, const Language& language,
                                                  LlmGateway& llm,
                                                  const CurationPrompts& prompts = {}) {
  if (text.empty()) throw PreconditionError("restore_punctuation: empty text");
  LlmRequest req{"restore_punctuation", render_prompt(prompts.restore_punctuation, text, language),
                 text, std::nullopt, language};
  return llm.complete_with_retry(req);
}

enum class AsrMode { tags, restore };

/// Builds an ASR conversation. Tag mode normalizes tag-punctuated
/// transcripts locally; restore mode asks the LLM to punctuate and drops the
/// unit (nullopt) when the reply changes any word.
inline std::optional<Conversation> build_asr(const AsrUnit& unit, AsrMode mode, const TagMap& tags,
                                             LlmGateway* llm, const InstructionPool& pool,
                                             std::uint64_t seed,
                                             const CurationPrompts& prompts = {}) {
  std::string target;
  if (mode == AsrMode::tags) {
    target = normalize_transcript(unit.transcript, tags);
  } else {
    if (!llm) throw PreconditionError("build_asr: restore mode needs an LLM gateway");
    target = trim(restore_punctuation(unit.transcript, unit.language, *llm, prompts).value);
    if (target.empty() ||
        consistency_filter(unit.transcript, target, unit.language) == FilterDecision::discard)
      return std::nullopt;
  }
  if (is_blank(target)) return std::nullopt;
  const std::string key = "asr|" + unit.source + "|" + unit.audio.sha256;
  Conversation c;
  c.id = conversation_id(TrainingTask::asr, key);
  c.task = TrainingTask::asr;
  c.language = unit.language;
  c.source = unit.source;
  c.turns = {Turn{Role::user, {TextPart{pool.pick(seed, key, unit.language)}, unit.audio}},
             Turn{Role::assistant, {TextPart{target}}}};
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// S2TT and AC (translation-based)

inline Conversation build_s2tt(const AsrUnit& unit, const Language& target, LlmGateway& llm,
                               const InstructionPool& pool, std::uint64_t seed,
                               const CurationPrompts& prompts = {}) {
  if (target == unit.language)
    throw PreconditionError("build_s2tt: target language equals the audio language");
  if (pool.empty()) throw PreconditionError("build_s2tt: instruction pool is empty");
  LlmRequest req{"translate", render_prompt(prompts.translate, unit.transcript, target),
                 unit.transcript, std::nullopt, target};
  std::string translation = trim(llm.complete_with_retry(req).value);
  if (translation.empty()) throw EmptyTranslation("translation of " + unit.audio.uri + " is blank");

  const std::string key = "s2tt|" + unit.source + "|" + unit.audio.sha256 + "|" + target.code();
  Conversation c;
  c.id = conversation_id(TrainingTask::s2tt, key);
  c.task = TrainingTask::s2tt;
  c.language = target;
  c.source = unit.source + ":" + unit.language.code() + "->" + target.code();
  c.turns = {Turn{Role::user, {TextPart{pool.pick(seed, key, target)}, unit.audio}},
             Turn{Role::assistant, {TextPart{translation}}}};
  validate(c);
  return c;
}

inline Conversation build_caption_translation(const std::string& caption, const AudioAsset& audio,
                                              const Language& target, LlmGateway& llm,
                                              const InstructionPool& pool = InstructionPools{}.ac,
                                              std::uint64_t seed = 0,
                                              const std::string& source = "captions",
                                              const CurationPrompts& prompts = {}) {
  if (caption.empty()) throw PreconditionError("build_caption_translation: empty caption");
  LlmRequest req{"caption_translate", render_prompt(prompts.caption_translate, caption, target),
                 caption, std::nullopt, target};
  std::string translated = trim(llm.complete_with_retry(req).value);
  if (translated.empty()) throw EmptyTranslation("caption translation is blank");

  const std::string key = "ac|" + source + "|" + audio.sha256 + "|" + target.code();
  Conversation c;
  c.id = conversation_id(TrainingTask::ac, key);
  c.task = TrainingTask::ac;
  c.language = target;
  c.source = source;
  c.turns = {Turn{Role::user, {TextPart{pool.pick(seed, key, target)}, audio}},
             Turn{Role::assistant, {TextPart{translated}}}};
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Spoken prompts (QA, chat, math, fact)

enum class VoiceSelection { round_robin, seeded_random };

struct VoicePolicy {
  std::map<std::string, std::vector<std::string>> pools;  // language code -> voices
  VoiceSelection mode = VoiceSelection::round_robin;
  std::uint64_t seed = 0;

  static VoicePolicy from_json(const json& j) {
    VoicePolicy p;
    std::string mode = j.value("mode", "round_robin");
    if (mode == "round_robin") p.mode = VoiceSelection::round_robin;
    else if (mode == "seeded_random") p.mode = VoiceSelection::seeded_random;
    else throw ParseError("unknown voice selection mode '" + mode + "'");
    p.seed = j.value("seed", std::uint64_t{0});
    const json pools = j.value("pools", json::object());
    for (const auto& [code, voices] : pools.items()) {
      Language::parse(code);
      p.pools[code] = voices.get<std::vector<std::string>>();
      if (p.pools[code].empty())
        throw InvariantViolation("voice pool for '" + code + "' is empty");
    }
    return p;
  }
};

/// Stateful voice picker: round robin advances a per-language counter,
/// seeded_random draws from a per-language generator seeded by the policy.
class VoiceSelector {
 public:
  explicit VoiceSelector(VoicePolicy policy) : policy_(std::move(policy)) {
    for (const auto& [code, pool] : policy_.pools)
      if (pool.empty()) throw InvariantViolation("voice pool for '" + code + "' is empty");
  }

  std::string next(const Language& language) {
    auto it = policy_.pools.find(language.code());
    if (it == policy_.pools.end() || it->second.empty())
      throw NoVoiceForLanguage("no voice configured for '" + language.code() + "'");
    const auto& pool = it->second;
    if (policy_.mode == VoiceSelection::round_robin)
      return pool[counters_[language.code()]++ % pool.size()];
    auto rng = rngs_.try_emplace(language.code(), policy_.seed ^ fnv1a64(language.code())).first;
    return pool[static_cast<std::size_t>(rng->second() % pool.size())];
  }

 private:
  VoicePolicy policy_;
  std::map<std::string, std::size_t> counters_;
  std::map<std::string, std::mt19937_64> rngs_;
};

inline std::pair<AudioAsset, std::string> synthesize_question_audio(const std::string& text,
                                                                    const Language& language,
                                                                    TtsGateway& tts,
                                                                    VoiceSelector& voices) {
  if (text.empty()) throw PreconditionError("synthesize_question_audio: empty text");
  std::string voice = voices.next(language);
  AudioAsset asset = tts.synthesize_with_retry(text, language, voice).value;
  return {std::move(asset), std::move(voice)};
}

/// Text question spoken via TTS, answer kept as text (qa, math, fact).
inline Conversation build_spoken_qa(const std::string& question, const std::string& answer,
                                    const Language& language, TrainingTask kind, TtsGateway& tts,
                                    VoiceSelector& voices, const std::string& source) {
  if (kind != TrainingTask::qa && kind != TrainingTask::math && kind != TrainingTask::fact &&
      kind != TrainingTask::chat)
    throw PreconditionError("build_spoken_qa: unsupported kind " + to_string(kind));
  if (answer.empty()) throw PreconditionError("build_spoken_qa: empty answer");
  auto [audio, voice] = synthesize_question_audio(question, language, tts, voices);
  Conversation c;
  c.id = conversation_id(kind, to_string(kind) + "|" + source + "|" + language.code() + "|" +
                                   question + "|" + answer);
  c.task = kind;
  c.language = language;
  c.source = source;
  c.turns = {Turn{Role::user, {audio}}, Turn{Role::assistant, {TextPart{answer}}}};
  validate(c);
  return c;
}

/// Voice chat: every user message of a text dialogue becomes audio.
inline Conversation build_voice_chat(
    const std::vector<std::pair<std::string, std::string>>& exchanges, const Language& language,
    TtsGateway& tts, VoiceSelector& voices, const std::string& source) {
  if (exchanges.empty()) throw PreconditionError("build_voice_chat: no exchanges");
  Conversation c;
  std::string key = "chat|" + source + "|" + language.code();
  c.task = TrainingTask::chat;
  c.language = language;
  c.source = source;
  // One voice per dialogue keeps the simulated user consistent.
  const std::string voice = voices.next(language);
  for (const auto& [user, assistant] : exchanges) {
    if (user.empty() || assistant.empty())
      throw PreconditionError("build_voice_chat: empty message");
    AudioAsset audio = tts.synthesize_with_retry(user, language, voice).value;
    c.turns.push_back(Turn{Role::user, {audio}});
    c.turns.push_back(Turn{Role::assistant, {TextPart{assistant}}});
    key += "|" + user + "|" + assistant;
  }
  c.id = conversation_id(TrainingTask::chat, key);
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// SS and AQA (LLM generates the target from audio)

struct DurationBounds {
  double min_s = 10.0;
  double max_s = 300.0;
};

/// Parses the "Q: ...\nA: ..." generation format.
inline std::pair<std::string, std::string> parse_question_answer(const std::string& text) {
  static const std::regex kQa(R"((?:^|\n)[ \t]*Q:[ \t]*([\s\S]*?)\n[ \t]*A:[ \t]*([\s\S]*)$)");
  std::smatch m;
  if (!std::regex_search(text, m, kQa))
    throw MalformedGeneration("reply is not in 'Q: ...\\nA: ...' form");
  std::string q = trim(m[1].str()), a = trim(m[2].str());
  if (q.empty() || a.empty()) throw MalformedGeneration("question or answer is blank");
  return {q, a};
}

inline Conversation build_generated_item(const AudioAsset& audio, const Language& language,
                                         TrainingTask kind, LlmGateway& llm,
                                         const InstructionPool& ss_pool = InstructionPools{}.ss,
                                         std::uint64_t seed = 0, DurationBounds bounds = {},
                                         const std::string& source = "longform",
                                         const CurationPrompts& prompts = {}) {
  if (kind != TrainingTask::ss && kind != TrainingTask::aqa)
    throw PreconditionError("build_generated_item: kind must be ss or aqa");
  if (audio.duration_s < bounds.min_s || audio.duration_s > bounds.max_s)
    throw PreconditionError("build_generated_item: duration " + std::to_string(audio.duration_s) +
                            " s outside configured bounds");
  const std::string key = to_string(kind) + "|" + source + "|" + audio.sha256 + "|" + language.code();
  Conversation c;
  c.id = conversation_id(kind, key);
  c.task = kind;
  c.language = language;
  c.source = source;
  if (kind == TrainingTask::ss) {
    LlmRequest req{"summarize", render_prompt(prompts.summarize, "", language), "", audio, language};
    std::string summary = trim(llm.complete_with_retry(req).value);
    if (summary.empty()) throw MalformedGeneration("summary is blank");
    c.turns = {Turn{Role::user, {TextPart{ss_pool.pick(seed, key, language)}, audio}},
               Turn{Role::assistant, {TextPart{summary}}}};
  } else {
    LlmRequest req{"aqa", render_prompt(prompts.aqa, "", language), "", audio, language};
    auto [question, answer] = parse_question_answer(llm.complete_with_retry(req).value);
    c.turns = {Turn{Role::user, {audio, TextPart{question}}},
               Turn{Role::assistant, {TextPart{answer}}}};
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Distribution report

struct CorpusStats {
  std::size_t total = 0;
  std::size_t multi_turn = 0;
  std::map<std::string, std::size_t> by_task;
  std::map<std::string, std::size_t> by_language;

  void add(const Conversation& c) {
    ++total;
    ++by_task[to_string(c.task)];
    ++by_language[c.language.code()];
    if (c.multi_turn()) ++multi_turn;
  }

  double fraction(std::size_t n) const {
    return total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total);
  }

  json to_json() const {
    auto table = [&](const std::map<std::string, std::size_t>& m) {
      json out = json::object();
      for (const auto& [k, n] : m) out[k] = json{{"count", n}, {"fraction", fraction(n)}};
      return out;
    };
    return json{{"total", total},
                {"by_task", table(by_task)},
                {"by_language", table(by_language)},
                {"multi_turn", json{{"count", multi_turn}, {"fraction", fraction(multi_turn)}}}};
  }
};

template <class Range>
CorpusStats corpus_stats(const Range& conversations) {
  CorpusStats s;
  for (const Conversation& c : conversations) s.add(c);
  return s;
}

}  // namespace audiojudge
