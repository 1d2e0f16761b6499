#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "audiojudge/curation.hpp"
#include "audiojudge/gateway.hpp"
#include "audiojudge/jsonl.hpp"
#include "audiojudge/registry.hpp"
#include "audiojudge/schema.hpp"
#include "audiojudge/text.hpp"
#include "httplib.h"
#include "support.hpp"

using namespace audiojudge;
using testing_support::TempDir;

// ---------------------------------------------------------------------------
// Schema

TEST(Language, AcceptsRegisteredCodesOnly) {
  EXPECT_EQ(lang("th").code(), "th");
  EXPECT_EQ(lang("vi").display_name(), "Vietnamese");
  EXPECT_THROW(lang("EN"), InvariantViolation);
  EXPECT_THROW(lang("eng"), InvariantViolation);
  EXPECT_THROW(lang("fr"), InvariantViolation);
  Language::register_code("ms");
  EXPECT_EQ(lang("ms").display_name(), "ms");
  EXPECT_THROW(Language::register_code("M"), PreconditionError);
}

TEST(Tasks, BenchmarkAndTrainingTokensDoNotCollide) {
  for (auto t : kAllBenchmarkTasks) {
    EXPECT_EQ(parse_benchmark_task(to_string(t)), t);
    EXPECT_FALSE(find_training_task(to_string(t)).has_value());
  }
  for (auto t : kAllTrainingTasks) {
    EXPECT_EQ(parse_training_task(to_string(t)), t);
    EXPECT_FALSE(find_benchmark_task(to_string(t)).has_value());
  }
  EXPECT_TRUE(std::holds_alternative<BenchmarkTask>(resolve_task("ASR")));
  EXPECT_TRUE(std::holds_alternative<TrainingTask>(resolve_task("asr")));
  EXPECT_THROW(parse_benchmark_task("Asr"), InvariantViolation);
}

TEST(Timestamp, RoundTripsIsoMilliseconds) {
  Timestamp t = Timestamp::parse("2024-02-29T23:59:58.123Z");
  EXPECT_EQ(t.to_string(), "2024-02-29T23:59:58.123Z");
  EXPECT_EQ(Timestamp(0).to_string(), "1970-01-01T00:00:00.000Z");
  EXPECT_THROW(Timestamp::parse("2023-02-29T00:00:00.000Z"), InvariantViolation);
  EXPECT_THROW(Timestamp::parse("2024-01-01 00:00:00.000Z"), InvariantViolation);
  EXPECT_THROW(Timestamp::parse("2024-01-01T00:00:00Z"), InvariantViolation);
}

TEST(Fingerprint, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::istringstream in(std::string(100000, 'a'));
  EXPECT_EQ(audio_fingerprint(in), sha256_hex(std::string(100000, 'a')));
}

namespace {

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> kPieces = {"a", "Z", " ", "\"", "\\", "\n", "é", "ก", "中",
                                                   "{", "}", "\t", "😀", "ộ", "0"};
  std::string s;
  int n = 1 + static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) s += kPieces[rng() % kPieces.size()];
  return s;
}

AudioAsset random_asset(std::mt19937_64& rng) {
  const char* fmts[] = {"wav", "flac", "mp3"};
  return {"media/" + std::to_string(rng() % 1000) + ".wav", fmts[rng() % 3],
          8000 * static_cast<int>(1 + rng() % 6), static_cast<double>(1 + rng() % 6000) / 7.0,
          sha256_hex(std::to_string(rng()))};
}

}  // namespace

TEST(Schema, RecordsRoundTripUnderFuzz) {
  std::mt19937_64 rng(11);
  const char* codes[] = {"en", "id", "th", "vi", "zh"};
  for (int round = 0; round < 300; ++round) {
    BenchmarkItem item;
    item.id = "item-" + std::to_string(round);
    item.language = lang(codes[rng() % 5]);
    item.task = kAllBenchmarkTasks[rng() % kAllBenchmarkTasks.size()];
    item.audio = random_asset(rng);
    if (!is_audio_only(item.task)) item.text_instruction = random_text(rng);
    item.reference = random_text(rng) + "x";
    if (rng() % 2) item.meta = json{{"k", random_text(rng)}};
    const std::string line = serialize_record(item);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(parse_record<BenchmarkItem>(line), item);
    EXPECT_EQ(serialize_record(parse_record<BenchmarkItem>(line)), line);

    Conversation c;
    c.id = "conv-" + std::to_string(round);
    c.task = kAllTrainingTasks[rng() % kAllTrainingTasks.size()];
    c.language = item.language;
    c.source = random_text(rng);
    int exchanges = 1 + static_cast<int>(rng() % 3);
    for (int e = 0; e < exchanges; ++e) {
      c.turns.push_back(Turn{Role::user, {TextPart{random_text(rng)}, random_asset(rng)}});
      c.turns.push_back(Turn{Role::assistant, {TextPart{random_text(rng)}}});
    }
    EXPECT_EQ(parse_record<Conversation>(serialize_record(c)), c);

    ModelResponse r{item.id, "m" + std::to_string(rng() % 3), random_text(rng),
                    sha256_hex(random_text(rng)), static_cast<std::int64_t>(rng() % 5000),
                    Timestamp(static_cast<std::int64_t>(rng() % 2000000000000ULL))};
    EXPECT_EQ(parse_record<ModelResponse>(serialize_record(r)), r);

    JudgeVerdict v{item.id, r.model_id, "judge", 1 + static_cast<int>(rng() % 5), random_text(rng),
                   1 + static_cast<int>(rng() % 3)};
    EXPECT_EQ(parse_record<JudgeVerdict>(serialize_record(v)), v);

    HumanRating h{item.id, r.model_id, "ann", 1 + static_cast<int>(rng() % 5),
                  1 + static_cast<int>(rng() % 5), "s-1", Timestamp(1700000000000)};
    EXPECT_EQ(parse_record<HumanRating>(serialize_record(h)), h);
  }
}

TEST(Schema, RejectsMalformedAndUnknownFields) {
  EXPECT_THROW(parse_record<BenchmarkItem>("{not json"), ParseError);
  EXPECT_THROW(parse_record<BenchmarkItem>("[1,2]"), ParseError);
  auto base = encode(testing_support::item("x", "en", BenchmarkTask::SQA));
  {
    auto j = base;
    j.erase("reference");
    EXPECT_THROW(parse_record<BenchmarkItem>(j.dump()), InvariantViolation);
  }
  {
    auto j = base;
    j.erase("text_instruction");
    EXPECT_THROW(parse_record<BenchmarkItem>(j.dump()), InvariantViolation);
  }
  {
    auto j = base;
    j["audio"]["extra"] = 1;
    EXPECT_THROW(parse_record<BenchmarkItem>(j.dump()), InvariantViolation);
  }
  {
    auto j = base;
    j["audio"]["sha256"] = "ABC";
    EXPECT_THROW(parse_record<BenchmarkItem>(j.dump()), InvariantViolation);
  }
  {
    auto j = base;
    j["language"] = "xx";
    EXPECT_THROW(parse_record<BenchmarkItem>(j.dump()), InvariantViolation);
  }
  // Unknown top-level item fields are kept in meta.
  {
    auto j = base;
    j["speaker"] = "f1";
    EXPECT_EQ(parse_record<BenchmarkItem>(j.dump()).meta.at("speaker"), "f1");
  }
  // Audio-only tasks must not carry an instruction.
  auto life = encode(testing_support::item("y", "en", BenchmarkTask::LIFE));
  life["text_instruction"] = "hi";
  EXPECT_THROW(parse_record<BenchmarkItem>(life.dump()), InvariantViolation);

  JudgeVerdict v{"i", "m", "j", 6, "Score: 6", 1};
  EXPECT_THROW(serialize_record(v), InvariantViolation);
  HumanRating h{"i", "m", "a", 0, 3, "s", Timestamp(0)};
  EXPECT_THROW(serialize_record(h), InvariantViolation);
}

TEST(Schema, ConversationsAlternateStartingWithUser) {
  Conversation c;
  c.id = "c";
  c.source = "s";
  c.turns = {Turn{Role::assistant, {TextPart{"hi"}}}, Turn{Role::user, {TextPart{"x"}}}};
  EXPECT_THROW(serialize_record(c), InvariantViolation);
  c.turns = {Turn{Role::user, {TextPart{"x"}}}};
  EXPECT_THROW(serialize_record(c), InvariantViolation);
}

TEST(Jsonl, PublishOnceKeepsFirstWriter) {
  TempDir dir;
  auto path = dir / "x.json";
  EXPECT_TRUE(publish_once(path, "first"));
  EXPECT_FALSE(publish_once(path, "second"));
  EXPECT_EQ(read_text_file(path), "first");
}

TEST(Jsonl, ReadRecordsReportsLine) {
  TempDir dir;
  auto path = dir / "r.jsonl";
  atomic_write_text(path, serialize_record(JudgeVerdict{"i", "m", "j", 3, "Score: 3", 1}) + "\n{bad\n");
  try {
    read_records<JudgeVerdict>(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Text normalization and filter

TEST(Normalize, TagTranscripts) {
  const auto tags = TagMap::gigaspeech();
  EXPECT_EQ(normalize_transcript("AND LOOK AT THE PERCENTAGE OF REPORTS <PERIOD>", tags),
            "And look at the percentage of reports.");
  EXPECT_EQ(normalize_transcript("HELLO <COMMA> WORLD <QUESTIONMARK>", tags), "Hello, world?");
  EXPECT_EQ(normalize_transcript("<NOISE> WELL <COMMA> THAT IS ALL <PERIOD> SEE YOU <EXCLAMATIONPOINT>", tags),
            "Well, that is all. See you!");
  EXPECT_EQ(normalize_transcript("  MANY    SPACES  ", tags), "Many spaces");
  EXPECT_THROW(normalize_transcript("HELLO <UNKNOWN>", tags), UnknownTag);
  EXPECT_THROW(normalize_transcript("", tags), PreconditionError);
}

TEST(CanonicalForm, ExamplesAndIdempotence) {
  EXPECT_EQ(canonical_form("สวัสดี ครับ!", lang("th")), "สวัสดีครับ");
  EXPECT_EQ(canonical_form("Hello,   World!", lang("en")), "hello world");
  EXPECT_EQ(canonical_form("Cafe\xCC\x81", lang("en")), canonical_form("Caf\xC3\xA9", lang("en")));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    std::string s = random_text(rng) + " " + random_text(rng);
    for (const char* code : {"en", "th", "vi"}) {
      auto once = canonical_form(s, lang(code));
      EXPECT_EQ(canonical_form(once, lang(code)), once);
    }
  }
}

TEST(ConsistencyFilter, KeepsPunctuationOnlyChanges) {
  EXPECT_EQ(consistency_filter("hello world", "Hello, world.", lang("en")), FilterDecision::keep);
  EXPECT_EQ(consistency_filter("hello world", "Hello, word.", lang("en")), FilterDecision::discard);
  EXPECT_EQ(consistency_filter("hello world", "helloworld", lang("en")), FilterDecision::discard);
  EXPECT_EQ(consistency_filter("สวัสดีครับ", "สวัสดี ครับ", lang("th")), FilterDecision::keep);
  EXPECT_THROW(consistency_filter("", "x", lang("en")), PreconditionError);
}

// ---------------------------------------------------------------------------
// Gateways

namespace {

LlmRequest req(const std::string& purpose = "x") { return {purpose, "prompt", "payload", std::nullopt, lang("en")}; }

}  // namespace

TEST(Retry, CountsTotalAttempts) {
  ScriptedLlm llm({std::nullopt, std::nullopt, "ok"});
  auto r = llm.complete_with_retry(req());
  EXPECT_EQ(r.value, "ok");
  EXPECT_EQ(r.attempts, 3);
  EXPECT_EQ(llm.calls(), 3u);

  ScriptedLlm failing({std::nullopt, std::nullopt, std::nullopt, "late"});
  EXPECT_THROW(failing.complete_with_retry(req()), GatewayError);
  EXPECT_EQ(failing.calls(), 3u);

  GatewayOptions one;
  one.retry.max_attempts = 1;
  ScriptedLlm single({std::nullopt, "ok"}, nullptr, one);
  EXPECT_THROW(single.complete_with_retry(req()), GatewayError);
  EXPECT_EQ(single.calls(), 1u);
}

TEST(Gateway, InFlightLimitIsRespected) {
  GatewayOptions o;
  o.max_in_flight = 2;
  std::atomic<int> active{0}, peak{0};
  ScriptedLlm llm({},
                  [&](const LlmRequest&) {
                    int now = ++active;
                    int p = peak.load();
                    while (now > p && !peak.compare_exchange_weak(p, now)) {
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(5));
                    --active;
                    return std::string("ok");
                  },
                  o);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { llm.complete(req()); });
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(llm.calls(), 8u);
}

TEST(Gateway, HttpLlmTalksToLocalServer) {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/complete", [&](const httplib::Request& rq, httplib::Response& rs) {
    auto body = json::parse(rq.body);
    if (++hits == 1) {
      rs.status = 503;
      return;
    }
    rs.set_content(json{{"text", "echo:" + body["payload"].get<std::string>() + ":" +
                                     body["purpose"].get<std::string>()}}.dump(),
                   "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  auto llm = make_llm_gateway(json{{"endpoint", "http://127.0.0.1:" + std::to_string(port) + "/v1/complete"},
                                   {"model", "m"}, {"timeout_s", 5}});
  auto r = llm->complete_with_retry(req("translate"));
  EXPECT_EQ(r.value, "echo:payload:translate");
  EXPECT_EQ(r.attempts, 2);
  server.stop();
  th.join();
  // Server gone: transport failure after the whole budget.
  EXPECT_THROW(llm->complete_with_retry(req()), GatewayError);
}

TEST(Gateway, FactoryRejectsUnknownEndpoints) {
  EXPECT_THROW(make_llm_gateway(json{{"endpoint", "ftp://x"}}), PreconditionError);
  EXPECT_THROW(make_llm_gateway(json{{"endpoint", "mock:"}, {"retry_budget", 0}}), PreconditionError);
  EXPECT_NE(dynamic_cast<MockLlm*>(make_llm_gateway(json{{"endpoint", "mock:"}}).get()), nullptr);
}

// ---------------------------------------------------------------------------
// Curation

namespace {

AsrUnit unit(const std::string& transcript, const std::string& code = "en") {
  return {testing_support::asset(transcript), transcript, lang(code), "corpus"};
}

}  // namespace

TEST(Curation, AsrTagModeBuildsNormalizedTarget) {
  InstructionPools pools;
  auto c = build_asr(unit("AND LOOK AT THE PERCENTAGE OF REPORTS <PERIOD>"), AsrMode::tags,
                     TagMap::gigaspeech(), nullptr, pools.asr, 1);
  ASSERT_TRUE(c);
  ASSERT_EQ(c->turns.size(), 2u);
  EXPECT_EQ(std::get<TextPart>(c->turns[1].parts[0]).text, "And look at the percentage of reports.");
  EXPECT_TRUE(std::holds_alternative<AudioAsset>(c->turns[0].parts[1]));
  // Noise-only transcript leaves nothing to learn from.
  EXPECT_FALSE(build_asr(unit("<NOISE>"), AsrMode::tags, TagMap::gigaspeech(), nullptr, pools.asr, 1));
  // Same inputs give the same conversation.
  auto again = build_asr(unit("AND LOOK AT THE PERCENTAGE OF REPORTS <PERIOD>"), AsrMode::tags,
                         TagMap::gigaspeech(), nullptr, pools.asr, 1);
  EXPECT_EQ(*c, *again);
}

TEST(Curation, AsrRestoreModeAppliesFilter) {
  InstructionPools pools;
  ScriptedLlm llm({"Hello, world.", "Hello, word."});
  auto kept = build_asr(unit("hello world"), AsrMode::restore, {}, &llm, pools.asr, 0);
  ASSERT_TRUE(kept);
  EXPECT_EQ(std::get<TextPart>(kept->turns[1].parts[0]).text, "Hello, world.");
  EXPECT_FALSE(build_asr(unit("hello world"), AsrMode::restore, {}, &llm, pools.asr, 0));
  EXPECT_EQ(llm.requests().at(0).purpose, "restore_punctuation");
  EXPECT_THROW(build_asr(unit("x"), AsrMode::restore, {}, nullptr, pools.asr, 0), PreconditionError);
}

TEST(Curation, S2ttUsesTargetLanguageAndRejectsBlank) {
  InstructionPools pools;
  ScriptedLlm llm({"  Xin chào  ", "   "});
  auto c = build_s2tt(unit("hello"), lang("vi"), llm, pools.s2tt, 3);
  EXPECT_EQ(c.language, lang("vi"));
  EXPECT_EQ(std::get<TextPart>(c.turns[1].parts[0]).text, "Xin chào");
  EXPECT_NE(std::get<TextPart>(c.turns[0].parts[0]).text.find("Vietnamese"), std::string::npos);
  EXPECT_THROW(build_s2tt(unit("hello"), lang("vi"), llm, pools.s2tt, 3), EmptyTranslation);
  EXPECT_THROW(build_s2tt(unit("hello"), lang("en"), llm, pools.s2tt, 3), PreconditionError);
}

TEST(Curation, CaptionTranslation) {
  MockLlm llm;
  auto c = build_caption_translation("A dog barks twice.", testing_support::asset("dog"), lang("th"), llm);
  EXPECT_EQ(c.task, TrainingTask::ac);
  EXPECT_EQ(std::get<TextPart>(c.turns[1].parts[0]).text, "[th] A dog barks twice.");
}

TEST(Curation, VoiceSelectorRoundRobinAndSeeded) {
  VoicePolicy p;
  p.pools["en"] = {"v1", "v2"};
  VoiceSelector rr(p);
  EXPECT_EQ(rr.next(lang("en")), "v1");
  EXPECT_EQ(rr.next(lang("en")), "v2");
  EXPECT_EQ(rr.next(lang("en")), "v1");
  EXPECT_THROW(rr.next(lang("th")), NoVoiceForLanguage);

  p.mode = VoiceSelection::seeded_random;
  p.seed = 9;
  VoiceSelector a(p), b(p);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(lang("en")), b.next(lang("en")));
  EXPECT_THROW(VoicePolicy::from_json(json{{"pools", {{"en", json::array()}}}}), InvariantViolation);
  EXPECT_THROW(VoicePolicy::from_json(json{{"mode", "shuffle"}}), ParseError);
}

TEST(Curation, SpokenQaAndVoiceChat) {
  TempDir media;
  MockTts tts(media.path());
  VoicePolicy p;
  p.pools["id"] = {"id-a", "id-b"};
  VoiceSelector voices(p);
  auto qa = build_spoken_qa("Apa ibu kota Indonesia?", "Jakarta.", lang("id"), TrainingTask::qa, tts,
                            voices, "qa-src");
  ASSERT_EQ(qa.turns.size(), 2u);
  const auto& audio = std::get<AudioAsset>(qa.turns[0].parts[0]);
  EXPECT_EQ(audio_fingerprint(media.path() / audio.uri), audio.sha256);
  EXPECT_THROW(build_spoken_qa("q", "a", lang("id"), TrainingTask::asr, tts, voices, "s"), PreconditionError);

  auto chat = build_voice_chat({{"Halo", "Hai!"}, {"Apa kabar?", "Baik."}}, lang("id"), tts, voices, "chat-src");
  EXPECT_EQ(chat.turns.size(), 4u);
  EXPECT_TRUE(chat.multi_turn());
  auto stats = corpus_stats(std::vector<Conversation>{qa, chat});
  EXPECT_EQ(stats.total, 2u);
  EXPECT_EQ(stats.multi_turn, 1u);
  EXPECT_DOUBLE_EQ(stats.to_json()["multi_turn"]["fraction"].get<double>(), 0.5);
}

TEST(Curation, GeneratedItems) {
  MockLlm llm;
  auto audio = testing_support::asset("long", 60.0);
  auto ss = build_generated_item(audio, lang("en"), TrainingTask::ss, llm);
  EXPECT_EQ(ss.task, TrainingTask::ss);
  auto aqa = build_generated_item(audio, lang("en"), TrainingTask::aqa, llm);
  EXPECT_NE(std::get<TextPart>(aqa.turns[0].parts[1]).text.find('?'), std::string::npos);
  EXPECT_THROW(build_generated_item(testing_support::asset("short", 2.0), lang("en"), TrainingTask::ss, llm),
               PreconditionError);
  ScriptedLlm bad({"no format here"});
  EXPECT_THROW(build_generated_item(audio, lang("en"), TrainingTask::aqa, bad), MalformedGeneration);
  EXPECT_EQ(parse_question_answer("Q: Why?\nA: Because.").second, "Because.");
}

// ---------------------------------------------------------------------------
// Registry

TEST(Registry, FourteenTaskSpecsCoverFifteenVariants) {
  std::set<BenchmarkTask> seen;
  for (const auto& s : task_registry())
    for (auto v : s.variants) EXPECT_TRUE(seen.insert(v).second);
  EXPECT_EQ(task_registry().size(), 14u);
  EXPECT_EQ(seen.size(), kAllBenchmarkTasks.size());
  EXPECT_TRUE(task_spec(BenchmarkTask::MATH).audio_only);
  EXPECT_TRUE(task_spec(BenchmarkTask::S2TT_XE).requires_text_instruction);
}

TEST(Registry, ProfilesRoundTripAndRejectBadInput) {
  auto p = CompositionProfile::standard();
  EXPECT_EQ(p.total(), 580u);
  EXPECT_EQ(CompositionProfile::from_json(p.to_json()).expected, p.expected);
  auto shipped = read_json_file(testing_support::source_dir() / "data/profile.standard.json");
  EXPECT_EQ(CompositionProfile::from_json(shipped).expected, p.expected);
  auto profile_error = [](const char* text) {
    try {
      CompositionProfile::from_json(json::parse(text));
    } catch (const ProfileError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(profile_error(R"({"languages": {"xx": {"ASR": 1}}})").find("xx"), std::string::npos);
  EXPECT_NE(profile_error(R"({"languages": {"en": {"FOO": 1}}})").find("FOO"), std::string::npos);
  EXPECT_NE(profile_error(R"({"languages": {"en": {"ASR": -1}}})").find("non-negative"), std::string::npos);
  EXPECT_NE(profile_error(R"({"languages": {"en": {"ASR": 1}}, "total": 2})").find("total"), std::string::npos);
  EXPECT_NO_THROW(CompositionProfile::from_json(json::parse(R"({"languages": {"en": {"ASR": 1}}, "total": 1})")));
}

TEST(Registry, ValidatorReportsEachDefect) {
  auto profile = CompositionProfile::from_json(json::parse(R"({"languages": {"en": {"ASR": 2, "LIFE": 1}}})"));
  auto make = [](std::vector<BenchmarkItem> items) { return Benchmark::from_items(std::move(items)); };
  std::vector<BenchmarkItem> good = {testing_support::item("a", "en", BenchmarkTask::ASR),
                                     testing_support::item("b", "en", BenchmarkTask::ASR),
                                     testing_support::item("c", "en", BenchmarkTask::LIFE)};
  EXPECT_TRUE(validate_benchmark(make(good), profile).ok());

  auto kinds = [&](std::vector<BenchmarkItem> items) {
    std::vector<std::string> k;
    for (const auto& v : validate_benchmark(make(std::move(items)), profile).violations) k.push_back(v.kind);
    return k;
  };
  auto dup = good;
  dup[1].id = "a";
  EXPECT_EQ(kinds(dup), std::vector<std::string>{"duplicate_id"});
  auto noref = good;
  noref[0].reference = " ";
  EXPECT_EQ(kinds(noref), std::vector<std::string>{"missing_reference"});
  auto instr = good;
  instr[2].text_instruction = "say";
  EXPECT_EQ(kinds(instr), std::vector<std::string>{"instruction_mismatch"});
  auto missing = good;
  missing.pop_back();
  EXPECT_EQ(kinds(missing), std::vector<std::string>{"count_mismatch"});
  auto forbidden = good;
  forbidden.push_back(testing_support::item("d", "en", BenchmarkTask::SER));
  EXPECT_EQ(kinds(forbidden), std::vector<std::string>{"forbidden_task"});
  auto foreign = good;
  foreign.push_back(testing_support::item("e", "zh", BenchmarkTask::ASR));
  EXPECT_EQ(kinds(foreign), std::vector<std::string>{"unknown_language"});

  // Order of items never changes the report.
  auto shuffled = forbidden;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(validate_benchmark(make(shuffled), profile).violations,
            validate_benchmark(make(forbidden), profile).violations);
  EXPECT_EQ(make(shuffled).sha256, make(forbidden).sha256);
}

TEST(Registry, SyntheticBenchmarkIsValidAndStable) {
  auto p = CompositionProfile::standard();
  auto b = make_synthetic_benchmark(p);
  EXPECT_EQ(b.items.size(), 580u);
  EXPECT_TRUE(validate_benchmark(b, p).ok());
  TempDir dir;
  write_benchmark(dir / "b.jsonl", b);
  EXPECT_EQ(load_benchmark(dir / "b.jsonl").sha256, b.sha256);
  auto shipped = load_benchmark(testing_support::source_dir() / "data/synthetic.items.jsonl");
  EXPECT_EQ(shipped.sha256, b.sha256);
}

TEST(Registry, RubricLookupPrefersLanguageSpecific) {
  RubricStore store;
  Rubric generic{BenchmarkTask::SQA, {"a", "b", "c", "d", "e"}, std::nullopt};
  Rubric thai{BenchmarkTask::SQA, {"ก", "ข", "ค", "ง", "จ"}, lang("th")};
  store.add(generic);
  store.add(thai);
  EXPECT_EQ(store.get(BenchmarkTask::SQA, lang("th")), thai);
  EXPECT_EQ(store.get(BenchmarkTask::SQA, lang("vi")), generic);
  EXPECT_THROW(store.get(BenchmarkTask::ASR, lang("vi")), RubricMissing);
  EXPECT_THROW(store.add(generic), ParseError);
  Rubric hole{BenchmarkTask::ASR, {"a", "", "c", "d", "e"}, std::nullopt};
  EXPECT_THROW(store.add(hole), InvariantViolation);

  auto shipped = RubricStore::load(testing_support::source_dir() / "data/rubrics.jsonl");
  for (auto t : kAllBenchmarkTasks) EXPECT_NO_THROW(shipped.get(t, lang("en")));
}
