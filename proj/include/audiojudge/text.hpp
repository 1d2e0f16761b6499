#pragma once

// Transcript text handling for the curation pipeline: tag-based transcript
// normalization and the canonical form behind the consistency filter.
// Unicode properties (normalization, case mapping, general categories) come
// from ICU.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <map>
#include <regex>
#include <string>
#include <string_view>

#include "audiojudge/error.hpp"
#include "audiojudge/schema.hpp"

namespace audiojudge {

namespace detail {

inline icu::UnicodeString to_icu(std::string_view utf8) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
}

inline std::string from_icu(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

inline icu::UnicodeString nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString out = norm->normalize(s, status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalization failed");
  return out;
}

inline bool is_punct_or_symbol(UChar32 c) {
  return (U_GET_GC_MASK(c) & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

inline bool is_single_punctuation(std::string_view utf8) {
  icu::UnicodeString s = to_icu(utf8);
  return s.countChar32() == 1 && (U_GET_GC_MASK(s.char32At(0)) & U_GC_P_MASK) != 0;
}

}  // namespace detail

/// Maps transcript tag tokens such as "<PERIOD>" to the punctuation they
/// stand for. An empty value drops the tag (noise/silence markers).
class TagMap {
 public:
  TagMap() = default;

  TagMap(std::initializer_list<std::pair<const std::string, std::string>> entries) {
    for (const auto& [k, v] : entries) add(k, v);
  }

  void add(const std::string& token, const std::string& value) {
    static const std::regex kToken("<[A-Z][A-Z0-9_]*>");
    if (!std::regex_match(token, kToken))
      throw PreconditionError("tag '" + token + "' is not an uppercase angle-bracket token");
    if (!value.empty() && !detail::is_single_punctuation(value))
      throw PreconditionError("tag '" + token + "' must map to one punctuation mark or nothing");
    map_[token] = value;
  }

  const std::string* find(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::string>& entries() const { return map_; }

  /// Punctuation and garbage tags used by GigaSpeech-style transcripts.
  static TagMap gigaspeech() {
    return TagMap{{"<COMMA>", ","},         {"<PERIOD>", "."},   {"<QUESTIONMARK>", "?"},
                  {"<EXCLAMATIONPOINT>", "!"}, {"<SIL>", ""},   {"<MUSIC>", ""},
                  {"<NOISE>", ""},          {"<OTHER>", ""}};
  }

  static TagMap from_json(const json& j) {
    if (!j.is_object()) throw ParseError("tag map must be a JSON object");
    TagMap m;
    for (auto& [k, v] : j.items()) {
      if (!v.is_string()) throw ParseError("tag map value for " + k + " must be a string");
      m.add(k, v.get<std::string>());
    }
    return m;
  }

 private:
  std::map<std::string, std::string> map_;
};

/// Turns an upper-case, tag-punctuated transcript into reader-friendly text:
/// tags become punctuation attached to the preceding word, text is lowercased
/// and re-capitalized at sentence starts, whitespace is collapsed.
inline std::string normalize_transcript(std::string_view raw, const TagMap& tags) {
  if (raw.empty()) throw PreconditionError("normalize_transcript: empty transcript");

  static const std::regex kTag("<[^<>\\s]*>");
  std::string text(raw);
  std::string substituted;
  auto begin = std::sregex_iterator(text.begin(), text.end(), kTag);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const std::string token = it->str();
    const std::string* value = tags.find(token);
    if (!value) throw UnknownTag("unknown transcript tag " + token);
    substituted.append(text, last, static_cast<std::size_t>(it->position()) - last);
    while (!substituted.empty() &&
           (substituted.back() == ' ' || substituted.back() == '\t' || substituted.back() == '\n'))
      substituted.pop_back();
    substituted += *value;
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  substituted.append(text, last);

  icu::UnicodeString lower = detail::to_icu(substituted);
  lower.toLower(icu::Locale::getRoot());

  icu::UnicodeString out;
  bool pending_space = false;
  bool at_sentence_start = true;
  bool after_terminator = false;
  for (int32_t i = 0; i < lower.length(); i = lower.moveIndex32(i, 1)) {
    UChar32 c = lower.char32At(i);
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
      if (after_terminator) at_sentence_start = true;
      after_terminator = false;
      continue;
    }
    if (pending_space) out.append(static_cast<UChar>(' '));
    pending_space = false;
    if (c == '.' || c == '?' || c == '!') {
      after_terminator = true;
      out.append(c);
      continue;
    }
    after_terminator = false;
    if (at_sentence_start) {
      if (u_isUAlphabetic(c)) c = u_totitle(c);
      if (u_isalnum(c) || u_isUAlphabetic(c)) at_sentence_start = false;
    }
    out.append(c);
  }
  return detail::from_icu(out);
}

/// Comparison form used by the consistency filter: NFC, lowercase, all
/// punctuation and symbol characters removed; Thai drops all whitespace,
/// other languages collapse it to single spaces.
inline std::string canonical_form(std::string_view text, const Language& language) {
  icu::UnicodeString s = detail::nfc(detail::to_icu(text));
  s.toLower(icu::Locale::getRoot());
  const bool drop_spaces = language.code() == "th";

  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
    UChar32 c = s.char32At(i);
    if (detail::is_punct_or_symbol(c)) continue;
    if (u_isUWhiteSpace(c)) {
      pending_space = !drop_spaces && !out.isEmpty();
      continue;
    }
    if (pending_space) out.append(static_cast<UChar>(' '));
    pending_space = false;
    out.append(c);
  }
  // Removing characters can bring a base and a combining mark together.
  return detail::from_icu(detail::nfc(out));
}

enum class FilterDecision { keep, discard };

inline const char* to_string(FilterDecision d) {
  return d == FilterDecision::keep ? "keep" : "discard";
}

/// Keeps an LLM-restored transcript only if it differs from the original in
/// punctuation, case or spacing alone.
inline FilterDecision consistency_filter(std::string_view original, std::string_view restored,
                                         const Language& language) {
  if (original.empty() || restored.empty())
    throw PreconditionError("consistency_filter: both transcripts must be non-empty");
  return canonical_form(original, language) == canonical_form(restored, language)
             ? FilterDecision::keep
             : FilterDecision::discard;
}

}  // namespace audiojudge
