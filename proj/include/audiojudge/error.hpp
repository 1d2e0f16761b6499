#pragma once

#include <stdexcept>
#include <string>

namespace audiojudge {

/// Base of every error raised by the toolkit. Subclasses name the failure
/// kind so callers (and the CLI's machine-readable error report) can branch
/// on it without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

#define AUDIOJUDGE_ERROR(Name, Base)                          \
  class Name : public Base {                                  \
   public:                                                    \
    explicit Name(const std::string& what) : Base(what) {}    \
    const char* kind() const noexcept override { return #Name; } \
  };

AUDIOJUDGE_ERROR(ParseError, Error)
AUDIOJUDGE_ERROR(InvariantViolation, Error)
AUDIOJUDGE_ERROR(PreconditionError, Error)
AUDIOJUDGE_ERROR(IoError, Error)

// curation
AUDIOJUDGE_ERROR(UnknownTag, Error)
AUDIOJUDGE_ERROR(GatewayError, Error)
AUDIOJUDGE_ERROR(EmptyTranslation, Error)
AUDIOJUDGE_ERROR(NoVoiceForLanguage, Error)
AUDIOJUDGE_ERROR(MalformedGeneration, Error)

// registry
AUDIOJUDGE_ERROR(RubricMissing, Error)
AUDIOJUDGE_ERROR(ProfileError, Error)

// eval
AUDIOJUDGE_ERROR(TemplateError, Error)
AUDIOJUDGE_ERROR(SlotMissing, TemplateError)
AUDIOJUDGE_ERROR(ScoreParseError, Error)
AUDIOJUDGE_ERROR(JudgeFailed, Error)
AUDIOJUDGE_ERROR(RunAborted, Error)
AUDIOJUDGE_ERROR(ValidationFailed, Error)

// analytics
AUDIOJUDGE_ERROR(EmptySelection, Error)
AUDIOJUDGE_ERROR(KeyMismatch, Error)
AUDIOJUDGE_ERROR(DegenerateInput, Error)

// annotation
AUDIOJUDGE_ERROR(EmptyRun, Error)
AUDIOJUDGE_ERROR(UnknownSession, Error)
AUDIOJUDGE_ERROR(InvalidKey, Error)
AUDIOJUDGE_ERROR(ScoreOutOfRange, Error)

#undef AUDIOJUDGE_ERROR

}  // namespace audiojudge
