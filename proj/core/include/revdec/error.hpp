#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace revdec {

enum class ErrorCode {
  kNotFound,
  kEmptyCorpus,
  kParse,
  kDuplicateId,
  kClassMissing,
  kStratificationImpossible,
  kDegenerateResample,
  kEmptyVocabulary,
  kLexiconConflict,
  kEmptyFit,
  kDimensionMismatch,
  kDivergence,
  kShape,
  kSchema,
  kUnsupported,
  kVersion,
  kFormat,
  kInvalidArgument,
  kUnknownModel,
  kProvider,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace revdec
