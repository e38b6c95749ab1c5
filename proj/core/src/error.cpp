#include "revdec/error.hpp"

namespace revdec {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kClassMissing: return "ClassMissing";
    case ErrorCode::kStratificationImpossible: return "StratificationImpossible";
    case ErrorCode::kDegenerateResample: return "DegenerateResample";
    case ErrorCode::kEmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::kLexiconConflict: return "LexiconConflict";
    case ErrorCode::kEmptyFit: return "EmptyFit";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDivergence: return "DivergenceError";
    case ErrorCode::kShape: return "ShapeError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kVersion: return "VersionError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kProvider: return "ProviderError";
  }
  return "Unknown";
}

}  // namespace revdec
