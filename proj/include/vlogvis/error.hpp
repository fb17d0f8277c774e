#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlogvis {

/// Every failure the library reports carries one of these codes.
enum class ErrorCode {
  // transcript_ingest
  MalformedTimestamp,
  EmptyTranscript,
  ZeroDuration,
  // action_extraction
  TagTokenMismatch,
  DanglingCueIndex,
  // clip_segmentation
  EmptyActionList,
  DimensionMismatch,
  ZeroVariance,
  TooFewFrames,
  // annotation_core
  InsufficientGroundTruth,
  IncompleteSubmission,
  WrongAnnotatorCount,
  RowSumMismatch,
  DegenerateAgreement,
  UnknownChannel,
  DuplicateRecord,
  UnknownHit,
  // feature_bank
  UnknownLabel,
  ZeroVector,
  BadMagic,
  TruncatedFile,
  DimMismatch,
  // classifiers
  EmptyValidation,
  // neural_fusion
  EmptySequence,
  EmptyDataset,
  MissingFeatureBank,
  ExtrasDimMismatch,
  // evaluation
  LengthMismatch,
  DegeneratePairs,
  // generic plumbing
  Parse,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::EmptyTranscript: return "EmptyTranscript";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::TagTokenMismatch: return "TagTokenMismatch";
    case ErrorCode::DanglingCueIndex: return "DanglingCueIndex";
    case ErrorCode::EmptyActionList: return "EmptyActionList";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::InsufficientGroundTruth: return "InsufficientGroundTruth";
    case ErrorCode::IncompleteSubmission: return "IncompleteSubmission";
    case ErrorCode::WrongAnnotatorCount: return "WrongAnnotatorCount";
    case ErrorCode::RowSumMismatch: return "RowSumMismatch";
    case ErrorCode::DegenerateAgreement: return "DegenerateAgreement";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::UnknownHit: return "UnknownHit";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MissingFeatureBank: return "MissingFeatureBank";
    case ErrorCode::ExtrasDimMismatch: return "ExtrasDimMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegeneratePairs: return "DegeneratePairs";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// True for codes that mean "the input file/stream was not in the expected
/// format" as opposed to a failure while computing on valid input.
inline bool is_format_error(ErrorCode code)
{
  switch (code) {
    case ErrorCode::MalformedTimestamp:
    case ErrorCode::EmptyTranscript:
    case ErrorCode::TagTokenMismatch:
    case ErrorCode::DanglingCueIndex:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
    case ErrorCode::DimMismatch:
    case ErrorCode::MissingFeatureBank:
    case ErrorCode::ExtrasDimMismatch:
    case ErrorCode::Parse:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace vlogvis
