#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgdn {

enum class Errc {
  // records
  MalformedHeader,
  RaggedRows,
  NonFiniteSample,
  UnsortedAnnotations,
  UnknownLabel,
  OutOfRange,
  // preprocess
  EmptyInput,
  ZeroVariance,
  LengthMismatch,
  // windowing
  NoInputChannels,
  NoEligibleSegments,
  SpanTooShort,
  CoverageGap,
  // neuralnet
  DimensionMismatch,
  NonFiniteUpdate,
  NonFiniteLoss,
  VersionMismatch,
  CorruptFile,
  // noisegen
  TooFewBeats,
  TooShort,
  NonPositivePower,
  RateMismatch,
  // evalharness
  EmptyMask,
  ZeroDenominator,
  // pipeline
  InsufficientTrainingData,
  ModelRecordMismatch,
  InvalidConfig,
  Io,
};

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Usage = 1, Data = 2, Numeric = 3 };

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::RaggedRows: return "RaggedRows";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::UnsortedAnnotations: return "UnsortedAnnotations";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoInputChannels: return "NoInputChannels";
    case Errc::NoEligibleSegments: return "NoEligibleSegments";
    case Errc::SpanTooShort: return "SpanTooShort";
    case Errc::CoverageGap: return "CoverageGap";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFiniteUpdate: return "NonFiniteUpdate";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::TooFewBeats: return "TooFewBeats";
    case Errc::TooShort: return "TooShort";
    case Errc::NonPositivePower: return "NonPositivePower";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::ZeroDenominator: return "ZeroDenominator";
    case Errc::InsufficientTrainingData: return "InsufficientTrainingData";
    case Errc::ModelRecordMismatch: return "ModelRecordMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

constexpr ErrorCategory category(Errc e) {
  switch (e) {
    case Errc::InvalidConfig:
    case Errc::NoInputChannels:
      return ErrorCategory::Usage;
    case Errc::NonFiniteUpdate:
    case Errc::NonFiniteLoss:
    case Errc::ZeroVariance:
    case Errc::NonPositivePower:
    case Errc::ZeroDenominator:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace ecgdn
