#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hgr {

/// Failure categories raised by the library. Every throw site uses one of
/// these so callers (and tests) can branch on the category instead of text.
enum class ErrorCode {
  InvalidArgument,
  ParseError,
  MissingFile,
  RateMismatch,
  DuplicateChannel,
  NoEmgChannel,
  SignalTooShort,
  NyquistViolation,
  WindowTooLarge,
  NonIntegerRatio,
  UnalignedLabels,
  EmptySelection,
  EmptyCalibration,
  WrongAxisCount,
  ZeroRestingPower,
  ZeroMotionBandPower,
  SingularCovariance,
  ClassTooSmall,
  SchemaMismatch,
  NonConvergence,
  MissingRepetition,
  CoincidentCentroids,
  TooFewSamples,
  ZeroVariance,
  AllZeroDifferences,
  LengthMismatch,
  ZeroPooledStd,
  ParticipantMismatch,
  CacheVersionMismatch,
  MissingResults,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::RateMismatch: return "RateMismatch";
    case ErrorCode::DuplicateChannel: return "DuplicateChannel";
    case ErrorCode::NoEmgChannel: return "NoEmgChannel";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::NyquistViolation: return "NyquistViolation";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::NonIntegerRatio: return "NonIntegerRatio";
    case ErrorCode::UnalignedLabels: return "UnalignedLabels";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyCalibration: return "EmptyCalibration";
    case ErrorCode::WrongAxisCount: return "WrongAxisCount";
    case ErrorCode::ZeroRestingPower: return "ZeroRestingPower";
    case ErrorCode::ZeroMotionBandPower: return "ZeroMotionBandPower";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::MissingRepetition: return "MissingRepetition";
    case ErrorCode::CoincidentCentroids: return "CoincidentCentroids";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroPooledStd: return "ZeroPooledStd";
    case ErrorCode::ParticipantMismatch: return "ParticipantMismatch";
    case ErrorCode::CacheVersionMismatch: return "CacheVersionMismatch";
    case ErrorCode::MissingResults: return "MissingResults";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hgr
