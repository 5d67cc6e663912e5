#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volseg {

enum class Errc {
  // NIfTI parsing and writing
  BadMagic,
  UnsupportedTwoFile,
  UnsupportedDatatype,
  CorruptHeader,
  TruncatedData,
  NonIntegerLabel,
  NonFiniteValue,
  LossyDatatype,
  // volume and geometry
  InvalidRange,
  EmptyForeground,
  ShapeMismatch,
  BoxOutOfBounds,
  ModeMismatch,
  InvalidArgument,
  // sampling, metrics, training
  DegenerateWeights,
  InvalidLabel,
  EmptyReportList,
  NonFiniteLoss,
  BadCheckpoint,
  // pipeline
  EmptyCaseList,
  MissingCounterpart,
  SliceOutOfRange,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the toolkit carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }
  /// The message without the error-name prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace volseg
