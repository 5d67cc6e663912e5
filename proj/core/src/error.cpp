#include "volseg/error.hpp"

namespace volseg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedTwoFile: return "UnsupportedTwoFile";
    case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
    case Errc::CorruptHeader: return "CorruptHeader";
    case Errc::TruncatedData: return "TruncatedData";
    case Errc::NonIntegerLabel: return "NonIntegerLabel";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::LossyDatatype: return "LossyDatatype";
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::EmptyForeground: return "EmptyForeground";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BoxOutOfBounds: return "BoxOutOfBounds";
    case Errc::ModeMismatch: return "ModeMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DegenerateWeights: return "DegenerateWeights";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::EmptyReportList: return "EmptyReportList";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::EmptyCaseList: return "EmptyCaseList";
    case Errc::MissingCounterpart: return "MissingCounterpart";
    case Errc::SliceOutOfRange: return "SliceOutOfRange";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace volseg
