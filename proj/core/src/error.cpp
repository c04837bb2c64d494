#include "pcqa/error.hpp"

namespace pcqa {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::IoError: return "IoError";
    case Errc::MissingColorProperty: return "MissingColorProperty";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::TruncatedBody: return "TruncatedBody";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::EmptyResult: return "EmptyResult";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::InvalidAxis: return "InvalidAxis";
    case Errc::NotScalar: return "NotScalar";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::TooFewContents: return "TooFewContents";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace pcqa
