#include "spinecurate/error.hpp"

namespace spinecurate {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::missing_key: return "MissingKey";
    case Errc::unsupported_value: return "UnsupportedValue";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::truncated_payload: return "TruncatedPayload";
    case Errc::excess_payload: return "ExcessPayload";
    case Errc::unknown_level: return "UnknownLevel";
    case Errc::uncovered_intensity: return "UncoveredIntensity";
    case Errc::not_canonical: return "NotCanonical";
    case Errc::empty_mask: return "EmptyMask";
    case Errc::zero_weight: return "ZeroWeight";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::empty_surface: return "EmptySurface";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::perturbation_out_of_range: return "PerturbationOutOfRange";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::out_of_order: return "OutOfOrder";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

}  // namespace spinecurate
