#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spinecurate {

/// Error categories raised across the toolkit. Each operation documents which
/// of these it can produce.
enum class Errc {
  missing_key,
  unsupported_value,
  malformed_line,
  truncated_payload,
  excess_payload,
  unknown_level,
  uncovered_intensity,
  not_canonical,
  empty_mask,
  zero_weight,
  shape_mismatch,
  empty_surface,
  not_normalized,
  perturbation_out_of_range,
  invalid_argument,
  out_of_order,
  io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spinecurate
