#pragma once

// Plain INI-style key-value configuration:
//
//   [filter]
//   threshold = 0.55
//   imbalance_mode = dominant_fraction
//
// Keys are addressed as "section.key"; multi-valued keys are space separated.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "spinecurate/loss_math.hpp"
#include "spinecurate/mask_restore.hpp"

namespace spinecurate {

using KeyValues = std::map<std::string, std::vector<std::string>>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::filesystem::path& path);

/// Reads palette.dark / palette.mid / palette.light / palette.green_is_ivd.
PaletteRules palette_from(const KeyValues& kv, PaletteRules base = {});

Connectivity connectivity_from_string(std::string_view s);
std::string_view to_string(Connectivity c) noexcept;

}  // namespace spinecurate
