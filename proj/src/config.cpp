#include "spinecurate/config.hpp"

#include <charconv>
#include <fstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  try {
    for (const auto& item : CLI::ConfigINI().from_config(in)) {
      // Section open/close markers carry no value.
      if (item.name == "++" || item.name == "--") continue;
      kv[item.fullname()] = item.inputs;
    }
  } catch (const CLI::Error& ex) {
    throw Error(Errc::malformed_line, ex.what());
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, fmt::format("cannot open config {}", path.string()));
  return parse_key_values(in);
}

namespace {

IntensityRange range_from(const std::string& key, const std::vector<std::string>& v) {
  if (v.size() != 2) throw Error(Errc::invalid_argument, fmt::format("{} needs two integers", key));
  IntensityRange r;
  for (int i = 0; i < 2; ++i) {
    int value = 0;
    const auto& s = v[static_cast<std::size_t>(i)];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw Error(Errc::invalid_argument, fmt::format("{}: '{}' is not an integer", key, s));
    }
    (i == 0 ? r.lo : r.hi) = value;
  }
  return r;
}

}  // namespace

PaletteRules palette_from(const KeyValues& kv, PaletteRules base) {
  if (auto it = kv.find("palette.dark"); it != kv.end()) base.dark = range_from(it->first, it->second);
  if (auto it = kv.find("palette.mid"); it != kv.end()) base.mid = range_from(it->first, it->second);
  if (auto it = kv.find("palette.light"); it != kv.end()) base.light = range_from(it->first, it->second);
  if (auto it = kv.find("palette.green_is_ivd"); it != kv.end()) {
    const auto& v = it->second;
    if (v.size() != 1 || (v[0] != "true" && v[0] != "false")) {
      throw Error(Errc::invalid_argument, "palette.green_is_ivd must be true or false");
    }
    base.classes.green_is_ivd = v[0] == "true";
  }
  base.validate();
  return base;
}

Connectivity connectivity_from_string(std::string_view s) {
  if (s == "four" || s == "4") return Connectivity::four;
  if (s == "eight" || s == "8") return Connectivity::eight;
  throw Error(Errc::unsupported_value, fmt::format("connectivity '{}'", s));
}

std::string_view to_string(Connectivity c) noexcept { return c == Connectivity::four ? "four" : "eight"; }

}  // namespace spinecurate
