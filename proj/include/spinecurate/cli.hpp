#pragma once

#include <functional>
#include <optional>
#include <string>

#include "spinecurate/config.hpp"

namespace spinecurate {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitTolerance = 3;

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Environment variable for a config key: "filter.threshold" ->
/// SPINECURATE_FILTER_THRESHOLD.
std::string env_var_name(const std::string& key);

/// Configuration layers merged with flag > environment > config file > default.
KeyValues merge_layers(const KeyValues& file, const KeyValues& env, const KeyValues& flags);

/// Entry point of the spinecurate executable. `env` defaults to getenv.
int run_cli(int argc, const char* const* argv, EnvLookup env = {});

}  // namespace spinecurate
