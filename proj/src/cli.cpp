#include "spinecurate/cli.hpp"

#include <cctype>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

#include "spinecurate/error.hpp"
#include "spinecurate/pipeline.hpp"

namespace spinecurate {

std::string env_var_name(const std::string& key) {
  std::string out = "SPINECURATE_";
  for (char ch : key) {
    out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

KeyValues merge_layers(const KeyValues& file, const KeyValues& env, const KeyValues& flags) {
  KeyValues out = file;
  for (const auto& [k, v] : env) out[k] = v;
  for (const auto& [k, v] : flags) out[k] = v;
  return out;
}

namespace {

int exit_code_for(Errc code) { return code == Errc::io ? kExitIo : kExitValidation; }

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

constexpr Flag kFlags[] = {
    {"--input", "run.input", "Input directory (volumes for extract, predictions for evaluate)"},
    {"--output", "run.output", "Output directory"},
    {"--manifest", "run.manifest", "Manifest path (default <output>/manifest.jsonl)"},
    {"--threshold", "filter.threshold", "Imbalance threshold"},
    {"--imbalance-mode", "filter.imbalance_mode", "dominant_fraction or max_over_min"},
    {"--tau", "metrics.tau", "NSD tolerance"},
    {"--gamma", "loss.gamma", "Focal loss exponent"},
    {"--alpha-mix", "loss.alpha_mix", "Focal weight in the combined loss"},
    {"--workers", "run.workers", "Worker threads (0 = all cores)"},
    {"--verify", "run.verify", "loss-check: verify this vector file instead of writing vectors"},
    {"--seed", "loss.seed", "loss-check: base seed"},
    {"--count", "loss.count", "loss-check: vectors per file"},
};

}  // namespace

int run_cli(int argc, const char* const* argv, EnvLookup env) {
  if (!env) {
    env = [](const std::string& name) -> std::optional<std::string> {
      if (const char* v = std::getenv(name.c_str())) return std::string(v);
      return std::nullopt;
    };
  }

  CLI::App app{"Spine MRI segmentation dataset curation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "Key-value configuration file");
  std::map<std::string, std::string> flag_values;
  for (const auto& f : kFlags) app.add_option(f.name, flag_values[f.key], f.help);
  bool force = false;
  app.add_flag("--force", force, "Allow overwriting existing outputs and verdicts");

  const std::pair<const char*, const char*> commands[] = {
      {"extract", "Slice MHA volume pairs into PNG images and masks"},
      {"restore", "Repair extracted masks into four canonical classes"},
      {"filter", "Drop redundant and imbalanced slices"},
      {"evaluate", "Score predictions against restored masks of kept slices"},
      {"loss-check", "Run loss self-checks and write parity test vectors"},
      {"report", "Summarise the manifest and evaluation"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    KeyValues flags;
    for (const auto& f : kFlags) {
      if (app.count(f.name) > 0) flags[f.key] = split_words(flag_values[f.key]);
    }
    if (force) flags["run.force"] = {"true"};
    KeyValues env_layer;
    for (const auto& key : config_keys()) {
      if (auto v = env(env_var_name(key))) env_layer[key] = split_words(*v);
    }
    if (config_path.empty()) {
      if (auto v = env("SPINECURATE_CONFIG")) config_path = *v;
    }
    const KeyValues file = config_path.empty() ? KeyValues{} : load_key_values(config_path);
    const PipelineConfig cfg = pipeline_config_from(merge_layers(file, env_layer, flags));
    if (cfg.workers > 0) omp_set_num_threads(cfg.workers);

    if (command == "extract") {
      const auto r = run_extract(cfg);
      fmt::print("extract: {} volumes, {} entries, {} failed\n", r.volumes, r.entries, r.failed);
    } else if (command == "restore") {
      const auto r = run_restore(cfg);
      fmt::print("restore: {} restored, {} not converged, {} failed\n", r.restored, r.not_converged,
                 r.failed);
    } else if (command == "filter") {
      fmt::print("{}", format_summary_table(run_filter(cfg)));
    } else if (command == "evaluate") {
      const auto r = run_evaluate(cfg);
      fmt::print("evaluate: {} pairs evaluated, {} skipped\n", r.evaluated, r.skipped);
    } else if (command == "loss-check") {
      const auto r = run_losscheck(cfg);
      for (const auto& line : r.lines) fmt::print("{}\n", line);
      if (!r.failures.empty()) return kExitTolerance;
    } else {
      run_report(cfg);
      fmt::print("report written to {}\n", (cfg.output / "report.txt").string());
    }
  } catch (const Error& e) {
    fmt::print(stderr, "{}: {}: {}\n", command, to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "{}: IoError: {}\n", command, e.what());
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace spinecurate
