#include "spinecurate/manifest.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "spinecurate/error.hpp"

namespace spinecurate {

using nlohmann::json;

namespace {

std::string_view axis_name(SliceAxis a) {
  return a == SliceAxis::axial_override ? "axial_override" : "sagittal_default";
}

SliceAxis axis_from(std::string_view s) {
  if (s == "sagittal_default") return SliceAxis::sagittal_default;
  if (s == "axial_override") return SliceAxis::axial_override;
  throw Error(Errc::unsupported_value, fmt::format("slice axis '{}'", s));
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const ManifestEntry& e) {
  json j;
  j["id"] = e.id;
  j["volume"] = e.volume;
  j["slice_index"] = e.slice_index;
  j["series"] = to_string(e.series);
  j["slice_spec"] = {{"axis", axis_name(e.slice_spec.axis)},
                     {"rotate_quarter_turns", e.slice_spec.rotate_quarter_turns},
                     {"flip_horizontal", e.slice_spec.flip_horizontal},
                     {"flip_vertical", e.slice_spec.flip_vertical}};
  j["spacing"] = e.spacing;
  j["image_ref"] = e.image_ref;
  j["mask_ref"] = e.mask_ref;
  j["restored_ref"] = e.restored_ref;
  j["restore"] = e.restore ? json{{"converged", e.restore->converged}, {"rounds", e.restore->rounds}}
                           : json(nullptr);
  j["stats"] = e.stats ? json{{"counts", e.stats->counts}, {"total", e.stats->total}}
                       : json(nullptr);
  j["weights"] = e.weights ? json(e.weights->weights) : json(nullptr);
  j["imbalance_ratio"] = optional_json(e.imbalance_ratio);
  j["verdict"] = to_string(e.verdict);
  j["split"] = e.split;
  j["error"] = e.error;
  return j;
}

ManifestEntry entry_from_json(const json& j) {
  try {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.volume = j.value("volume", "");
    e.slice_index = j.value("slice_index", 0);
    e.series = series_from_string(j.at("series").get<std::string>());
    if (j.contains("slice_spec")) {
      const auto& s = j["slice_spec"];
      e.slice_spec.axis = axis_from(s.value("axis", "sagittal_default"));
      e.slice_spec.rotate_quarter_turns = s.value("rotate_quarter_turns", 0);
      e.slice_spec.flip_horizontal = s.value("flip_horizontal", false);
      e.slice_spec.flip_vertical = s.value("flip_vertical", false);
    }
    if (j.contains("spacing")) e.spacing = j["spacing"].get<std::array<double, 2>>();
    e.image_ref = j.value("image_ref", "");
    e.mask_ref = j.value("mask_ref", "");
    e.restored_ref = j.value("restored_ref", "");
    if (j.contains("restore") && !j["restore"].is_null()) {
      e.restore = RestoreStatus{j["restore"].at("converged").get<bool>(),
                                j["restore"].at("rounds").get<int>()};
    }
    if (j.contains("stats") && !j["stats"].is_null()) {
      ClassStats st;
      st.counts = j["stats"].at("counts").get<std::array<std::int64_t, kNumClasses>>();
      st.total = j["stats"].at("total").get<std::int64_t>();
      std::int64_t sum = 0;
      for (auto n : st.counts) sum += n;
      if (sum != st.total) {
        throw Error(Errc::invalid_argument, fmt::format("entry {}: counts do not sum to total", e.id));
      }
      e.stats = st;
    }
    if (j.contains("weights") && !j["weights"].is_null()) {
      e.weights = ClassWeights{j["weights"].get<std::array<double, kNumClasses>>()};
    }
    if (j.contains("imbalance_ratio") && !j["imbalance_ratio"].is_null()) {
      e.imbalance_ratio = j["imbalance_ratio"].get<double>();
    }
    e.verdict = verdict_from_string(j.value("verdict", "pending"));
    e.split = j.value("split", "");
    e.error = j.value("error", "");
    e.slice_spec.validate();
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::invalid_argument, fmt::format("manifest record: {}", ex.what()));
  }
}

json to_json(const DatasetSummary& summary) {
  auto series_json = [](const SeriesSummary& s) {
    return json{{"total", s.total},
                {"kept", s.kept},
                {"dropped_redundant", s.dropped_redundant},
                {"dropped_imbalanced", s.dropped_imbalanced},
                {"failed", s.failed},
                {"pending", s.pending},
                {"max_ratio_before", optional_json(s.max_ratio_before)},
                {"max_ratio_kept", optional_json(s.max_ratio_kept)},
                {"ratio_reduction", optional_json(s.ratio_reduction())}};
  };
  json j;
  j["mode"] = to_string(summary.mode);
  j["threshold"] = summary.threshold;
  j["overall"] = series_json(summary.overall);
  json per = json::object();
  for (const auto& [series, s] : summary.per_series) per[std::string(to_string(series))] = series_json(s);
  j["per_series"] = per;
  return j;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw Error(Errc::malformed_line, fmt::format("manifest line {}: {}", line_no, ex.what()));
    }
    entries.push_back(entry_from_json(j));
  }
  return entries;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Written to a sibling file, then renamed over the target.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::io, fmt::format("cannot create {}", tmp.string()));
    write_manifest(out, entries);
    if (!out) throw Error(Errc::io, fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, fmt::format("cannot open manifest {}", path.string()));
  return read_manifest(in);
}

}  // namespace spinecurate
