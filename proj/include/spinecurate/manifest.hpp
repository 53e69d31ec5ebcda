#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "spinecurate/dataset_filter.hpp"

namespace spinecurate {

// Manifest files are JSON Lines: one ManifestEntry object per line, keys in
// sorted order, entries in the order given.

nlohmann::json to_json(const ManifestEntry& entry);
ManifestEntry entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSummary& summary);

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in);

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace spinecurate
