#pragma once

#include <filesystem>
#include <json.hpp>

#include "pathflow/manifest.hpp"

namespace pathflow {

/// Reads a manifest document. Shape errors (wrong JSON kinds, unknown
/// time unit) throw ManifestError; catalog-level problems such as a parent
/// naming an undeclared type are kept so validate_manifest() can report them.
DatasetManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path);

/// load_manifest() followed by validate_manifest(); throws ManifestError
/// listing every violation.
DatasetManifest load_valid_manifest(const std::filesystem::path& path);

nlohmann::json violations_to_json(const std::vector<Violation>& violations);

/// Reads a whole JSON file; throws ManifestError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace pathflow
