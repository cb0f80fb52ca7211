#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathflow/filter.hpp"
#include "pathflow/progressive.hpp"
#include "pathflow/tree_json.hpp"

namespace pathflow {

using EntryId = std::uint64_t;

struct HistoryEntry {
  EntryId id = 0;
  FilterSpec filter;
  SnapshotPtr snapshot;
  std::int64_t created_at = 0;  // ms since the Unix epoch
  std::string label;
};

/// Equal ids, labels, timestamps, filters, snapshot metadata and trees.
bool same_entry(const HistoryEntry& a, const HistoryEntry& b);

/// Past views of one session. Ids count up from 1. With a path, every put
/// appends one JSON line and the constructor replays the existing file.
class HistoryStore {
 public:
  explicit HistoryStore(std::shared_ptr<const DatasetManifest> manifest,
                        std::optional<std::filesystem::path> file = std::nullopt);

  /// Throws QueryError when the snapshot is not a complete final snapshot.
  EntryId put(const FilterSpec& filter, SnapshotPtr snapshot, std::string label = {});
  /// Throws NotFoundError.
  HistoryEntry get(EntryId id) const;
  std::vector<HistoryEntry> list() const;
  std::size_t size() const;

 private:
  void load();

  std::shared_ptr<const DatasetManifest> manifest_;
  std::optional<std::filesystem::path> file_;
  mutable std::shared_mutex mutex_;
  std::vector<HistoryEntry> entries_;
};

nlohmann::json snapshot_to_json(const TreeSnapshot& snapshot, const TreeJsonOptions& options = {});
SnapshotPtr snapshot_from_json(const nlohmann::json& doc, std::shared_ptr<const DatasetManifest> manifest);

nlohmann::json entry_to_json(const HistoryEntry& entry, const DatasetManifest& manifest, bool with_tree = true);
HistoryEntry entry_from_json(const nlohmann::json& doc, std::shared_ptr<const DatasetManifest> manifest);

}  // namespace pathflow
