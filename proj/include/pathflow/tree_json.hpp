#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "pathflow/tree.hpp"

namespace pathflow {

struct TreeJsonOptions {
  /// Embed the manifest so the document is self-describing.
  bool include_manifest = true;
  /// Keep at most this many nodes (root included), chosen by descending
  /// count; dropped subtrees show up in their parent's "other" field.
  std::size_t max_nodes = 0;  // 0: no limit
};

/// Canonical tree document. Children are ordered by descending count, ties
/// by ascending type id; node fields are documented in docs/formats.md.
nlohmann::json tree_to_json(const AggregateTree& tree, const TreeJsonOptions& options = {});

/// Rebuilds a tree. Without `manifest`, the document must embed one.
/// Derived fields ("dur_mean", "other") are ignored.
AggregateTree tree_from_json(const nlohmann::json& doc, std::shared_ptr<const DatasetManifest> manifest = nullptr);

/// Stable text form used for tree.json files and golden comparisons.
std::string tree_to_text(const AggregateTree& tree);

std::string int128_to_string(DurationSquares value);
DurationSquares int128_from_string(const std::string& text);

}  // namespace pathflow
