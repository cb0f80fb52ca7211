#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pathflow/progressive.hpp"

namespace pathflow {

/// What a distribution is taken over: event durations or one attribute.
struct Selector {
  enum class Kind { duration, attribute };
  Kind kind = Kind::duration;
  std::size_t attr = 0;

  friend bool operator==(const Selector&, const Selector&) = default;
};

/// "duration", or an attribute name / numeric id. Throws QueryError.
Selector parse_selector(std::string_view text, const DatasetManifest& manifest);
std::string selector_name(const Selector& selector, const DatasetManifest& manifest);

struct DistributionBin {
  std::int64_t lower = 0;
  std::int64_t upper = 0;  // exclusive
  std::string label;       // category label for categorical attributes
  std::uint64_t count = 0;
};

/// Non-empty bins of one node's sketch; counts sum to `node_count`.
struct Distribution {
  std::vector<TypeId> path;
  Selector selector;
  std::uint64_t node_count = 0;
  std::vector<DistributionBin> bins;
};

/// Throws NotFoundError for a path that addresses no node and QueryError
/// for a duration selector on the root (the root carries no events).
Distribution node_distribution(const TreeSnapshot& snapshot, std::span<const TypeId> path, const Selector& selector);
Distribution node_distribution(const AggregateTree& tree, std::span<const TypeId> path, const Selector& selector);

struct DiffRow {
  std::vector<TypeId> path;
  std::uint64_t count_a = 0;
  std::uint64_t count_b = 0;
  std::int64_t delta_count = 0;  // count_b - count_a
  std::optional<double> mean_a;  // absent when the node is missing on that side or is the root
  std::optional<double> mean_b;
  std::optional<double> delta_mean;  // mean_b - mean_a when both are present
};

/// Path-keyed comparison of two trees, ordered by |delta_count| descending,
/// ties by path.
struct DiffReport {
  std::vector<DiffRow> rows;
};

/// Throws QueryError when the snapshots were built from different manifests.
DiffReport diff_trees(const TreeSnapshot& a, const TreeSnapshot& b);
DiffReport diff_trees(const AggregateTree& a, const AggregateTree& b);

nlohmann::json distribution_to_json(const Distribution& dist, const DatasetManifest& manifest);
nlohmann::json diff_to_json(const DiffReport& report, const DatasetManifest& manifest);

/// Parses "3,1,4" (type ids) or names separated by '>' ("a>b>c"). Empty is the root.
std::vector<TypeId> parse_path(std::string_view text, const DatasetManifest& manifest);

}  // namespace pathflow
