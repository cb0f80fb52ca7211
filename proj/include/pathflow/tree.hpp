#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pathflow/aggregate.hpp"

namespace pathflow {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

__extension__ using DurationSquares = __int128;

/// Durations are sketched into 64 log2-scaled bins: bin 0 holds 0, bin k
/// holds [2^(k-1), 2^k), and bin 63 is open-ended.
inline constexpr std::size_t kDurationBins = 64;

inline std::size_t duration_bin(Duration d) noexcept {
  if (d <= 0) return 0;
  return std::min<std::size_t>(kDurationBins - 1, std::bit_width(static_cast<std::uint64_t>(d)));
}
inline Duration duration_bin_lower(std::size_t bin) noexcept {
  return bin == 0 ? 0 : Duration{1} << (bin - 1);
}
/// Exclusive upper bound; the last bin is capped at the largest Duration.
inline Duration duration_bin_upper(std::size_t bin) noexcept {
  if (bin == 0) return 1;
  if (bin >= kDurationBins - 1) return std::numeric_limits<Duration>::max();
  return Duration{1} << bin;
}

struct AggregateNode {
  TypeId type = kNoType;
  NodeId parent = kNoNode;
  NodeId first_child = kNoNode;
  NodeId next_sibling = kNoNode;
  std::uint64_t count = 0;     // patients passing through this node
  std::uint64_t terminal = 0;  // patients whose sequence ends here
  Duration dur_sum = 0;
  DurationSquares dur_sq_sum = 0;
  Duration dur_min = std::numeric_limits<Duration>::max();
  Duration dur_max = std::numeric_limits<Duration>::min();

  /// Mean event duration at this node; 0 for the root and for empty nodes.
  double mean_duration() const noexcept {
    return count && type != kNoType ? static_cast<double>(dur_sum) / static_cast<double>(count) : 0.0;
  }
};

/// Prefix tree over high-level event sequences.
///
/// Nodes live in a flat arena (index 0 is the virtual root) with
/// first-child/next-sibling links; duration histograms and attribute
/// sketches are stored in parallel arrays with a fixed stride per node.
/// All statistics are integers, so merging is exact and independent of
/// the order in which partial trees are combined.
class AggregateTree {
 public:
  explicit AggregateTree(std::shared_ptr<const DatasetManifest> manifest);

  static constexpr NodeId root() noexcept { return 0; }

  const DatasetManifest& manifest() const noexcept { return *manifest_; }
  const std::shared_ptr<const DatasetManifest>& manifest_ptr() const noexcept { return manifest_; }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const AggregateNode& node(NodeId id) const { return nodes_.at(id); }
  /// Patients admitted into the tree (the root count).
  std::uint64_t patients() const noexcept { return nodes_[0].count; }
  bool empty() const noexcept { return nodes_[0].count == 0; }

  std::span<const std::uint32_t> duration_histogram(NodeId id) const {
    return {hist_.data() + std::size_t{id} * kDurationBins, kDurationBins};
  }
  std::span<const std::uint32_t> attribute_sketch(NodeId id) const {
    return {sketch_.data() + std::size_t{id} * sketch_width_, sketch_width_};
  }
  /// Bins of one attribute at one node.
  std::span<const std::uint32_t> attribute_bins(NodeId id, std::size_t attr) const;

  NodeId find_child(NodeId parent, TypeId type) const noexcept;
  /// Children in canonical order: descending count, ties by ascending type id.
  std::vector<NodeId> sorted_children(NodeId parent) const;
  std::optional<NodeId> find(std::span<const TypeId> path) const;
  std::vector<TypeId> path_of(NodeId id) const;
  std::size_t depth_of(NodeId id) const;

  void insert(const PatientSequence& seq);
  /// `sketch_index` holds, per attribute, the absolute index into a node's
  /// attribute sketch (see sketch_indices()).
  void insert(std::span<const HighEvent> events, std::span<const std::uint32_t> sketch_index);

  /// Adds `other` node-wise. Throws EngineError when the manifests differ.
  void merge(const AggregateTree& other);

  void clear();

  /// Copy without nodes whose count is below `min_count` (and their
  /// subtrees). The root is always kept.
  AggregateTree pruned_copy(std::uint64_t min_count) const;

  /// Low-level construction used by deserialization: returns the existing
  /// child of `parent` with `type` or appends a new empty one.
  NodeId child_for(NodeId parent, TypeId type);
  AggregateNode& node_mut(NodeId id) { return nodes_.at(id); }
  std::span<std::uint32_t> duration_histogram_mut(NodeId id) {
    return {hist_.data() + std::size_t{id} * kDurationBins, kDurationBins};
  }
  std::span<std::uint32_t> attribute_sketch_mut(NodeId id) {
    return {sketch_.data() + std::size_t{id} * sketch_width_, sketch_width_};
  }

  /// Structural and numeric equality, independent of arena order.
  friend bool operator==(const AggregateTree& a, const AggregateTree& b);

 private:
  NodeId add_node(NodeId parent, TypeId type);
  bool same_manifest(const AggregateTree& other) const;

  std::shared_ptr<const DatasetManifest> manifest_;
  std::size_t sketch_width_ = 0;
  std::vector<AggregateNode> nodes_;
  std::vector<std::uint32_t> hist_;
  std::vector<std::uint32_t> sketch_;
};

/// Absolute sketch indices for a patient's attribute values.
void sketch_indices(const DatasetManifest& manifest, std::span<const AttrValue> attributes,
                    std::vector<std::uint32_t>& out);

AggregateTree merge_trees(const AggregateTree& a, const AggregateTree& b);

/// Median duration interpolated inside the histogram bin holding the
/// middle sample, clamped to the node's [min, max].
double median_duration(const AggregateTree& tree, NodeId id);

}  // namespace pathflow
