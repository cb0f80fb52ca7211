#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pathflow/progressive.hpp"

namespace pathflow {

enum class WidthMode { mean, median, uniform };
std::string_view to_string(WidthMode mode);
std::optional<WidthMode> parse_width_mode(std::string_view text);

struct LayoutParams {
  double viewport_width = 1000.0;
  double viewport_height = 600.0;
  /// Siblings shorter than this collapse into one "other" rect.
  double min_node_height_px = 0.0;
  /// Widths are per node. Aligning each depth to one column width would be
  /// the alternative; it hides duration differences between siblings.
  WidthMode width_mode = WidthMode::mean;
  /// Pixels per time unit (per node in uniform mode). Absent: the deepest
  /// displayed path is scaled to the viewport width.
  std::optional<double> duration_scale;
};

inline constexpr const char* kOtherColor = "#999999";

struct IcicleRect {
  /// Type ids from the root. An "other" rect carries its parent's path.
  std::vector<TypeId> path;
  double x = 0, y = 0, width = 0, height = 0;
  std::string color;
  bool is_other = false;
  std::uint64_t count = 0;
  TypeId type = kNoType;  // kNoType for "other"
  std::size_t depth = 0;  // 1 for root children
};

/// Throws ParamError for a non-positive viewport or negative threshold.
/// An empty tree yields no rects. Rects come in pre-order, siblings top to
/// bottom by descending count, ties by ascending type id.
std::vector<IcicleRect> layout_icicle(const AggregateTree& tree, const LayoutParams& params);
std::vector<IcicleRect> layout_icicle(const TreeSnapshot& snapshot, const LayoutParams& params);

/// Rects bucketed by depth and sorted by y; rects of one depth never
/// overlap vertically, so a lookup is a binary search per depth.
class IcicleIndex {
 public:
  explicit IcicleIndex(std::vector<IcicleRect> rects);

  /// Index of the deepest rect containing (x, y); edges are half-open.
  std::optional<std::size_t> find(double x, double y) const;
  const std::vector<IcicleRect>& rects() const noexcept { return rects_; }

 private:
  std::vector<IcicleRect> rects_;
  std::vector<std::vector<std::size_t>> by_depth_;
};

bool rect_contains(const IcicleRect& rect, double x, double y) noexcept;
std::optional<std::vector<TypeId>> hit_test(const std::vector<IcicleRect>& rects, double x, double y);

nlohmann::json rects_to_json(const std::vector<IcicleRect>& rects, const DatasetManifest& manifest);
std::vector<IcicleRect> rects_from_json(const nlohmann::json& doc);

}  // namespace pathflow
