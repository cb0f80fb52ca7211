#include "pathflow/layout.hpp"

#include <algorithm>

#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

std::string_view to_string(WidthMode mode) {
  switch (mode) {
    case WidthMode::mean: return "mean";
    case WidthMode::median: return "median";
    case WidthMode::uniform: return "uniform";
  }
  return "mean";
}

std::optional<WidthMode> parse_width_mode(std::string_view text) {
  if (text == "mean" || text == "mean_duration") return WidthMode::mean;
  if (text == "median" || text == "median_duration") return WidthMode::median;
  if (text == "uniform") return WidthMode::uniform;
  return std::nullopt;
}

namespace {

/// One displayed box before scaling: a real node or a collapsed remainder.
struct Item {
  NodeId node = kNoNode;  // kNoNode for "other"
  NodeId parent = kNoNode;
  std::uint64_t count = 0;
  std::uint64_t offset = 0;  // patients above this item within the parent
  double estimate = 0.0;     // width in time units
  double prefix = 0.0;       // sum of estimates of ancestors
  std::size_t depth = 0;
  std::size_t parent_item = 0;
};

class Planner {
 public:
  Planner(const AggregateTree& tree, const LayoutParams& params)
      : tree_(tree), params_(params), unit_(params.viewport_height / static_cast<double>(tree.patients())) {}

  double estimate(NodeId id) const {
    switch (params_.width_mode) {
      case WidthMode::uniform: return 1.0;
      case WidthMode::median: return median_duration(tree_, id);
      case WidthMode::mean: return tree_.node(id).mean_duration();
    }
    return 0.0;
  }

  // Pre-order expansion of `parent` (already pushed as item `parent_item`, or the root).
  void expand(NodeId parent, std::size_t parent_item, double prefix, std::size_t depth) {
    const auto& p = tree_.node(parent);
    std::uint64_t offset = 0;
    std::uint64_t other_count = 0;
    double other_weighted = 0.0;
    std::uint64_t other_weight = 0;
    for (NodeId c : tree_.sorted_children(parent)) {
      const auto& n = tree_.node(c);
      if (static_cast<double>(n.count) * unit_ < params_.min_node_height_px) {
        other_count += n.count;
        other_weighted += estimate(c) * static_cast<double>(n.count);
        other_weight += n.count;
        continue;
      }
      Item item{c, parent, n.count, offset, estimate(c), prefix, depth, parent_item};
      offset += n.count;
      items_.push_back(item);
      const std::size_t index = items_.size() - 1;
      expand(c, index, prefix + item.estimate, depth + 1);
    }
    // Subtrees missing from a pruned snapshot join the collapsed siblings.
    const std::uint64_t below = p.count - std::min(p.count, p.terminal);
    const std::uint64_t pruned = below - std::min(below, offset + other_count);
    if (other_count + pruned > 0) {
      double est = other_weight ? other_weighted / static_cast<double>(other_weight) : fallback_estimate(parent);
      items_.push_back(Item{kNoNode, parent, other_count + pruned, offset, est, prefix, depth, parent_item});
    }
  }

  double fallback_estimate(NodeId parent) const {
    if (params_.width_mode == WidthMode::uniform) return 1.0;
    if (parent == AggregateTree::root()) return 0.0;
    return estimate(parent);
  }

  std::vector<Item>& items() { return items_; }
  double unit() const { return unit_; }

 private:
  const AggregateTree& tree_;
  const LayoutParams& params_;
  double unit_;
  std::vector<Item> items_;
};

}  // namespace

std::vector<IcicleRect> layout_icicle(const AggregateTree& tree, const LayoutParams& params) {
  if (!(params.viewport_width > 0) || !(params.viewport_height > 0)) throw ParamError("viewport must be positive");
  if (!(params.min_node_height_px >= 0)) throw ParamError("min_node_height_px must be non-negative");
  if (params.duration_scale && !(*params.duration_scale >= 0)) throw ParamError("duration_scale must be non-negative");
  std::vector<IcicleRect> rects;
  if (tree.empty()) return rects;

  Planner planner(tree, params);
  planner.expand(AggregateTree::root(), 0, 0.0, 1);
  auto& items = planner.items();

  double scale = 0.0;
  if (params.duration_scale) {
    scale = *params.duration_scale;
  } else {
    double deepest = 0.0;
    for (const auto& item : items) deepest = std::max(deepest, item.prefix + item.estimate);
    scale = deepest > 0 ? params.viewport_width / deepest : 0.0;
  }

  const auto& manifest = tree.manifest();
  const double unit = planner.unit();
  rects.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    IcicleRect rect;
    const bool top = item.depth == 1;
    const double parent_y = top ? 0.0 : rects[item.parent_item].y;
    // Positions come from cumulative counts so rounding never accumulates.
    rect.y = parent_y + static_cast<double>(item.offset) * unit;
    rect.height = static_cast<double>(item.count) * unit;
    rect.x = top ? 0.0 : rects[item.parent_item].x + rects[item.parent_item].width;
    rect.width = item.estimate * scale;
    rect.count = item.count;
    rect.depth = item.depth;
    if (!top) rect.path = rects[item.parent_item].path;
    if (item.node == kNoNode) {
      rect.is_other = true;
      rect.color = kOtherColor;
    } else {
      rect.type = tree.node(item.node).type;
      rect.path.push_back(rect.type);
      rect.color = manifest.catalog.at(rect.type).color;
    }
    rects.push_back(std::move(rect));
  }
  return rects;
}

std::vector<IcicleRect> layout_icicle(const TreeSnapshot& snapshot, const LayoutParams& params) {
  if (!snapshot.tree) throw ParamError("snapshot has no tree");
  return layout_icicle(*snapshot.tree, params);
}

bool rect_contains(const IcicleRect& rect, double x, double y) noexcept {
  return x >= rect.x && x < rect.x + rect.width && y >= rect.y && y < rect.y + rect.height;
}

IcicleIndex::IcicleIndex(std::vector<IcicleRect> rects) : rects_(std::move(rects)) {
  for (std::size_t i = 0; i < rects_.size(); ++i) {
    const auto d = rects_[i].depth;
    if (by_depth_.size() <= d) by_depth_.resize(d + 1);
    by_depth_[d].push_back(i);
  }
  for (auto& bucket : by_depth_) {
    std::stable_sort(bucket.begin(), bucket.end(), [&](std::size_t a, std::size_t b) { return rects_[a].y < rects_[b].y; });
  }
}

std::optional<std::size_t> IcicleIndex::find(double x, double y) const {
  for (std::size_t d = by_depth_.size(); d-- > 0;) {
    const auto& bucket = by_depth_[d];
    // Last rect starting at or above y; zero-height rects may share a y, so scan back over them.
    auto it = std::upper_bound(bucket.begin(), bucket.end(), y,
                               [&](double value, std::size_t i) { return value < rects_[i].y; });
    while (it != bucket.begin()) {
      --it;
      const auto& rect = rects_[*it];
      if (rect_contains(rect, x, y)) return *it;
      if (rect.height > 0) break;
    }
  }
  return std::nullopt;
}

std::optional<std::vector<TypeId>> hit_test(const std::vector<IcicleRect>& rects, double x, double y) {
  IcicleIndex index(rects);
  if (auto i = index.find(x, y)) return index.rects()[*i].path;
  return std::nullopt;
}

json rects_to_json(const std::vector<IcicleRect>& rects, const DatasetManifest& manifest) {
  json out = json::array();
  for (const auto& rect : rects) {
    json path = json::array();
    for (TypeId t : rect.path) path.push_back(t);
    json entry{{"path", std::move(path)},
               {"x", rect.x},
               {"y", rect.y},
               {"width", rect.width},
               {"height", rect.height},
               {"color", rect.color},
               {"is_other", rect.is_other},
               {"count", rect.count},
               {"depth", rect.depth}};
    if (rect.is_other) {
      entry["type"] = nullptr;
      entry["name"] = "other";
    } else {
      entry["type"] = rect.type;
      entry["name"] = manifest.catalog.contains(rect.type) ? manifest.catalog.name(rect.type) : std::string{};
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<IcicleRect> rects_from_json(const json& doc) {
  std::vector<IcicleRect> rects;
  try {
    for (const auto& entry : doc) {
      IcicleRect rect;
      rect.path = entry.at("path").get<std::vector<TypeId>>();
      rect.x = entry.at("x").get<double>();
      rect.y = entry.at("y").get<double>();
      rect.width = entry.at("width").get<double>();
      rect.height = entry.at("height").get<double>();
      rect.color = entry.at("color").get<std::string>();
      rect.is_other = entry.at("is_other").get<bool>();
      rect.count = entry.at("count").get<std::uint64_t>();
      rect.depth = entry.value("depth", rect.path.size() + (rect.is_other ? 1 : 0));
      rect.type = entry.at("type").is_null() ? kNoType : entry.at("type").get<TypeId>();
      rects.push_back(std::move(rect));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed rect list: ") + e.what());
  }
  return rects;
}

}  // namespace pathflow
