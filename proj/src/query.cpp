#include "pathflow/query.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

namespace {

bool parse_unsigned(std::string_view text, std::size_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Selector parse_selector(std::string_view text, const DatasetManifest& manifest) {
  if (text == "duration") return Selector{Selector::Kind::duration, 0};
  if (text.starts_with("attr:")) text.remove_prefix(5);
  if (auto attr = manifest.find_attribute(text)) return Selector{Selector::Kind::attribute, *attr};
  std::size_t id = 0;
  if (parse_unsigned(text, id) && id < manifest.attributes.size()) return Selector{Selector::Kind::attribute, id};
  throw QueryError("unknown selector '" + std::string(text) + "'");
}

std::string selector_name(const Selector& selector, const DatasetManifest& manifest) {
  if (selector.kind == Selector::Kind::duration) return "duration";
  return manifest.attributes.at(selector.attr).name;
}

std::vector<TypeId> parse_path(std::string_view text, const DatasetManifest& manifest) {
  std::vector<TypeId> path;
  if (text.empty()) return path;
  const char sep = text.find('>') != std::string_view::npos ? '>' : ',';
  while (true) {
    const auto cut = text.find(sep);
    const auto part = text.substr(0, cut);
    std::size_t id = 0;
    if (auto named = manifest.catalog.find(part)) {
      path.push_back(*named);
    } else if (parse_unsigned(part, id) && id < manifest.catalog.size()) {
      path.push_back(static_cast<TypeId>(id));
    } else {
      throw QueryError("bad path element '" + std::string(part) + "'");
    }
    if (cut == std::string_view::npos) break;
    text.remove_prefix(cut + 1);
  }
  return path;
}

Distribution node_distribution(const AggregateTree& tree, std::span<const TypeId> path, const Selector& selector) {
  const auto node = tree.find(path);
  if (!node) throw NotFoundError("no node at the requested path");
  const auto& manifest = tree.manifest();
  Distribution dist;
  dist.path.assign(path.begin(), path.end());
  dist.selector = selector;
  dist.node_count = tree.node(*node).count;

  if (selector.kind == Selector::Kind::duration) {
    if (*node == AggregateTree::root()) throw QueryError("the root has no event durations");
    const auto hist = tree.duration_histogram(*node);
    for (std::size_t bin = 0; bin < hist.size(); ++bin) {
      if (hist[bin] == 0) continue;
      dist.bins.push_back({duration_bin_lower(bin), duration_bin_upper(bin), {}, hist[bin]});
    }
    return dist;
  }
  if (selector.attr >= manifest.attributes.size()) throw QueryError("unknown attribute selector");
  const auto& spec = manifest.attributes[selector.attr];
  const auto bins = tree.attribute_bins(*node, selector.attr);
  for (std::size_t bin = 0; bin < bins.size(); ++bin) {
    if (bins[bin] == 0) continue;
    DistributionBin out{spec.bin_lower(bin), spec.bin_upper(bin), {}, bins[bin]};
    if (spec.kind == AttributeKind::categorical) out.label = spec.categories[bin];
    dist.bins.push_back(std::move(out));
  }
  return dist;
}

Distribution node_distribution(const TreeSnapshot& snapshot, std::span<const TypeId> path, const Selector& selector) {
  if (!snapshot.tree) throw NotFoundError("snapshot has no tree");
  return node_distribution(*snapshot.tree, path, selector);
}

DiffReport diff_trees(const AggregateTree& a, const AggregateTree& b) {
  if (!(a.manifest() == b.manifest())) throw QueryError("cannot diff trees built from different manifests");
  // Path-keyed union of both trees.
  struct Side {
    std::uint64_t count = 0;
    std::optional<double> mean;
  };
  std::map<std::vector<TypeId>, std::pair<Side, Side>> rows;
  auto collect = [&](const AggregateTree& tree, bool left) {
    std::vector<std::pair<NodeId, std::vector<TypeId>>> stack{{AggregateTree::root(), {}}};
    while (!stack.empty()) {
      auto [id, path] = std::move(stack.back());
      stack.pop_back();
      const auto& n = tree.node(id);
      Side side{n.count, id == AggregateTree::root() ? std::nullopt : std::optional<double>(n.mean_duration())};
      auto& slot = rows[path];
      (left ? slot.first : slot.second) = side;
      for (NodeId c = n.first_child; c != kNoNode; c = tree.node(c).next_sibling) {
        auto child_path = path;
        child_path.push_back(tree.node(c).type);
        stack.emplace_back(c, std::move(child_path));
      }
    }
  };
  collect(a, true);
  collect(b, false);

  DiffReport report;
  report.rows.reserve(rows.size());
  for (auto& [path, sides] : rows) {
    DiffRow row;
    row.path = path;
    row.count_a = sides.first.count;
    row.count_b = sides.second.count;
    row.delta_count = static_cast<std::int64_t>(row.count_b) - static_cast<std::int64_t>(row.count_a);
    row.mean_a = sides.first.mean;
    row.mean_b = sides.second.mean;
    if (row.mean_a && row.mean_b) row.delta_mean = *row.mean_b - *row.mean_a;
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const DiffRow& x, const DiffRow& y) {
    return std::llabs(x.delta_count) > std::llabs(y.delta_count);
  });
  return report;
}

DiffReport diff_trees(const TreeSnapshot& a, const TreeSnapshot& b) {
  if (!a.tree || !b.tree) throw QueryError("snapshot has no tree");
  return diff_trees(*a.tree, *b.tree);
}

namespace {

json path_to_json(const std::vector<TypeId>& path) {
  json ids = json::array();
  for (TypeId t : path) ids.push_back(t);
  return ids;
}

json path_names(const std::vector<TypeId>& path, const DatasetManifest& manifest) {
  json names = json::array();
  for (TypeId t : path) names.push_back(manifest.catalog.contains(t) ? manifest.catalog.name(t) : std::string{});
  return names;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json distribution_to_json(const Distribution& dist, const DatasetManifest& manifest) {
  json bins = json::array();
  for (const auto& bin : dist.bins) {
    json entry{{"lower", bin.lower}, {"upper", bin.upper}, {"count", bin.count}};
    if (!bin.label.empty()) entry["label"] = bin.label;
    bins.push_back(std::move(entry));
  }
  return json{{"path", path_to_json(dist.path)},
              {"names", path_names(dist.path, manifest)},
              {"selector", selector_name(dist.selector, manifest)},
              {"count", dist.node_count},
              {"bins", std::move(bins)}};
}

json diff_to_json(const DiffReport& report, const DatasetManifest& manifest) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"path", path_to_json(row.path)},
                    {"names", path_names(row.path, manifest)},
                    {"count_a", row.count_a},
                    {"count_b", row.count_b},
                    {"delta_count", row.delta_count},
                    {"mean_a", optional_number(row.mean_a)},
                    {"mean_b", optional_number(row.mean_b)},
                    {"delta_mean", optional_number(row.delta_mean)}});
  }
  return json{{"rows", std::move(rows)}};
}

}  // namespace pathflow
