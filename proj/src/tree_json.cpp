#include "pathflow/tree_json.hpp"

#include <algorithm>
#include <queue>

#include "pathflow/errors.hpp"
#include "pathflow/manifest_json.hpp"

namespace pathflow {

using nlohmann::json;

std::string int128_to_string(DurationSquares value) {
  if (value == 0) return "0";
  const bool negative = value < 0;
  unsigned __int128 magnitude = negative ? -static_cast<unsigned __int128>(value) : static_cast<unsigned __int128>(value);
  std::string digits;
  while (magnitude > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(magnitude % 10)));
    magnitude /= 10;
  }
  if (negative) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

DurationSquares int128_from_string(const std::string& text) {
  if (text.empty()) throw ParseError(0, "empty integer");
  std::size_t i = 0;
  const bool negative = text[0] == '-';
  if (negative) i = 1;
  if (i >= text.size()) throw ParseError(0, "bad integer '" + text + "'");
  unsigned __int128 value = 0;
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9') throw ParseError(0, "bad integer '" + text + "'");
    value = value * 10 + static_cast<unsigned>(text[i] - '0');
  }
  return negative ? -static_cast<DurationSquares>(value) : static_cast<DurationSquares>(value);
}

namespace {

template <typename Span>
json trimmed_array(const Span& values) {
  std::size_t end = values.size();
  while (end > 0 && values[end - 1] == 0) --end;
  json out = json::array();
  for (std::size_t i = 0; i < end; ++i) out.push_back(values[i]);
  return out;
}

/// Nodes to emit when a node budget applies: a best-first walk by count,
/// so every kept node's ancestors are kept too.
std::vector<bool> select_nodes(const AggregateTree& tree, std::size_t max_nodes) {
  std::vector<bool> keep(tree.node_count(), max_nodes == 0);
  if (max_nodes == 0) return keep;
  auto less = [&](NodeId a, NodeId b) {
    const auto& x = tree.node(a);
    const auto& y = tree.node(b);
    if (x.count != y.count) return x.count < y.count;
    if (x.type != y.type) return x.type > y.type;
    return a > b;
  };
  std::priority_queue<NodeId, std::vector<NodeId>, decltype(less)> frontier(less);
  frontier.push(AggregateTree::root());
  std::size_t kept = 0;
  while (!frontier.empty() && kept < max_nodes) {
    const NodeId id = frontier.top();
    frontier.pop();
    keep[id] = true;
    ++kept;
    for (NodeId c = tree.node(id).first_child; c != kNoNode; c = tree.node(c).next_sibling) frontier.push(c);
  }
  return keep;
}

json node_to_json(const AggregateTree& tree, NodeId id, const std::vector<bool>& keep) {
  const auto& n = tree.node(id);
  const auto& manifest = tree.manifest();
  json out;
  if (n.type == kNoType) {
    out["type"] = nullptr;
    out["name"] = "";
  } else {
    out["type"] = n.type;
    out["name"] = manifest.catalog.contains(n.type) ? manifest.catalog.name(n.type) : std::string{};
  }
  out["count"] = n.count;
  out["terminal"] = n.terminal;
  if (n.type != kNoType) {
    out["dur_mean"] = n.mean_duration();
    out["dur_sum"] = n.dur_sum;
    out["dur_sq_sum"] = int128_to_string(n.dur_sq_sum);
    out["dur_min"] = n.count ? n.dur_min : 0;
    out["dur_max"] = n.count ? n.dur_max : 0;
    out["dur_hist"] = trimmed_array(tree.duration_histogram(id));
  }
  json attrs = json::object();
  for (std::size_t a = 0; a < manifest.attributes.size(); ++a) {
    attrs[manifest.attributes[a].name] = trimmed_array(tree.attribute_bins(id, a));
  }
  out["attrs"] = std::move(attrs);

  json children = json::array();
  std::uint64_t shown = 0;
  for (NodeId c : tree.sorted_children(id)) {
    if (!keep[c]) continue;
    shown += tree.node(c).count;
    children.push_back(node_to_json(tree, c, keep));
  }
  const std::uint64_t other = n.count - n.terminal - std::min(n.count - n.terminal, shown);
  if (other > 0) out["other"] = other;
  out["children"] = std::move(children);
  return out;
}

template <typename Span>
void read_bins(const json& values, Span target, const char* what) {
  if (!values.is_array() || values.size() > target.size()) {
    throw ParseError(0, std::string("tree node: bad ") + what);
  }
  for (std::size_t i = 0; i < values.size(); ++i) target[i] = values[i].get<std::uint32_t>();
}

void node_from_json(const json& doc, AggregateTree& tree, NodeId id) {
  auto& n = tree.node_mut(id);
  n.count = doc.at("count").get<std::uint64_t>();
  n.terminal = doc.at("terminal").get<std::uint64_t>();
  if (n.type != kNoType) {
    n.dur_sum = doc.at("dur_sum").get<Duration>();
    n.dur_sq_sum = int128_from_string(doc.at("dur_sq_sum").get<std::string>());
    if (n.count) {
      n.dur_min = doc.at("dur_min").get<Duration>();
      n.dur_max = doc.at("dur_max").get<Duration>();
    }
    read_bins(doc.at("dur_hist"), tree.duration_histogram_mut(id), "dur_hist");
  }
  const auto& manifest = tree.manifest();
  if (auto attrs = doc.find("attrs"); attrs != doc.end()) {
    auto sketch = tree.attribute_sketch_mut(id);
    for (const auto& [name, bins] : attrs->items()) {
      auto attr = manifest.find_attribute(name);
      if (!attr) throw ParseError(0, "tree node: unknown attribute '" + name + "'");
      read_bins(bins, sketch.subspan(manifest.sketch_offset(*attr), manifest.attributes[*attr].bin_count()), "attrs");
    }
  }
  for (const auto& child : doc.at("children")) {
    const TypeId type = child.at("type").get<TypeId>();
    if (!manifest.catalog.contains(type)) throw ParseError(0, "tree node: unknown type " + std::to_string(type));
    if (tree.find_child(id, type) != kNoNode) throw ParseError(0, "tree node: duplicate child type");
    const NodeId c = tree.child_for(id, type);
    node_from_json(child, tree, c);
  }
}

}  // namespace

json tree_to_json(const AggregateTree& tree, const TreeJsonOptions& options) {
  json doc;
  doc["format"] = "pathflow-tree/1";
  if (options.include_manifest) doc["manifest"] = manifest_to_json(tree.manifest());
  doc["patients"] = tree.patients();
  doc["nodes"] = tree.node_count();
  doc["root"] = node_to_json(tree, AggregateTree::root(), select_nodes(tree, options.max_nodes));
  return doc;
}

AggregateTree tree_from_json(const json& doc, std::shared_ptr<const DatasetManifest> manifest) {
  try {
    if (!manifest) {
      auto it = doc.find("manifest");
      if (it == doc.end()) throw ParseError(0, "tree document has no manifest");
      manifest = std::make_shared<const DatasetManifest>(manifest_from_json(*it));
    }
    AggregateTree tree(std::move(manifest));
    node_from_json(doc.at("root"), tree, AggregateTree::root());
    return tree;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed tree document: ") + e.what());
  }
}

std::string tree_to_text(const AggregateTree& tree) { return tree_to_json(tree).dump(1) + "\n"; }

}  // namespace pathflow
