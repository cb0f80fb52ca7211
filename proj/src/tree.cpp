#include "pathflow/tree.hpp"

#include <algorithm>

#include "pathflow/errors.hpp"

namespace pathflow {

AggregateTree::AggregateTree(std::shared_ptr<const DatasetManifest> manifest) : manifest_(std::move(manifest)) {
  if (!manifest_) throw EngineError("aggregate tree needs a manifest");
  sketch_width_ = manifest_->sketch_width();
  clear();
}

void AggregateTree::clear() {
  nodes_.assign(1, AggregateNode{});
  hist_.assign(kDurationBins, 0);
  sketch_.assign(sketch_width_, 0);
}

std::span<const std::uint32_t> AggregateTree::attribute_bins(NodeId id, std::size_t attr) const {
  if (attr >= manifest_->attributes.size()) throw QueryError("unknown attribute " + std::to_string(attr));
  const auto sketch = attribute_sketch(id);
  return sketch.subspan(manifest_->sketch_offset(attr), manifest_->attributes[attr].bin_count());
}

NodeId AggregateTree::find_child(NodeId parent, TypeId type) const noexcept {
  for (NodeId c = nodes_[parent].first_child; c != kNoNode; c = nodes_[c].next_sibling) {
    if (nodes_[c].type == type) return c;
  }
  return kNoNode;
}

std::vector<NodeId> AggregateTree::sorted_children(NodeId parent) const {
  std::vector<NodeId> out;
  for (NodeId c = nodes_.at(parent).first_child; c != kNoNode; c = nodes_[c].next_sibling) out.push_back(c);
  std::sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
    if (nodes_[a].count != nodes_[b].count) return nodes_[a].count > nodes_[b].count;
    return nodes_[a].type < nodes_[b].type;
  });
  return out;
}

std::optional<NodeId> AggregateTree::find(std::span<const TypeId> path) const {
  NodeId cur = root();
  for (TypeId t : path) {
    cur = find_child(cur, t);
    if (cur == kNoNode) return std::nullopt;
  }
  return cur;
}

std::vector<TypeId> AggregateTree::path_of(NodeId id) const {
  std::vector<TypeId> path;
  for (NodeId cur = id; cur != root() && cur != kNoNode; cur = nodes_.at(cur).parent) path.push_back(nodes_[cur].type);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t AggregateTree::depth_of(NodeId id) const {
  std::size_t depth = 0;
  for (NodeId cur = id; cur != root() && cur != kNoNode; cur = nodes_.at(cur).parent) ++depth;
  return depth;
}

NodeId AggregateTree::add_node(NodeId parent, TypeId type) {
  if (nodes_.size() >= kNoNode) throw EngineError("aggregate tree exceeds node capacity");
  const auto id = static_cast<NodeId>(nodes_.size());
  AggregateNode node;
  node.type = type;
  node.parent = parent;
  node.next_sibling = nodes_[parent].first_child;
  nodes_.push_back(node);
  nodes_[parent].first_child = id;
  hist_.resize(hist_.size() + kDurationBins, 0);
  sketch_.resize(sketch_.size() + sketch_width_, 0);
  return id;
}

NodeId AggregateTree::child_for(NodeId parent, TypeId type) {
  const NodeId existing = find_child(parent, type);
  return existing != kNoNode ? existing : add_node(parent, type);
}

void sketch_indices(const DatasetManifest& manifest, std::span<const AttrValue> attributes,
                    std::vector<std::uint32_t>& out) {
  out.resize(manifest.attributes.size());
  std::size_t offset = 0;
  for (std::size_t a = 0; a < manifest.attributes.size(); ++a) {
    const auto& spec = manifest.attributes[a];
    const AttrValue value = a < attributes.size() ? attributes[a] : 0;
    out[a] = static_cast<std::uint32_t>(offset + spec.bin_of(value));
    offset += spec.bin_count();
  }
}

void AggregateTree::insert(std::span<const HighEvent> events, std::span<const std::uint32_t> sketch_index) {
  auto bump_sketch = [&](NodeId id) {
    std::uint32_t* row = sketch_.data() + std::size_t{id} * sketch_width_;
    for (std::uint32_t idx : sketch_index) ++row[idx];
  };
  NodeId cur = root();
  ++nodes_[cur].count;
  bump_sketch(cur);
  for (const auto& e : events) {
    cur = child_for(cur, e.type);
    const Duration d = e.duration();
    AggregateNode& n = nodes_[cur];
    ++n.count;
    n.dur_sum += d;
    n.dur_sq_sum += static_cast<DurationSquares>(d) * d;
    n.dur_min = std::min(n.dur_min, d);
    n.dur_max = std::max(n.dur_max, d);
    ++hist_[std::size_t{cur} * kDurationBins + duration_bin(d)];
    bump_sketch(cur);
  }
  ++nodes_[cur].terminal;
}

void AggregateTree::insert(const PatientSequence& seq) {
  std::vector<std::uint32_t> index;
  sketch_indices(*manifest_, seq.attributes, index);
  insert(seq.events, index);
}

bool AggregateTree::same_manifest(const AggregateTree& other) const {
  return manifest_ == other.manifest_ || *manifest_ == *other.manifest_;
}

void AggregateTree::merge(const AggregateTree& other) {
  if (!same_manifest(other)) throw EngineError("cannot merge trees built from different manifests");
  if (&other == this) {
    AggregateTree copy = other;
    merge(copy);
    return;
  }
  // Depth-first over `other`, carrying the matching node in `this`.
  std::vector<std::pair<NodeId, NodeId>> stack{{root(), root()}};
  while (!stack.empty()) {
    const auto [src, dst] = stack.back();
    stack.pop_back();
    const AggregateNode& s = other.nodes_[src];
    AggregateNode& d = nodes_[dst];
    d.count += s.count;
    d.terminal += s.terminal;
    d.dur_sum += s.dur_sum;
    d.dur_sq_sum += s.dur_sq_sum;
    d.dur_min = std::min(d.dur_min, s.dur_min);
    d.dur_max = std::max(d.dur_max, s.dur_max);
    const std::uint32_t* sh = other.hist_.data() + std::size_t{src} * kDurationBins;
    std::uint32_t* dh = hist_.data() + std::size_t{dst} * kDurationBins;
    for (std::size_t i = 0; i < kDurationBins; ++i) dh[i] += sh[i];
    const std::uint32_t* ss = other.sketch_.data() + std::size_t{src} * sketch_width_;
    std::uint32_t* ds = sketch_.data() + std::size_t{dst} * sketch_width_;
    for (std::size_t i = 0; i < sketch_width_; ++i) ds[i] += ss[i];
    for (NodeId c = s.first_child; c != kNoNode; c = other.nodes_[c].next_sibling) {
      stack.emplace_back(c, child_for(dst, other.nodes_[c].type));
    }
  }
}

AggregateTree AggregateTree::pruned_copy(std::uint64_t min_count) const {
  if (min_count <= 1) return *this;
  AggregateTree out(manifest_);
  out.nodes_[0] = nodes_[0];
  out.nodes_[0].first_child = kNoNode;
  std::copy_n(hist_.begin(), kDurationBins, out.hist_.begin());
  std::copy_n(sketch_.begin(), sketch_width_, out.sketch_.begin());
  std::vector<std::pair<NodeId, NodeId>> stack{{root(), root()}};
  while (!stack.empty()) {
    const auto [src, dst] = stack.back();
    stack.pop_back();
    for (NodeId c = nodes_[src].first_child; c != kNoNode; c = nodes_[c].next_sibling) {
      if (nodes_[c].count < min_count) continue;
      const NodeId copy = out.add_node(dst, nodes_[c].type);
      AggregateNode& n = out.nodes_[copy];
      const NodeId first = n.first_child;
      const NodeId sibling = n.next_sibling;
      n = nodes_[c];
      n.parent = dst;
      n.first_child = first;
      n.next_sibling = sibling;
      std::copy_n(hist_.begin() + std::size_t{c} * kDurationBins, kDurationBins,
                  out.hist_.begin() + std::size_t{copy} * kDurationBins);
      std::copy_n(sketch_.begin() + std::size_t{c} * sketch_width_, sketch_width_,
                  out.sketch_.begin() + std::size_t{copy} * sketch_width_);
      stack.emplace_back(c, copy);
    }
  }
  return out;
}

bool operator==(const AggregateTree& a, const AggregateTree& b) {
  if (!a.same_manifest(b)) return false;
  if (a.nodes_.size() != b.nodes_.size()) return false;
  std::vector<std::pair<NodeId, NodeId>> stack{{AggregateTree::root(), AggregateTree::root()}};
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    const AggregateNode& n = a.nodes_[x];
    const AggregateNode& m = b.nodes_[y];
    if (n.type != m.type || n.count != m.count || n.terminal != m.terminal || n.dur_sum != m.dur_sum ||
        n.dur_sq_sum != m.dur_sq_sum || n.dur_min != m.dur_min || n.dur_max != m.dur_max) {
      return false;
    }
    if (!std::equal(a.duration_histogram(x).begin(), a.duration_histogram(x).end(), b.duration_histogram(y).begin()) ||
        !std::equal(a.attribute_sketch(x).begin(), a.attribute_sketch(x).end(), b.attribute_sketch(y).begin())) {
      return false;
    }
    std::size_t children = 0;
    for (NodeId c = n.first_child; c != kNoNode; c = a.nodes_[c].next_sibling) {
      const NodeId match = b.find_child(y, a.nodes_[c].type);
      if (match == kNoNode) return false;
      stack.emplace_back(c, match);
      ++children;
    }
    std::size_t other_children = 0;
    for (NodeId c = m.first_child; c != kNoNode; c = b.nodes_[c].next_sibling) ++other_children;
    if (children != other_children) return false;
  }
  return true;
}

AggregateTree merge_trees(const AggregateTree& a, const AggregateTree& b) {
  AggregateTree out = a;
  out.merge(b);
  return out;
}

double median_duration(const AggregateTree& tree, NodeId id) {
  const auto& n = tree.node(id);
  if (n.count == 0 || n.type == kNoType) return 0.0;
  const auto hist = tree.duration_histogram(id);
  const double half = static_cast<double>(n.count) / 2.0;
  double below = 0.0;
  for (std::size_t bin = 0; bin < kDurationBins; ++bin) {
    const double in_bin = hist[bin];
    if (in_bin > 0 && below + in_bin >= half) {
      const double lo = std::max<double>(static_cast<double>(duration_bin_lower(bin)), static_cast<double>(n.dur_min));
      const double hi = std::min<double>(static_cast<double>(duration_bin_upper(bin)), static_cast<double>(n.dur_max));
      const double frac = (half - below) / in_bin;
      return std::clamp(lo + frac * (hi - lo), static_cast<double>(n.dur_min), static_cast<double>(n.dur_max));
    }
    below += in_bin;
  }
  return static_cast<double>(n.dur_max);
}

}  // namespace pathflow
