#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the engine's aggregation, filter or tree code.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pathflow/dataset.hpp"
#include "pathflow/filter.hpp"
#include "pathflow/manifest.hpp"
#include "pathflow/tree.hpp"

namespace oracle {

using namespace pathflow;

struct Ev {
  TypeId type;
  Time start;
  Time end;
};

inline TypeId ancestor_at(const DatasetManifest& m, TypeId t, unsigned level) {
  const auto entries = m.catalog.entries();
  while (level-- > 0 && entries[t].parent) t = *entries[t].parent;
  return t;
}

inline bool hidden(const DatasetManifest& m, const std::vector<TypeId>& hide, TypeId t) {
  const auto entries = m.catalog.entries();
  for (std::size_t guard = 0; guard <= entries.size(); ++guard) {
    if (std::find(hide.begin(), hide.end(), t) != hide.end()) return true;
    if (!entries[t].parent) return false;
    t = *entries[t].parent;
  }
  return false;
}

inline bool predicate_holds(const AttributePredicate& p, AttrValue v) {
  const auto& o = p.operands;
  switch (p.op) {
    case CompareOp::eq: return v == o[0];
    case CompareOp::ne: return v != o[0];
    case CompareOp::le: return v <= o[0];
    case CompareOp::ge: return v >= o[0];
    case CompareOp::in_set: return std::find(o.begin(), o.end(), v) != o.end();
    case CompareOp::in_range: return o[0] <= v && v <= o[1];
  }
  return false;
}

/// Maps every event, drops hidden ones, then fuses adjacent same-type
/// events within the gap.
inline std::optional<std::vector<Ev>> high_sequence(const RawPatient& raw, const DatasetManifest& m,
                                                    const FilterSpec& spec) {
  for (const auto& p : spec.attributes) {
    if (!predicate_holds(p, raw.attributes.at(p.attr))) return std::nullopt;
  }
  std::vector<Ev> seq;
  for (const auto& e : raw.events) {
    if (hidden(m, spec.hidden_types, e.type)) continue;
    seq.push_back({ancestor_at(m, e.type, spec.abstraction_level), e.start, e.end});
  }
  // Fusing a pair never makes an earlier pair fusable, so one left-to-right
  // pass reaches the same fixpoint as repeated fusing.
  std::vector<Ev> fused;
  for (const auto& e : seq) {
    if (!fused.empty() && fused.back().type == e.type && e.start - fused.back().end <= m.gap_for(e.type)) {
      fused.back().end = std::max(fused.back().end, e.end);
    } else {
      fused.push_back(e);
    }
  }
  seq = std::move(fused);
  if (spec.alignment) {
    std::size_t k = 0;
    while (k < seq.size() && seq[k].type != spec.alignment->type) ++k;
    if (k == seq.size()) return std::nullopt;
    if (spec.alignment->direction == AlignDirection::after) {
      seq.erase(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      seq.resize(k + 1);
      std::reverse(seq.begin(), seq.end());
    }
  }
  if (spec.sequence_length && (seq.size() < spec.sequence_length->min || seq.size() > spec.sequence_length->max)) {
    return std::nullopt;
  }
  return seq;
}

inline std::size_t log2_bin(Duration d) {
  if (d <= 0) return 0;
  std::size_t bits = 0;
  for (auto u = static_cast<std::uint64_t>(d); u; u >>= 1) ++bits;
  return std::min<std::size_t>(bits, kDurationBins - 1);
}

inline std::size_t attr_bin(const AttributeSpec& a, AttrValue v) {
  if (a.kind == AttributeKind::categorical) {
    return static_cast<std::size_t>(std::clamp<AttrValue>(v, 0, static_cast<AttrValue>(a.categories.size()) - 1));
  }
  const AttrValue bins = (a.max - a.min) / a.bin_width + 1;
  AttrValue b = v < a.min ? 0 : (v - a.min) / a.bin_width;
  return static_cast<std::size_t>(std::min(b, bins - 1));
}

struct Node {
  std::uint64_t count = 0, terminal = 0;
  Duration sum = 0, mn = 0, mx = 0;
  __int128 sq = 0;
  std::map<std::size_t, std::uint64_t> hist;
  std::vector<std::map<std::size_t, std::uint64_t>> attrs;
  std::map<TypeId, std::unique_ptr<Node>> kids;
};

/// Prefix tree over std::map children, filled one sequence at a time.
class Tree {
 public:
  explicit Tree(const DatasetManifest& m) : m_(m) { root_.attrs.resize(m.attributes.size()); }

  void add(const std::vector<Ev>& seq, const std::vector<AttrValue>& attributes) {
    Node* cur = &root_;
    touch(*cur, attributes);
    for (const auto& e : seq) {
      auto& slot = cur->kids[e.type];
      if (!slot) {
        slot = std::make_unique<Node>();
        slot->attrs.resize(m_.attributes.size());
      }
      cur = slot.get();
      const Duration d = e.end - e.start;
      cur->mn = cur->count ? std::min(cur->mn, d) : d;
      cur->mx = cur->count ? std::max(cur->mx, d) : d;
      touch(*cur, attributes);
      cur->sum += d;
      cur->sq += static_cast<__int128>(d) * d;
      ++cur->hist[log2_bin(d)];
    }
    ++cur->terminal;
  }

  const Node& root() const { return root_; }

  std::size_t size() const { return count_nodes(root_); }

 private:
  void touch(Node& n, const std::vector<AttrValue>& attributes) {
    ++n.count;
    for (std::size_t a = 0; a < m_.attributes.size(); ++a) ++n.attrs[a][attr_bin(m_.attributes[a], attributes[a])];
  }
  static std::size_t count_nodes(const Node& n) {
    std::size_t c = 1;
    for (const auto& [t, k] : n.kids) c += count_nodes(*k);
    return c;
  }

  const DatasetManifest& m_;
  Node root_;
};

inline Tree build(const PatientSource& src, const DatasetManifest& m, const FilterSpec& spec = {}) {
  Tree t(m);
  RawPatient raw;
  for (std::size_t i = 0; i < src.size(); ++i) {
    src.fetch(i, raw);
    if (auto seq = high_sequence(raw, m, spec)) t.add(*seq, raw.attributes);
  }
  return t;
}

/// Empty string when `tree` equals the oracle node for node; otherwise the
/// first difference found.
inline std::string compare(const AggregateTree& tree, const Tree& expected) {
  const auto& m = tree.manifest();
  std::ostringstream why;
  struct Frame {
    NodeId id;
    const Node* node;
    std::string path;
  };
  std::vector<Frame> stack{{AggregateTree::root(), &expected.root(), "/"}};
  std::size_t visited = 0;
  while (!stack.empty()) {
    auto [id, node, path] = stack.back();
    stack.pop_back();
    ++visited;
    const auto& n = tree.node(id);
    if (n.count != node->count) why << path << " count " << n.count << " != " << node->count;
    else if (n.terminal != node->terminal) why << path << " terminal " << n.terminal << " != " << node->terminal;
    else if (id != AggregateTree::root() && n.dur_sum != node->sum) why << path << " dur_sum " << n.dur_sum << " != " << node->sum;
    else if (id != AggregateTree::root() && n.dur_sq_sum != node->sq) why << path << " dur_sq_sum differs";
    else if (id != AggregateTree::root() && (n.dur_min != node->mn || n.dur_max != node->mx)) why << path << " min/max differ";
    if (!why.str().empty()) return why.str();
    if (id != AggregateTree::root()) {
      const auto hist = tree.duration_histogram(id);
      for (std::size_t b = 0; b < hist.size(); ++b) {
        auto it = node->hist.find(b);
        if (hist[b] != (it == node->hist.end() ? 0 : it->second)) return path + " duration bin " + std::to_string(b) + " differs";
      }
    }
    for (std::size_t a = 0; a < m.attributes.size(); ++a) {
      const auto bins = tree.attribute_bins(id, a);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        auto it = node->attrs[a].find(b);
        if (bins[b] != (it == node->attrs[a].end() ? 0 : it->second)) {
          return path + " attribute " + m.attributes[a].name + " bin " + std::to_string(b) + " differs";
        }
      }
    }
    std::size_t children = 0;
    for (NodeId c = n.first_child; c != kNoNode; c = tree.node(c).next_sibling) {
      ++children;
      const TypeId t = tree.node(c).type;
      auto it = node->kids.find(t);
      if (it == node->kids.end()) return path + " has unexpected child " + std::to_string(t);
      stack.push_back({c, it->second.get(), path + std::to_string(t) + "/"});
    }
    if (children != node->kids.size()) return path + " is missing children";
  }
  if (visited != tree.node_count()) return "tree has unreachable nodes";
  return {};
}

// ---- random instances -------------------------------------------------

/// A manifest with `types` event types in a random forest hierarchy, one
/// integer and one categorical attribute, and random merge gaps.
inline DatasetManifest random_manifest(std::mt19937_64& rng, std::size_t types) {
  DatasetManifest m;
  m.name = "random";
  std::vector<EventType> entries;
  for (std::size_t i = 0; i < types; ++i) {
    EventType t;
    t.name = "t" + std::to_string(i);
    char color[8];
    std::snprintf(color, sizeof color, "#%06x", static_cast<unsigned>(rng() & 0xffffff));
    t.color = color;
    // Parents only point to lower ids, so the hierarchy is acyclic.
    if (i > 0 && rng() % 2) t.parent = static_cast<TypeId>(rng() % i);
    entries.push_back(std::move(t));
  }
  m.catalog = EventTypeCatalog(std::move(entries));
  AttributeSpec age;
  age.name = "age";
  age.min = 0;
  age.max = 99;
  age.bin_width = static_cast<AttrValue>(1 + rng() % 10);
  AttributeSpec site;
  site.name = "site";
  site.kind = AttributeKind::categorical;
  site.categories = {"north", "south", "east"};
  m.attributes = {age, site};
  for (std::size_t i = 0; i < types; ++i) m.merge_gap.push_back(static_cast<Duration>(rng() % 4 == 0 ? rng() % 6 : 0));
  return m;
}

/// Sticky random walks over the types so that prefix trees stay compact.
inline std::vector<RawPatient> random_patients(std::mt19937_64& rng, const DatasetManifest& m, std::size_t count,
                                               std::size_t max_events, double stay = 0.8) {
  std::vector<RawPatient> out(count);
  const auto types = static_cast<TypeId>(m.catalog.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    auto& p = out[i];
    p.id = static_cast<PatientId>(i + 1);
    p.attributes = {static_cast<AttrValue>(rng() % 110) - 5, static_cast<AttrValue>(rng() % 3)};
    const std::size_t n = rng() % (max_events + 1);
    TypeId t = static_cast<TypeId>(rng() % std::min<TypeId>(types, 3));
    Time clock = static_cast<Time>(rng() % 5);
    for (std::size_t k = 0; k < n; ++k) {
      if (unit(rng) > stay) t = static_cast<TypeId>(rng() % types);
      const Time len = static_cast<Time>(rng() % 3 == 0 ? rng() % 2000 : rng() % 8);
      p.events.push_back({t, clock, clock + len});
      clock += len + static_cast<Time>(rng() % 7);
    }
  }
  return out;
}

/// A spec valid for `m`; every part is optional and drawn at random.
inline FilterSpec random_filter(std::mt19937_64& rng, const DatasetManifest& m) {
  FilterSpec spec;
  const auto types = static_cast<TypeId>(m.catalog.size());
  if (rng() % 2) {
    AttributePredicate p;
    p.attr = 0;
    switch (rng() % 4) {
      case 0: p.op = CompareOp::ge; p.operands = {static_cast<AttrValue>(rng() % 100)}; break;
      case 1: p.op = CompareOp::le; p.operands = {static_cast<AttrValue>(rng() % 100)}; break;
      case 2: {
        p.op = CompareOp::in_range;
        AttrValue a = static_cast<AttrValue>(rng() % 100), b = static_cast<AttrValue>(rng() % 100);
        p.operands = {std::min(a, b), std::max(a, b)};
        break;
      }
      default: p.op = CompareOp::ne; p.operands = {static_cast<AttrValue>(rng() % 100)}; break;
    }
    spec.attributes.push_back(p);
  }
  if (rng() % 3 == 0) {
    AttributePredicate p;
    p.attr = 1;
    p.op = rng() % 2 ? CompareOp::eq : CompareOp::in_set;
    p.operands = {static_cast<AttrValue>(rng() % 3)};
    if (p.op == CompareOp::in_set) p.operands.push_back(static_cast<AttrValue>(rng() % 3));
    spec.attributes.push_back(p);
  }
  if (rng() % 3 == 0) {
    const std::size_t lo = rng() % 4;
    spec.sequence_length = LengthBound{lo, lo + rng() % 8};
  }
  if (rng() % 2) {
    const std::size_t k = 1 + rng() % 2;
    for (std::size_t i = 0; i < k; ++i) {
      const TypeId t = static_cast<TypeId>(rng() % types);
      if (std::find(spec.hidden_types.begin(), spec.hidden_types.end(), t) == spec.hidden_types.end()) {
        spec.hidden_types.push_back(t);
      }
    }
  }
  spec.abstraction_level = static_cast<unsigned>(rng() % 3);
  if (rng() % 3 == 0) {
    spec.alignment = Alignment{static_cast<TypeId>(rng() % types), rng() % 2 ? AlignDirection::after : AlignDirection::before};
  }
  return spec;
}

}  // namespace oracle
