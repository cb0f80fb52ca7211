#include "pathflow/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace pathflow {

std::string_view to_string(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::seconds: return "seconds";
    case TimeUnit::minutes: return "minutes";
    case TimeUnit::days: return "days";
  }
  return "days";
}

std::optional<TimeUnit> parse_time_unit(std::string_view text) {
  if (text == "seconds") return TimeUnit::seconds;
  if (text == "minutes") return TimeUnit::minutes;
  if (text == "days") return TimeUnit::days;
  return std::nullopt;
}

std::size_t AttributeSpec::bin_count() const {
  if (kind == AttributeKind::categorical) return categories.size();
  if (max < min || bin_width <= 0) return 1;
  return static_cast<std::size_t>((max - min) / bin_width + 1);
}

std::size_t AttributeSpec::bin_of(AttrValue value) const {
  const std::size_t bins = bin_count();
  if (bins == 0) return 0;
  if (kind == AttributeKind::categorical) {
    if (value < 0) return 0;
    return std::min<std::size_t>(static_cast<std::size_t>(value), bins - 1);
  }
  if (value <= min || bin_width <= 0) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>((value - min) / bin_width), bins - 1);
}

AttrValue AttributeSpec::bin_lower(std::size_t bin) const {
  if (kind == AttributeKind::categorical) return static_cast<AttrValue>(bin);
  return min + static_cast<AttrValue>(bin) * bin_width;
}

AttrValue AttributeSpec::bin_upper(std::size_t bin) const {
  if (kind == AttributeKind::categorical) return static_cast<AttrValue>(bin) + 1;
  return bin_lower(bin) + bin_width;
}

std::optional<AttrValue> AttributeSpec::category_index(std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == label) return static_cast<AttrValue>(i);
  }
  return std::nullopt;
}

std::optional<std::size_t> DatasetManifest::find_attribute(std::string_view attr_name) const {
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (attributes[i].name == attr_name) return i;
  }
  return std::nullopt;
}

std::size_t DatasetManifest::sketch_width() const {
  std::size_t width = 0;
  for (const auto& attr : attributes) width += attr.bin_count();
  return width;
}

std::size_t DatasetManifest::sketch_offset(std::size_t attr) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < attr && i < attributes.size(); ++i) offset += attributes[i].bin_count();
  return offset;
}

namespace {

bool is_hex_color(std::string_view color) {
  if (color.size() != 7 || color[0] != '#') return false;
  return std::all_of(color.begin() + 1, color.end(),
                     [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; });
}

void check_catalog(const EventTypeCatalog& catalog, std::vector<Violation>& out) {
  const auto entries = catalog.entries();
  std::set<std::string> seen;
  for (TypeId id = 0; id < entries.size(); ++id) {
    const auto& type = entries[id];
    const std::string label = type.name.empty() ? "#" + std::to_string(id) : type.name;
    if (type.name.empty()) out.push_back({"empty-name", label, "event type has no name"});
    if (!seen.insert(type.name).second) {
      out.push_back({"duplicate-type", label, "event type name declared twice"});
    }
    if (!is_hex_color(type.color)) {
      out.push_back({"bad-color", label, "color must be #rrggbb, got '" + type.color + "'"});
    }
    if (type.parent && !catalog.contains(*type.parent)) {
      out.push_back({"unknown-parent", label, "parent does not name a declared type"});
    }
  }

  // Each cycle is reported once, naming its members in walk order.
  std::vector<int> state(entries.size(), 0);  // 0 new, 1 on current walk, 2 done
  for (TypeId start = 0; start < entries.size(); ++start) {
    if (state[start] != 0) continue;
    std::vector<TypeId> walk;
    TypeId cur = start;
    while (true) {
      if (state[cur] == 2) break;
      if (state[cur] == 1) {
        auto first = std::find(walk.begin(), walk.end(), cur);
        std::string members;
        for (auto it = first; it != walk.end(); ++it) {
          if (!members.empty()) members += ",";
          members += entries[*it].name;
        }
        out.push_back({"cycle", members, "parent links form a cycle: " + members});
        break;
      }
      state[cur] = 1;
      walk.push_back(cur);
      const auto& parent = entries[cur].parent;
      if (!parent || !catalog.contains(*parent)) break;
      cur = *parent;
    }
    for (TypeId id : walk) state[id] = 2;
  }
}

void check_attributes(const std::vector<AttributeSpec>& attributes, std::vector<Violation>& out) {
  std::set<std::string> seen;
  for (const auto& attr : attributes) {
    if (attr.name.empty()) out.push_back({"empty-name", "attribute", "attribute has no name"});
    if (!seen.insert(attr.name).second) {
      out.push_back({"duplicate-attribute", attr.name, "attribute declared twice"});
    }
    if (attr.kind == AttributeKind::categorical) {
      if (attr.categories.empty()) {
        out.push_back({"no-categories", attr.name, "categorical attribute declares no categories"});
      }
      std::set<std::string> labels(attr.categories.begin(), attr.categories.end());
      if (labels.size() != attr.categories.size()) {
        out.push_back({"duplicate-category", attr.name, "category label declared twice"});
      }
    } else {
      if (attr.max < attr.min) out.push_back({"bad-range", attr.name, "max is below min"});
      if (attr.bin_width <= 0) out.push_back({"bad-bin-width", attr.name, "bin_width must be positive"});
    }
  }
}

}  // namespace

std::vector<Violation> validate_manifest(const DatasetManifest& manifest) {
  std::vector<Violation> out;
  check_catalog(manifest.catalog, out);
  check_attributes(manifest.attributes, out);

  const auto entries = manifest.catalog.entries();
  for (TypeId id = 0; id < entries.size(); ++id) {
    const bool present = id < manifest.merge_gap.size() && manifest.merge_gap[id].has_value();
    if (!present) {
      out.push_back({"missing-gap", entries[id].name, "no merge_gap for this event type"});
    } else if (*manifest.merge_gap[id] < 0) {
      out.push_back({"negative-gap", entries[id].name, "merge_gap must be non-negative"});
    }
  }
  if (manifest.merge_gap.size() > entries.size()) {
    out.push_back({"extra-gap", "merge_gap", "merge_gap has entries for undeclared types"});
  }
  return out;
}

}  // namespace pathflow
