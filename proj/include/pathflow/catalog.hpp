#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pathflow {

/// Dense event type identifier, 0..N-1 within one catalog.
using TypeId = std::uint32_t;
inline constexpr TypeId kNoType = 0xFFFFFFFFu;

struct EventType {
  std::string name;
  std::string color;  // "#rrggbb"
  std::optional<TypeId> parent;

  friend bool operator==(const EventType&, const EventType&) = default;
};

/// Event-type vocabulary with an optional super-type hierarchy.
///
/// The catalog stores entries as given; structural problems (cycles,
/// dangling parents, duplicate names) are reported by validate_manifest()
/// rather than rejected here, so a broken document can still be inspected.
class EventTypeCatalog {
 public:
  EventTypeCatalog() = default;
  explicit EventTypeCatalog(std::vector<EventType> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(TypeId id) const noexcept { return id < entries_.size(); }
  std::span<const EventType> entries() const noexcept { return entries_; }

  /// Throws CatalogError for an unknown id.
  const EventType& at(TypeId id) const;
  const std::string& name(TypeId id) const { return at(id).name; }
  std::optional<TypeId> find(std::string_view name) const;

  /// Follows `level` parent links from `id`, stopping early at a root.
  TypeId resolve_supertype(TypeId id, unsigned level) const;

  /// True when `ancestor` is `id` or one of its ancestors.
  bool is_ancestor_or_self(TypeId ancestor, TypeId id) const;

  /// Longest parent chain (number of links) over all types.
  unsigned depth() const;

  friend bool operator==(const EventTypeCatalog& a, const EventTypeCatalog& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<EventType> entries_;
  std::unordered_map<std::string, TypeId> by_name_;
};

/// Free-function form of EventTypeCatalog::resolve_supertype.
inline TypeId resolve_supertype(const EventTypeCatalog& catalog, TypeId id, unsigned level) {
  return catalog.resolve_supertype(id, level);
}

}  // namespace pathflow
