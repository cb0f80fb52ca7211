#include "pathflow/catalog.hpp"

#include <algorithm>

#include "pathflow/errors.hpp"

namespace pathflow {

EventTypeCatalog::EventTypeCatalog(std::vector<EventType> entries) : entries_(std::move(entries)) {
  by_name_.reserve(entries_.size());
  for (TypeId id = 0; id < entries_.size(); ++id) {
    by_name_.emplace(entries_[id].name, id);  // first wins on duplicates
  }
}

const EventType& EventTypeCatalog::at(TypeId id) const {
  if (id >= entries_.size()) {
    throw CatalogError("unknown event type id " + std::to_string(id));
  }
  return entries_[id];
}

std::optional<TypeId> EventTypeCatalog::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

TypeId EventTypeCatalog::resolve_supertype(TypeId id, unsigned level) const {
  at(id);
  // Bounded by the catalog size so a cyclic (invalid) catalog cannot hang.
  const std::size_t limit = std::min<std::size_t>(level, entries_.size());
  for (std::size_t step = 0; step < limit; ++step) {
    const auto& parent = entries_[id].parent;
    if (!parent || !contains(*parent)) break;
    id = *parent;
  }
  return id;
}

bool EventTypeCatalog::is_ancestor_or_self(TypeId ancestor, TypeId id) const {
  for (std::size_t step = 0; step <= entries_.size() && contains(id); ++step) {
    if (id == ancestor) return true;
    const auto& parent = entries_[id].parent;
    if (!parent) return false;
    id = *parent;
  }
  return false;
}

unsigned EventTypeCatalog::depth() const {
  unsigned best = 0;
  for (TypeId id = 0; id < entries_.size(); ++id) {
    unsigned links = 0;
    TypeId cur = id;
    while (links <= entries_.size()) {
      const auto& parent = entries_[cur].parent;
      if (!parent || !contains(*parent)) break;
      cur = *parent;
      ++links;
    }
    best = std::max(best, links);
  }
  return best;
}

}  // namespace pathflow
