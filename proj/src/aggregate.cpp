#include "pathflow/aggregate.hpp"

namespace pathflow {

TypeMapping::TypeMapping(const DatasetManifest& manifest, unsigned abstraction_level,
                         std::span<const TypeId> hidden) {
  const auto& catalog = manifest.catalog;
  map_.resize(catalog.size());
  gaps_.resize(catalog.size());
  for (TypeId id = 0; id < catalog.size(); ++id) {
    gaps_[id] = manifest.gap_for(id);
    bool is_hidden = false;
    for (TypeId h : hidden) {
      if (catalog.is_ancestor_or_self(h, id)) {
        is_hidden = true;
        break;
      }
    }
    map_[id] = is_hidden ? kNoType : catalog.resolve_supertype(id, abstraction_level);
  }
}

void aggregate_into(const RawPatient& raw, const TypeMapping& mapping, PatientSequence& out) {
  out.id = raw.id;
  out.attributes = raw.attributes;
  out.events.clear();
  for (const auto& low : raw.events) {
    const TypeId type = mapping.map(low.type);
    if (type == kNoType) continue;
    append_merging(out.events, HighEvent{type, low.start, low.end}, mapping.gap(type));
  }
}

PatientSequence aggregate_events(const RawPatient& raw, const DatasetManifest& manifest, unsigned abstraction_level) {
  for (const auto& e : raw.events) manifest.catalog.at(e.type);
  PatientSequence out;
  aggregate_into(raw, TypeMapping(manifest, abstraction_level), out);
  return out;
}

}  // namespace pathflow
