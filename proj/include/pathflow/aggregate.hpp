#pragma once

#include <span>
#include <vector>

#include "pathflow/dataset.hpp"

namespace pathflow {

struct HighEvent {
  TypeId type = 0;
  Time start = 0;
  Time end = 0;

  Duration duration() const noexcept { return end - start; }
  friend bool operator==(const HighEvent&, const HighEvent&) = default;
};

/// A patient's high-level events after consecutive-merge aggregation.
struct PatientSequence {
  PatientId id = 0;
  std::vector<AttrValue> attributes;
  std::vector<HighEvent> events;

  friend bool operator==(const PatientSequence&, const PatientSequence&) = default;
};

/// Low-level type -> aggregated type lookup for one abstraction level,
/// with hidden types mapped to kNoType, plus the merge gap of each
/// aggregated type. Built once per run; read concurrently by workers.
class TypeMapping {
 public:
  TypeMapping(const DatasetManifest& manifest, unsigned abstraction_level, std::span<const TypeId> hidden = {});

  TypeId map(TypeId low) const noexcept { return low < map_.size() ? map_[low] : kNoType; }
  Duration gap(TypeId type) const noexcept { return type < gaps_.size() ? gaps_[type] : 0; }

 private:
  std::vector<TypeId> map_;
  std::vector<Duration> gaps_;
};

/// Appends `event` to `events`, folding it into the last event when both
/// share a type and the gap since the last event's end is within `gap`.
inline void append_merging(std::vector<HighEvent>& events, const HighEvent& event, Duration gap) {
  if (!events.empty()) {
    HighEvent& last = events.back();
    if (last.type == event.type && event.start - last.end <= gap) {
      if (event.end > last.end) last.end = event.end;
      return;
    }
  }
  events.push_back(event);
}

/// Maps each low event through the abstraction level, drops hidden types,
/// and merges maximal same-type runs whose gaps fit the type's merge_gap.
/// `out.events` is overwritten; its capacity is reused.
void aggregate_into(const RawPatient& raw, const TypeMapping& mapping, PatientSequence& out);

PatientSequence aggregate_events(const RawPatient& raw, const DatasetManifest& manifest, unsigned abstraction_level);

}  // namespace pathflow
