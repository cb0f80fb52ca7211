#include "pathflow/dataset.hpp"

#include "pathflow/errors.hpp"

namespace pathflow {

void EventTable::reserve(std::size_t patients, std::size_t events) {
  ids_.reserve(patients);
  attributes_.reserve(patients * attribute_count_);
  offsets_.reserve(patients + 1);
  types_.reserve(events);
  starts_.reserve(events);
  ends_.reserve(events);
}

void EventTable::push_back(const RawPatient& patient) {
  if (patient.attributes.size() != attribute_count_) {
    throw ManifestError("patient " + std::to_string(patient.id) + " has " +
                        std::to_string(patient.attributes.size()) + " attributes, expected " +
                        std::to_string(attribute_count_));
  }
  ids_.push_back(patient.id);
  attributes_.insert(attributes_.end(), patient.attributes.begin(), patient.attributes.end());
  for (const auto& e : patient.events) {
    types_.push_back(e.type);
    starts_.push_back(e.start);
    ends_.push_back(e.end);
  }
  offsets_.push_back(types_.size());
}

void EventTable::append(const EventTable& other) {
  if (other.attribute_count_ != attribute_count_) throw ManifestError("attribute count mismatch");
  const std::uint64_t base = types_.size();
  ids_.insert(ids_.end(), other.ids_.begin(), other.ids_.end());
  attributes_.insert(attributes_.end(), other.attributes_.begin(), other.attributes_.end());
  for (std::size_t i = 1; i < other.offsets_.size(); ++i) offsets_.push_back(base + other.offsets_[i]);
  types_.insert(types_.end(), other.types_.begin(), other.types_.end());
  starts_.insert(starts_.end(), other.starts_.begin(), other.starts_.end());
  ends_.insert(ends_.end(), other.ends_.begin(), other.ends_.end());
  parse_errors_ += other.parse_errors_;
}

void EventTable::fetch(std::size_t index, RawPatient& out) const {
  out.id = ids_[index];
  const auto* attrs = attributes_.data() + index * attribute_count_;
  out.attributes.assign(attrs, attrs + attribute_count_);
  const auto begin = offsets_[index];
  const auto end = offsets_[index + 1];
  out.events.resize(end - begin);
  for (std::uint64_t i = begin; i < end; ++i) {
    out.events[i - begin] = LowEvent{types_[i], starts_[i], ends_[i]};
  }
}

}  // namespace pathflow
