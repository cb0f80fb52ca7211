#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "pathflow/aggregate.hpp"

namespace pathflow {

enum class CompareOp { eq, ne, le, ge, in_set, in_range };

std::string_view to_string(CompareOp op);
std::optional<CompareOp> parse_compare_op(std::string_view text);

struct AttributePredicate {
  std::size_t attr = 0;
  CompareOp op = CompareOp::eq;
  /// One value for eq/ne/le/ge; the members for in_set; [lo, hi] (inclusive) for in_range.
  std::vector<AttrValue> operands;

  bool test(AttrValue value) const noexcept;
  friend bool operator==(const AttributePredicate&, const AttributePredicate&) = default;
};

enum class AlignDirection { after, before };

struct Alignment {
  TypeId type = 0;
  AlignDirection direction = AlignDirection::after;
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

struct LengthBound {
  std::size_t min = 0;
  std::size_t max = 0;
  friend bool operator==(const LengthBound&, const LengthBound&) = default;
};

/// Conjunctive patient/sequence/event predicates plus view configuration.
/// The default value admits every sequence unchanged.
struct FilterSpec {
  std::vector<AttributePredicate> attributes;
  /// Bounds on the number of high-level events after hiding and alignment.
  std::optional<LengthBound> sequence_length;
  std::vector<TypeId> hidden_types;
  unsigned abstraction_level = 0;
  std::optional<Alignment> alignment;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

std::vector<Violation> validate_filter(const FilterSpec& spec, const DatasetManifest& manifest);

/// Runs a FilterSpec over an already aggregated sequence: attribute
/// predicates, removal of hidden types (an event is hidden when its type or
/// one of its ancestors is listed) with re-merging of newly adjacent
/// same-type neighbours, alignment on the first occurrence of the alignment
/// type, then the length bound. Throws QueryError for an invalid spec.
///
/// For direction=before the kept prefix is returned in reverse order so the
/// alignment event comes first.
std::optional<PatientSequence> admit(const PatientSequence& seq, const FilterSpec& spec,
                                     const DatasetManifest& manifest);

/// Applies alignment truncation and the length bound in place; false when
/// the sequence is rejected.
bool align_and_bound(std::vector<HighEvent>& events, const FilterSpec& spec);

/// The per-patient work of an engine worker: raw events -> admitted
/// high-level sequence. Hidden types are dropped at the low level, before
/// merging, so hiding a type below the abstraction level still removes it.
class PatientPipeline {
 public:
  /// Throws QueryError when `spec` does not validate against `manifest`.
  PatientPipeline(const DatasetManifest& manifest, const FilterSpec& spec);

  bool passes_attributes(std::span<const AttrValue> attributes) const noexcept;
  bool run(const RawPatient& raw, PatientSequence& out) const;
  const FilterSpec& spec() const noexcept { return spec_; }

 private:
  FilterSpec spec_;
  TypeMapping mapping_;
};

}  // namespace pathflow
