#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathflow/catalog.hpp"

namespace pathflow {

/// Timestamps and durations are integers in the manifest's time unit.
using Time = std::int64_t;
using Duration = std::int64_t;
using PatientId = std::int64_t;
/// Categorical attributes hold the category index; integer attributes the raw value.
using AttrValue = std::int64_t;

enum class TimeUnit { seconds, minutes, days };

std::string_view to_string(TimeUnit unit);
std::optional<TimeUnit> parse_time_unit(std::string_view text);

enum class AttributeKind { integer, categorical };

/// One patient attribute. Integer attributes are sketched into fixed-width
/// bins over [min, max]; values outside the range land in the edge bins.
struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::integer;
  std::vector<std::string> categories;
  AttrValue min = 0;
  AttrValue max = 127;
  AttrValue bin_width = 1;

  std::size_t bin_count() const;
  std::size_t bin_of(AttrValue value) const;
  AttrValue bin_lower(std::size_t bin) const;
  /// Exclusive upper bound of `bin`.
  AttrValue bin_upper(std::size_t bin) const;
  std::optional<AttrValue> category_index(std::string_view label) const;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

struct DatasetManifest {
  std::string name;
  TimeUnit time_unit = TimeUnit::days;
  std::vector<AttributeSpec> attributes;
  EventTypeCatalog catalog;
  /// Indexed by TypeId. An empty optional is a missing entry (a violation).
  std::vector<std::optional<Duration>> merge_gap;

  Duration gap_for(TypeId type) const {
    return type < merge_gap.size() && merge_gap[type] ? *merge_gap[type] : 0;
  }
  std::optional<std::size_t> find_attribute(std::string_view name) const;

  /// Total number of attribute bins; the width of one node's attribute sketch.
  std::size_t sketch_width() const;
  /// Offset of attribute `attr` inside a node's attribute sketch.
  std::size_t sketch_offset(std::size_t attr) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Violation {
  std::string code;     // e.g. "cycle", "missing-gap", "bad-color"
  std::string subject;  // offending entry
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff every catalog and manifest invariant holds.
std::vector<Violation> validate_manifest(const DatasetManifest& manifest);

}  // namespace pathflow
