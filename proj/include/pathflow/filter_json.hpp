#pragma once

#include <json.hpp>

#include "pathflow/filter.hpp"

namespace pathflow {

/// Canonical wire form. Attributes and types are written by name and
/// categorical operands by label; absent keys mean "no constraint".
nlohmann::json filter_to_json(const FilterSpec& spec, const DatasetManifest& manifest);

/// Accepts names or numeric ids for attributes, types and categories.
/// Unknown keys, names or operators throw QueryError. The result is not
/// validated; call validate_filter() for the violation list.
FilterSpec filter_from_json(const nlohmann::json& doc, const DatasetManifest& manifest);

}  // namespace pathflow
