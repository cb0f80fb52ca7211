#include "pathflow/filter_json.hpp"

#include <algorithm>

#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

namespace {

TypeId type_from_json(const json& value, const DatasetManifest& manifest) {
  if (value.is_number_unsigned()) return value.get<TypeId>();
  if (value.is_string()) {
    auto id = manifest.catalog.find(value.get<std::string>());
    if (!id) throw QueryError("unknown event type '" + value.get<std::string>() + "'");
    return *id;
  }
  throw QueryError("event type must be a name or a non-negative id");
}

json type_to_json(TypeId type, const DatasetManifest& manifest) {
  if (manifest.catalog.contains(type)) return manifest.catalog.name(type);
  return type;
}

AttrValue operand_from_json(const json& value, const AttributeSpec* attr) {
  if (value.is_number_integer()) return value.get<AttrValue>();
  if (value.is_string() && attr && attr->kind == AttributeKind::categorical) {
    auto index = attr->category_index(value.get<std::string>());
    if (!index) throw QueryError("unknown category '" + value.get<std::string>() + "' for " + attr->name);
    return *index;
  }
  throw QueryError("attribute operands must be integers or category labels");
}

json operand_to_json(AttrValue value, const AttributeSpec* attr) {
  if (attr && attr->kind == AttributeKind::categorical && value >= 0 &&
      static_cast<std::size_t>(value) < attr->categories.size()) {
    return attr->categories[static_cast<std::size_t>(value)];
  }
  return value;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw QueryError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

json filter_to_json(const FilterSpec& spec, const DatasetManifest& manifest) {
  json doc = json::object();
  if (!spec.attributes.empty()) {
    json preds = json::array();
    for (const auto& pred : spec.attributes) {
      const AttributeSpec* attr = pred.attr < manifest.attributes.size() ? &manifest.attributes[pred.attr] : nullptr;
      json entry;
      entry["attr"] = attr ? json(attr->name) : json(pred.attr);
      entry["op"] = std::string(to_string(pred.op));
      if (pred.op == CompareOp::in_set || pred.op == CompareOp::in_range) {
        json values = json::array();
        for (AttrValue v : pred.operands) values.push_back(operand_to_json(v, attr));
        entry["values"] = std::move(values);
      } else {
        entry["value"] = pred.operands.empty() ? json(nullptr) : operand_to_json(pred.operands[0], attr);
      }
      preds.push_back(std::move(entry));
    }
    doc["attributes"] = std::move(preds);
  }
  if (spec.sequence_length) {
    doc["sequence_length"] = {{"min", spec.sequence_length->min}, {"max", spec.sequence_length->max}};
  }
  if (!spec.hidden_types.empty()) {
    json hidden = json::array();
    for (TypeId t : spec.hidden_types) hidden.push_back(type_to_json(t, manifest));
    doc["hidden_types"] = std::move(hidden);
  }
  if (spec.abstraction_level != 0) doc["abstraction_level"] = spec.abstraction_level;
  if (spec.alignment) {
    doc["alignment"] = {{"type", type_to_json(spec.alignment->type, manifest)},
                        {"direction", spec.alignment->direction == AlignDirection::after ? "after" : "before"}};
  }
  return doc;
}

FilterSpec filter_from_json(const json& doc, const DatasetManifest& manifest) {
  if (doc.is_null()) return {};
  if (!doc.is_object()) throw QueryError("filter must be a JSON object");
  reject_unknown_keys(doc, {"attributes", "sequence_length", "hidden_types", "abstraction_level", "alignment"},
                      "filter");
  FilterSpec spec;
  try {
    if (auto it = doc.find("attributes"); it != doc.end()) {
      if (!it->is_array()) throw QueryError("attributes must be an array");
      for (const auto& entry : *it) {
        reject_unknown_keys(entry, {"attr", "op", "value", "values"}, "attribute predicate");
        AttributePredicate pred;
        const auto& attr_ref = entry.at("attr");
        if (attr_ref.is_string()) {
          auto id = manifest.find_attribute(attr_ref.get<std::string>());
          if (!id) throw QueryError("unknown attribute '" + attr_ref.get<std::string>() + "'");
          pred.attr = *id;
        } else {
          pred.attr = attr_ref.get<std::size_t>();
        }
        const AttributeSpec* attr = pred.attr < manifest.attributes.size() ? &manifest.attributes[pred.attr] : nullptr;
        const auto op_text = entry.at("op").get<std::string>();
        auto op = parse_compare_op(op_text);
        if (!op) throw QueryError("unknown operator '" + op_text + "'");
        pred.op = *op;
        if (auto v = entry.find("value"); v != entry.end()) pred.operands.push_back(operand_from_json(*v, attr));
        if (auto vs = entry.find("values"); vs != entry.end()) {
          for (const auto& v : *vs) pred.operands.push_back(operand_from_json(v, attr));
        }
        spec.attributes.push_back(std::move(pred));
      }
    }
    if (auto it = doc.find("sequence_length"); it != doc.end() && !it->is_null()) {
      reject_unknown_keys(*it, {"min", "max"}, "sequence_length");
      LengthBound bound;
      bound.min = it->value("min", std::size_t{0});
      bound.max = it->value("max", std::numeric_limits<std::size_t>::max());
      spec.sequence_length = bound;
    }
    if (auto it = doc.find("hidden_types"); it != doc.end()) {
      for (const auto& t : *it) spec.hidden_types.push_back(type_from_json(t, manifest));
    }
    if (auto it = doc.find("abstraction_level"); it != doc.end()) {
      spec.abstraction_level = it->get<unsigned>();
    }
    if (auto it = doc.find("alignment"); it != doc.end() && !it->is_null()) {
      reject_unknown_keys(*it, {"type", "direction"}, "alignment");
      Alignment alignment;
      alignment.type = type_from_json(it->at("type"), manifest);
      const auto direction = it->value("direction", std::string{"after"});
      if (direction == "after") {
        alignment.direction = AlignDirection::after;
      } else if (direction == "before") {
        alignment.direction = AlignDirection::before;
      } else {
        throw QueryError("alignment direction must be 'after' or 'before'");
      }
      spec.alignment = alignment;
    }
  } catch (const json::exception& e) {
    throw QueryError(std::string("malformed filter: ") + e.what());
  }
  return spec;
}

}  // namespace pathflow
