#include "pathflow/manifest_json.hpp"

#include <fstream>

#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ManifestError(where + ": missing field '" + key + "'");
  return *it;
}

AttributeSpec attribute_from_json(const json& doc) {
  if (!doc.is_object()) throw ManifestError("attributes: each entry must be an object");
  AttributeSpec attr;
  attr.name = require(doc, "name", "attribute").get<std::string>();
  const auto kind = require(doc, "kind", "attribute " + attr.name).get<std::string>();
  if (kind == "integer") {
    attr.kind = AttributeKind::integer;
    attr.min = doc.value("min", AttrValue{0});
    attr.max = doc.value("max", AttrValue{127});
    attr.bin_width = doc.value("bin_width", AttrValue{1});
  } else if (kind == "categorical") {
    attr.kind = AttributeKind::categorical;
    attr.categories = require(doc, "categories", "attribute " + attr.name).get<std::vector<std::string>>();
  } else {
    throw ManifestError("attribute " + attr.name + ": unknown kind '" + kind + "'");
  }
  return attr;
}

}  // namespace

DatasetManifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) throw ManifestError("manifest must be a JSON object");
  DatasetManifest manifest;
  try {
    manifest.name = doc.value("name", std::string{});
    const auto unit_text = doc.value("time_unit", std::string{"days"});
    const auto unit = parse_time_unit(unit_text);
    if (!unit) throw ManifestError("unknown time_unit '" + unit_text + "'");
    manifest.time_unit = *unit;

    if (auto it = doc.find("attributes"); it != doc.end()) {
      for (const auto& entry : *it) manifest.attributes.push_back(attribute_from_json(entry));
    }

    const auto& types = require(doc, "types", "manifest");
    if (!types.is_array()) throw ManifestError("types must be an array");

    // Names first so parents may reference later entries.
    std::vector<std::string> names;
    for (const auto& entry : types) names.push_back(require(entry, "name", "type").get<std::string>());
    auto index_of = [&](const std::string& name) -> std::optional<TypeId> {
      for (TypeId id = 0; id < names.size(); ++id) {
        if (names[id] == name) return id;
      }
      return std::nullopt;
    };

    std::vector<EventType> entries;
    for (TypeId id = 0; id < types.size(); ++id) {
      const auto& entry = types[id];
      EventType type;
      type.name = names[id];
      type.color = entry.value("color", std::string{});
      if (auto parent = entry.find("parent"); parent != entry.end() && !parent->is_null()) {
        if (parent->is_number_unsigned()) {
          type.parent = parent->get<TypeId>();
        } else {
          // An unresolved name becomes an out-of-range id; validation names it.
          type.parent = index_of(parent->get<std::string>()).value_or(kNoType - 1);
        }
      }
      entries.push_back(std::move(type));
    }
    manifest.catalog = EventTypeCatalog(std::move(entries));

    auto gaps = doc.find("merge_gap");
    if (gaps == doc.end() || gaps->is_null()) {
      manifest.merge_gap.assign(names.size(), Duration{0});
    } else {
      if (!gaps->is_object()) throw ManifestError("merge_gap must be an object keyed by type name");
      std::optional<Duration> fallback;
      if (auto star = gaps->find("*"); star != gaps->end()) fallback = star->get<Duration>();
      manifest.merge_gap.assign(names.size(), fallback);
      for (const auto& [key, value] : gaps->items()) {
        if (key == "*") continue;
        auto id = index_of(key);
        if (!id) throw ManifestError("merge_gap names undeclared type '" + key + "'");
        manifest.merge_gap[*id] = value.get<Duration>();
      }
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  return manifest;
}

json manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["name"] = manifest.name;
  doc["time_unit"] = std::string(to_string(manifest.time_unit));
  json attributes = json::array();
  for (const auto& attr : manifest.attributes) {
    json entry{{"name", attr.name}};
    if (attr.kind == AttributeKind::categorical) {
      entry["kind"] = "categorical";
      entry["categories"] = attr.categories;
    } else {
      entry["kind"] = "integer";
      entry["min"] = attr.min;
      entry["max"] = attr.max;
      entry["bin_width"] = attr.bin_width;
    }
    attributes.push_back(std::move(entry));
  }
  doc["attributes"] = std::move(attributes);

  json types = json::array();
  const auto entries = manifest.catalog.entries();
  for (const auto& type : entries) {
    json entry{{"name", type.name}, {"color", type.color}};
    if (type.parent) {
      if (manifest.catalog.contains(*type.parent)) {
        entry["parent"] = entries[*type.parent].name;
      } else {
        entry["parent"] = *type.parent;
      }
    }
    types.push_back(std::move(entry));
  }
  doc["types"] = std::move(types);

  json gaps = json::object();
  for (TypeId id = 0; id < entries.size() && id < manifest.merge_gap.size(); ++id) {
    if (manifest.merge_gap[id]) gaps[entries[id].name] = *manifest.merge_gap[id];
  }
  doc["merge_gap"] = std::move(gaps);
  return doc;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path));
}

DatasetManifest load_valid_manifest(const std::filesystem::path& path) {
  auto manifest = load_manifest(path);
  const auto violations = validate_manifest(manifest);
  if (!violations.empty()) {
    std::string message = path.string() + ": invalid manifest";
    for (const auto& v : violations) message += "\n  " + v.code + " [" + v.subject + "]: " + v.message;
    throw ManifestError(message);
  }
  return manifest;
}

json violations_to_json(const std::vector<Violation>& violations) {
  json out = json::array();
  for (const auto& v : violations) {
    out.push_back({{"code", v.code}, {"subject", v.subject}, {"message", v.message}});
  }
  return out;
}

}  // namespace pathflow
