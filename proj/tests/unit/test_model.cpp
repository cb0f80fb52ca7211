#include <doctest.h>

#include <algorithm>
#include <random>

#include "../support/oracle.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/manifest_json.hpp"

using namespace pathflow;
using nlohmann::json;

namespace {

EventTypeCatalog chain_catalog() {
  // drug <- hormone <- treatment, plus a standalone "visit".
  return EventTypeCatalog({{"treatment", "#000000", std::nullopt},
                           {"hormone", "#111111", 0},
                           {"drug", "#222222", 1},
                           {"visit", "#333333", std::nullopt}});
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

json base_manifest() {
  return json::parse(R"({
    "name": "m", "time_unit": "days",
    "attributes": [{"name": "age", "kind": "integer", "min": 0, "max": 99, "bin_width": 10},
                   {"name": "sex", "kind": "categorical", "categories": ["f", "m"]}],
    "types": [{"name": "a", "color": "#102030"}, {"name": "b", "color": "#abcdef", "parent": "a"}],
    "merge_gap": {"a": 3, "b": 0}
  })");
}

}  // namespace

TEST_SUITE("core-model") {
  TEST_CASE("resolve_supertype follows parent links and stops at roots") {
    const auto c = chain_catalog();
    CHECK(c.resolve_supertype(2, 0) == 2);
    CHECK(c.resolve_supertype(2, 1) == 1);
    CHECK(c.resolve_supertype(2, 2) == 0);
    CHECK(c.resolve_supertype(2, 9) == 0);
    CHECK(c.resolve_supertype(3, 5) == 3);
    CHECK(c.depth() == 2);
    CHECK(c.is_ancestor_or_self(0, 2));
    CHECK(c.is_ancestor_or_self(2, 2));
    CHECK_FALSE(c.is_ancestor_or_self(2, 0));
    CHECK_THROWS_AS(c.at(17), CatalogError);
  }

  TEST_CASE("resolve_supertype matches a parent-walk oracle on random hierarchies") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 50; ++round) {
      const auto m = oracle::random_manifest(rng, 2 + rng() % 12);
      for (TypeId t = 0; t < m.catalog.size(); ++t) {
        for (unsigned level = 0; level < 6; ++level) {
          CHECK(m.catalog.resolve_supertype(t, level) == oracle::ancestor_at(m, t, level));
        }
      }
    }
  }

  TEST_CASE("valid manifest has no violations and round-trips through JSON") {
    const auto m = manifest_from_json(base_manifest());
    CHECK(validate_manifest(m).empty());
    CHECK(m.gap_for(0) == 3);
    CHECK(m.attributes[0].bin_count() == 10);
    CHECK(m.attributes[0].bin_of(-4) == 0);
    CHECK(m.attributes[0].bin_of(25) == 2);
    CHECK(m.attributes[0].bin_of(250) == 9);
    CHECK(m.sketch_width() == 12);
    CHECK(m.sketch_offset(1) == 10);
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
  }

  TEST_CASE("random manifests round-trip through JSON") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 40; ++round) {
      const auto m = oracle::random_manifest(rng, 1 + rng() % 20);
      REQUIRE(validate_manifest(m).empty());
      CHECK(manifest_from_json(manifest_to_json(m)) == m);
    }
  }

  TEST_CASE("violations are reported with codes") {
    SUBCASE("cycle") {
      auto doc = base_manifest();
      doc["types"][0]["parent"] = "b";
      const auto v = validate_manifest(manifest_from_json(doc));
      REQUIRE(has_code(v, "cycle"));
    }
    SUBCASE("unknown parent") {
      auto doc = base_manifest();
      doc["types"][1]["parent"] = "zzz";
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "unknown-parent"));
    }
    SUBCASE("duplicate type") {
      auto doc = base_manifest();
      doc["types"][1]["name"] = "a";
      doc.erase("merge_gap");
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "duplicate-type"));
    }
    SUBCASE("bad color") {
      auto doc = base_manifest();
      doc["types"][0]["color"] = "red";
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "bad-color"));
    }
    SUBCASE("missing gap without a default") {
      auto doc = base_manifest();
      doc["merge_gap"] = {{"a", 1}};
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "missing-gap"));
      doc["merge_gap"]["*"] = 2;
      const auto m = manifest_from_json(doc);
      CHECK(validate_manifest(m).empty());
      CHECK(m.gap_for(1) == 2);
    }
    SUBCASE("negative gap") {
      auto doc = base_manifest();
      doc["merge_gap"]["a"] = -1;
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "negative-gap"));
    }
    SUBCASE("bad attribute range and bin width") {
      auto doc = base_manifest();
      doc["attributes"][0]["max"] = -5;
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "bad-range"));
      doc = base_manifest();
      doc["attributes"][0]["bin_width"] = 0;
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "bad-bin-width"));
    }
    SUBCASE("categorical without categories") {
      auto doc = base_manifest();
      doc["attributes"][1]["categories"] = json::array();
      CHECK(has_code(validate_manifest(manifest_from_json(doc)), "no-categories"));
    }
  }

  TEST_CASE("structural JSON errors throw ManifestError") {
    CHECK_THROWS_AS(manifest_from_json(json::array()), ManifestError);
    auto doc = base_manifest();
    doc.erase("types");
    CHECK_THROWS_AS(manifest_from_json(doc), ManifestError);
    doc = base_manifest();
    doc["time_unit"] = "fortnights";
    CHECK_THROWS_AS(manifest_from_json(doc), ManifestError);
    doc = base_manifest();
    doc["merge_gap"]["nope"] = 1;
    CHECK_THROWS_AS(manifest_from_json(doc), ManifestError);
  }

  TEST_CASE("shipped manifests validate") {
    for (const char* path : {"fig_ess/manifest.json", "manifests/ed.json", "manifests/prostate.json"}) {
      CAPTURE(path);
      CHECK_NOTHROW(load_valid_manifest(std::filesystem::path(PATHFLOW_DATA_DIR) / path));
    }
  }
}
