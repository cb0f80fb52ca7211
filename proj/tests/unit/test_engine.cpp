#include <doctest.h>

#include <functional>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/progressive.hpp"
#include "pathflow/tree_json.hpp"

using namespace pathflow;

namespace {

std::shared_ptr<const DatasetManifest> shared(DatasetManifest m) {
  return std::make_shared<const DatasetManifest>(std::move(m));
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("consecutive same-type events within the gap merge") {
    auto m = fixtures::fig_ess_manifest();
    DatasetManifest gapped = *m;
    gapped.merge_gap[0] = 2;
    RawPatient p{1, {30}, {{0, 0, 3}, {0, 5, 6}, {0, 9, 10}, {1, 10, 11}, {0, 11, 12}}};
    const auto seq = aggregate_events(p, gapped, 0);
    // gap 5-3 = 2 merges; 9-6 = 3 does not.
    REQUIRE(seq.events.size() == 4);
    CHECK(seq.events[0] == HighEvent{0, 0, 6});
    CHECK(seq.events[1] == HighEvent{0, 9, 10});
    CHECK(seq.events[3] == HighEvent{0, 11, 12});
    CHECK_THROWS_AS(aggregate_events(RawPatient{1, {30}, {{42, 0, 1}}}, gapped, 0), CatalogError);
  }

  TEST_CASE("aggregation matches the brute-force merger on random sequences") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 60; ++round) {
      const auto m = oracle::random_manifest(rng, 2 + rng() % 8);
      const auto patients = oracle::random_patients(rng, m, 40, 60, 0.6);
      const unsigned level = static_cast<unsigned>(rng() % 3);
      FilterSpec spec;
      spec.abstraction_level = level;
      for (const auto& p : patients) {
        const auto got = aggregate_events(p, m, level);
        const auto want = *oracle::high_sequence(p, m, spec);
        REQUIRE(got.events.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
          CHECK(got.events[i] == HighEvent{want[i].type, want[i].start, want[i].end});
        }
      }
    }
  }

  TEST_CASE("two-patient ESS tree shape and statistics") {
    const auto m = fixtures::fig_ess_manifest();
    const auto table = fixtures::fig_ess_table(*m);
    const auto tree = batch_build(table, m);
    const TypeId a = 0, b = 1, c = 2, d = 3, e = 4;
    CHECK(tree.patients() == 2);
    CHECK(tree.node_count() == 6);
    auto count = [&](std::vector<TypeId> path) { return tree.node(*tree.find(path)).count; };
    auto terminal = [&](std::vector<TypeId> path) { return tree.node(*tree.find(path)).terminal; };
    CHECK(count({a}) == 2);
    CHECK(count({a, b}) == 2);
    CHECK(count({a, b, c}) == 1);
    CHECK(count({a, b, d}) == 1);
    CHECK(count({a, b, d, e}) == 1);
    CHECK(terminal({a, b, c}) == 1);
    CHECK(terminal({a, b, d, e}) == 1);
    CHECK(terminal({a, b}) == 0);
    CHECK_FALSE(tree.find(std::vector<TypeId>{b}).has_value());
    const auto& nb = tree.node(*tree.find(std::vector<TypeId>{a, b}));
    CHECK(nb.dur_sum == 4);
    CHECK(nb.dur_min == 1);
    CHECK(nb.dur_max == 3);
    CHECK(nb.mean_duration() == doctest::Approx(2.0));
    const auto kids = tree.sorted_children(*tree.find(std::vector<TypeId>{a, b}));
    REQUIRE(kids.size() == 2);
    CHECK(tree.node(kids[0]).type == c);
    CHECK(tree.path_of(*tree.find(std::vector<TypeId>{a, b, d, e})) == std::vector<TypeId>{a, b, d, e});
  }

  TEST_CASE("batch build equals the oracle tree on random data") {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 30; ++round) {
      const auto m = shared(oracle::random_manifest(rng, 2 + rng() % 8));
      const auto patients = oracle::random_patients(rng, *m, 1 + rng() % 300, 40);
      const VectorSource src(patients);
      const auto spec = oracle::random_filter(rng, *m);
      const auto tree = batch_build(src, m, spec);
      CHECK(oracle::compare(tree, oracle::build(src, *m, spec)) == "");
    }
  }

  TEST_CASE("merge is order independent and matches a single build") {
    std::mt19937_64 rng(29);
    const auto m = shared(oracle::random_manifest(rng, 6));
    const auto patients = oracle::random_patients(rng, *m, 400, 30);
    const std::vector<RawPatient> left(patients.begin(), patients.begin() + 150);
    const std::vector<RawPatient> right(patients.begin() + 150, patients.end());
    const auto whole = batch_build(VectorSource(patients), m);
    const auto l = batch_build(VectorSource(left), m);
    const auto r = batch_build(VectorSource(right), m);
    CHECK(merge_trees(l, r) == whole);
    CHECK(merge_trees(r, l) == whole);
    AggregateTree self = l;
    self.merge(self);
    CHECK(self.patients() == 2 * l.patients());
    const auto other_manifest = shared(oracle::random_manifest(rng, 3));
    AggregateTree foreign(other_manifest);
    CHECK_THROWS_AS(foreign.merge(l), EngineError);
  }

  TEST_CASE("pruned copy keeps frequent nodes and preserves their counts") {
    std::mt19937_64 rng(31);
    const auto m = shared(oracle::random_manifest(rng, 5));
    const auto patients = oracle::random_patients(rng, *m, 500, 20);
    const auto tree = batch_build(VectorSource(patients), m);
    const auto pruned = tree.pruned_copy(10);
    CHECK(pruned.node_count() <= tree.node_count());
    for (NodeId id = 1; id < pruned.node_count(); ++id) {
      const auto path = pruned.path_of(id);
      CHECK(pruned.node(id).count >= 10);
      CHECK(pruned.node(id).count == tree.node(*tree.find(path)).count);
    }
    for (NodeId id = 1; id < tree.node_count(); ++id) {
      if (tree.node(id).count >= 10) CHECK(pruned.find(tree.path_of(id)).has_value());
    }
  }

  TEST_CASE("tree JSON round-trips exactly") {
    std::mt19937_64 rng(37);
    for (int round = 0; round < 20; ++round) {
      const auto m = shared(oracle::random_manifest(rng, 2 + rng() % 6));
      const auto patients = oracle::random_patients(rng, *m, 1 + rng() % 200, 25);
      const auto tree = batch_build(VectorSource(patients), m, oracle::random_filter(rng, *m));
      const auto doc = tree_to_json(tree);
      const auto back = tree_from_json(nlohmann::json::parse(doc.dump()));
      CHECK(back == tree);
      CHECK(tree_to_text(back) == tree_to_text(tree));
    }
    CHECK(int128_from_string(int128_to_string(-(static_cast<DurationSquares>(1) << 100))) ==
          -(static_cast<DurationSquares>(1) << 100));
  }

  TEST_CASE("tree JSON node budget reports dropped patients as other") {
    std::mt19937_64 rng(41);
    const auto m = shared(oracle::random_manifest(rng, 6));
    const auto patients = oracle::random_patients(rng, *m, 300, 20);
    const auto tree = batch_build(VectorSource(patients), m);
    const auto doc = tree_to_json(tree, TreeJsonOptions{false, 25});
    std::size_t nodes = 0;
    std::function<void(const nlohmann::json&)> walk = [&](const nlohmann::json& n) {
      ++nodes;
      std::uint64_t below = 0;
      for (const auto& c : n["children"]) {
        below += c["count"].get<std::uint64_t>();
        walk(c);
      }
      const auto other = n.value("other", std::uint64_t{0});
      CHECK(below + other + n["terminal"].get<std::uint64_t>() == n["count"].get<std::uint64_t>());
    };
    walk(doc["root"]);
    CHECK(nodes == 25);
  }

  TEST_CASE("median duration interpolates inside the histogram") {
    const auto m = fixtures::fig_ess_manifest();
    AggregateTree tree(m);
    for (Duration d : {4, 5, 6, 7}) tree.insert(PatientSequence{1, {30}, {{0, 0, d}}});
    const double med = median_duration(tree, *tree.find(std::vector<TypeId>{0}));
    CHECK(med >= 4.0);
    CHECK(med <= 7.0);
    CHECK(median_duration(tree, AggregateTree::root()) == 0.0);
  }

  TEST_CASE("progressive build equals batch for any worker count and chunking") {
    std::mt19937_64 rng(43);
    for (int round = 0; round < 12; ++round) {
      const auto m = shared(oracle::random_manifest(rng, 2 + rng() % 6));
      const auto patients = oracle::random_patients(rng, *m, 200 + rng() % 2000, 30);
      const VectorSource src(patients);
      const auto spec = oracle::random_filter(rng, *m);
      const auto batch = batch_build(src, m, spec);
      for (unsigned workers : {1u, 2u, 5u}) {
        ProgressiveOptions options;
        options.workers = workers;
        options.quantum = std::chrono::milliseconds(1);
        options.chunk_size = 1 + rng() % 64;
        options.chunk_jitter_seed = rng() | 1;
        std::uint64_t last_version = 0;
        std::size_t finals = 0;
        const auto final = progressive_build(src, m, spec, options, [&](const SnapshotPtr& s) {
          CHECK(s->version == last_version + 1);
          last_version = s->version;
          finals += s->final;
        });
        CHECK(final->complete());
        CHECK(finals == 1);
        CHECK(final->processed == patients.size());
        CHECK(*final->tree == batch);
      }
    }
  }

  TEST_CASE("intermediate snapshots only grow") {
    std::mt19937_64 rng(47);
    const auto m = shared(oracle::random_manifest(rng, 5));
    const auto patients = oracle::random_patients(rng, *m, 20000, 20);
    const VectorSource src(patients);
    ProgressiveOptions options;
    options.workers = 3;
    options.chunk_size = 50;
    options.quantum = std::chrono::milliseconds(1);
    options.first_version = 10;
    SnapshotPtr prev;
    std::size_t seen = 0;
    progressive_build(src, m, {}, options, [&](const SnapshotPtr& s) {
      ++seen;
      if (prev) {
        CHECK(s->version == prev->version + 1);
        CHECK(s->processed >= prev->processed);
        for (NodeId id = 0; id < prev->tree->node_count(); ++id) {
          const auto at = s->tree->find(prev->tree->path_of(id));
          REQUIRE(at.has_value());
          CHECK(s->tree->node(*at).count >= prev->tree->node(id).count);
        }
      } else {
        CHECK(s->version == 10);
      }
      prev = s;
    });
    CHECK(seen >= 1);
    CHECK(prev->final);
  }

  TEST_CASE("cancellation yields a final cancelled snapshot") {
    const auto m = shared(load_valid_manifest(fixtures::data("manifests/ed.json")));
    std::vector<RawPatient> patients(200000, RawPatient{1, {40, 0, 3}, {{3, 0, 5}, {5, 6, 9}}});
    const VectorSource src(patients);
    std::atomic<bool> cancel{true};
    ProgressiveOptions options;
    options.workers = 2;
    options.cancel = &cancel;
    const auto final = progressive_build(src, m, {}, options);
    CHECK(final->final);
    CHECK(final->cancelled);
    CHECK_FALSE(final->complete());
    CHECK(final->processed < patients.size());
  }

  TEST_CASE("an invalid filter is rejected before any work") {
    const auto m = fixtures::fig_ess_manifest();
    const auto table = fixtures::fig_ess_table(*m);
    FilterSpec spec;
    spec.hidden_types = {99};
    CHECK_THROWS_AS(progressive_build(table, m, spec, {}), QueryError);
  }

  TEST_CASE("worker exceptions propagate to the caller") {
    const auto m = fixtures::fig_ess_manifest();
    struct Broken final : PatientSource {
      std::size_t size() const override { return 1000; }
      void fetch(std::size_t index, RawPatient& out) const override {
        if (index == 500) throw std::runtime_error("disk on fire");
        out = RawPatient{static_cast<PatientId>(index), {30}, {}};
      }
    } broken;
    ProgressiveOptions options;
    options.workers = 2;
    CHECK_THROWS_WITH(progressive_build(broken, m, {}, options), "disk on fire");
  }
}
