#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>

#include "pathflow/dataset.hpp"
#include "pathflow/filter.hpp"
#include "pathflow/tree.hpp"

namespace pathflow {

/// Immutable, versioned view of the aggregate tree at a progress point.
struct TreeSnapshot {
  std::uint64_t version = 0;
  std::shared_ptr<const AggregateTree> tree;
  std::uint64_t processed = 0;  // patients consumed, admitted or not
  std::uint64_t total = 0;
  std::chrono::microseconds elapsed{0};
  std::uint64_t errors = 0;     // upstream rows rejected while loading the source
  bool final = false;
  bool cancelled = false;

  bool complete() const noexcept { return final && !cancelled && processed == total; }
};

using SnapshotPtr = std::shared_ptr<const TreeSnapshot>;
using SnapshotSink = std::function<void(const SnapshotPtr&)>;

struct ProgressiveOptions {
  std::chrono::milliseconds quantum{1000};
  /// Worker threads; 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;
  /// Fixed patients per chunk; 0 adapts chunk sizes toward `target_chunk_time`.
  std::size_t chunk_size = 0;
  std::chrono::milliseconds target_chunk_time{50};
  /// When non-zero, chunk sizes are drawn uniformly from [1, 2 * chunk_size]
  /// with this seed (used to exercise arbitrary partitions).
  std::uint64_t chunk_jitter_seed = 0;
  /// Published copies drop nodes below this count; the internal tree is never pruned.
  std::uint64_t snapshot_min_count = 0;
  /// First version number to publish (sessions continue numbering across runs).
  std::uint64_t first_version = 1;
  const std::atomic<bool>* cancel = nullptr;
};

/// Builds the tree with parallel workers, publishing intermediate snapshots
/// through `sink` at most once per quantum and always a final one.
///
/// Workers aggregate disjoint chunks into private partial trees; the
/// calling thread merges partials into the canonical tree and publishes
/// copies. The final tree equals batch_build() over the same input for
/// any worker count and chunking. Returns the final snapshot. Throws
/// QueryError for an invalid filter.
SnapshotPtr progressive_build(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                              const FilterSpec& filter, const ProgressiveOptions& options,
                              const SnapshotSink& sink = {});

/// Single-threaded reference build.
AggregateTree batch_build(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                          const FilterSpec& filter = {});

}  // namespace pathflow
