#include "pathflow/progressive.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace pathflow {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kInitialChunk = 256;
constexpr std::size_t kMinChunk = 16;
constexpr std::size_t kMaxChunk = std::size_t{1} << 20;

struct Partial {
  AggregateTree tree;
  std::uint64_t processed = 0;
};

/// Hands out contiguous, disjoint index ranges.
class ChunkCursor {
 public:
  ChunkCursor(std::size_t total, const ProgressiveOptions& options)
      : total_(total), fixed_(options.chunk_size), jitter_(options.chunk_jitter_seed),
        use_jitter_(options.chunk_jitter_seed != 0 && options.chunk_size != 0) {}

  std::pair<std::size_t, std::size_t> claim(std::size_t wanted) {
    std::lock_guard lock(mutex_);
    if (use_jitter_) {
      wanted = std::uniform_int_distribution<std::size_t>(1, 2 * fixed_)(jitter_);
    } else if (fixed_) {
      wanted = fixed_;
    }
    const std::size_t begin = next_;
    next_ = std::min(total_, begin + std::max<std::size_t>(wanted, 1));
    return {begin, next_};
  }

 private:
  std::mutex mutex_;
  std::size_t total_;
  std::size_t next_ = 0;
  std::size_t fixed_;
  std::mt19937_64 jitter_;
  bool use_jitter_;
};

void aggregate_range(const PatientSource& source, const PatientPipeline& pipeline, const DatasetManifest& manifest,
                     std::size_t begin, std::size_t end, const std::atomic<bool>* cancel, Partial& out) {
  RawPatient raw;
  PatientSequence seq;
  std::vector<std::uint32_t> index;
  std::size_t i = begin;
  for (; i < end; ++i) {
    if (cancel && (i - begin) % 64 == 0 && cancel->load(std::memory_order_relaxed)) break;
    source.fetch(i, raw);
    if (!pipeline.run(raw, seq)) continue;
    sketch_indices(manifest, seq.attributes, index);
    out.tree.insert(seq.events, index);
  }
  out.processed = i - begin;
}

}  // namespace

AggregateTree batch_build(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                          const FilterSpec& filter) {
  PatientPipeline pipeline(*manifest, filter);
  Partial all{AggregateTree(manifest), 0};
  aggregate_range(source, pipeline, *manifest, 0, source.size(), nullptr, all);
  return std::move(all.tree);
}

SnapshotPtr progressive_build(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                              const FilterSpec& filter, const ProgressiveOptions& options, const SnapshotSink& sink) {
  const PatientPipeline pipeline(*manifest, filter);
  const std::size_t total = source.size();
  const unsigned workers =
      options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  const auto quantum = std::max(options.quantum, std::chrono::milliseconds{1});
  const auto start = Clock::now();

  std::mutex mutex;
  std::condition_variable ready_cv;  // merger waits for partials
  std::condition_variable space_cv;  // workers wait for queue space
  std::deque<Partial> ready;
  const std::size_t max_queued = 2 * static_cast<std::size_t>(workers);
  unsigned active = workers;
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  ChunkCursor cursor(total, options);

  auto stop_requested = [&] {
    return abort.load(std::memory_order_relaxed) ||
           (options.cancel && options.cancel->load(std::memory_order_relaxed));
  };

  auto worker = [&] {
    try {
      std::size_t wanted = kInitialChunk;
      while (!stop_requested()) {
        const auto [begin, end] = cursor.claim(wanted);
        if (begin >= end) break;
        const auto t0 = Clock::now();
        Partial part{AggregateTree(manifest), 0};
        aggregate_range(source, pipeline, *manifest, begin, end, options.cancel, part);
        const auto spent = Clock::now() - t0;
        {
          std::unique_lock lock(mutex);
          space_cv.wait(lock, [&] { return ready.size() < max_queued || abort.load(); });
          ready.push_back(std::move(part));
        }
        ready_cv.notify_one();
        if (options.chunk_size == 0) {
          // Steer toward target_chunk_time, growing at most 4x per step.
          const double secs = std::chrono::duration<double>(spent).count();
          const double target = std::chrono::duration<double>(options.target_chunk_time).count();
          const double scale = secs > 0 ? std::min(4.0, target / secs) : 4.0;
          wanted = std::clamp<std::size_t>(static_cast<std::size_t>(static_cast<double>(end - begin) * scale),
                                           kMinChunk, kMaxChunk);
        }
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
      abort = true;
      space_cv.notify_all();
    }
    {
      std::lock_guard lock(mutex);
      --active;
    }
    ready_cv.notify_one();
  };

  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) threads.emplace_back(worker);

  AggregateTree global(manifest);
  std::uint64_t processed = 0;
  std::uint64_t version = options.first_version;
  bool dirty = false;

  auto publish = [&](bool final) {
    auto snap = std::make_shared<TreeSnapshot>();
    snap->version = version++;
    snap->tree = std::make_shared<const AggregateTree>(
        !final && options.snapshot_min_count > 1 ? global.pruned_copy(options.snapshot_min_count) : global);
    snap->processed = processed;
    snap->total = total;
    snap->elapsed = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start);
    snap->errors = source.parse_errors();
    snap->final = final;
    snap->cancelled = final && processed < total;
    SnapshotPtr out = std::move(snap);
    if (sink) sink(out);
    return out;
  };

  auto deadline = start + quantum;
  while (true) {
    std::deque<Partial> batch;
    bool done = false;
    {
      std::unique_lock lock(mutex);
      ready_cv.wait_until(lock, deadline, [&] { return !ready.empty() || active == 0; });
      batch.swap(ready);
      done = active == 0;
    }
    space_cv.notify_all();
    for (auto& part : batch) {
      global.merge(part.tree);
      processed += part.processed;
      dirty = true;
    }
    if (done) break;
    const auto now = Clock::now();
    if (now >= deadline) {
      // Stream end wins over a quantum tick: the final snapshot covers it.
      if (dirty && processed < total) {
        publish(false);
        dirty = false;
      }
      deadline = now + quantum;
    }
  }
  threads.clear();
  if (failure) std::rethrow_exception(failure);
  return publish(true);
}

}  // namespace pathflow
