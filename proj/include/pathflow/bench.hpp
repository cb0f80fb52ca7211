#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathflow/progressive.hpp"

namespace pathflow {

/// Forwards to another source and counts the low-level events fetched.
class CountingSource final : public PatientSource {
 public:
  explicit CountingSource(const PatientSource& inner) : inner_(inner) {}
  std::size_t size() const override { return inner_.size(); }
  void fetch(std::size_t index, RawPatient& out) const override;
  std::uint64_t event_count() const override { return inner_.event_count(); }
  std::uint64_t parse_errors() const override { return inner_.parse_errors(); }

  std::uint64_t fetched_events() const noexcept { return events_.load(std::memory_order_relaxed); }
  void reset() noexcept { events_ = 0; }

 private:
  const PatientSource& inner_;
  mutable std::atomic<std::uint64_t> events_{0};
};

struct BenchOptions {
  std::vector<unsigned> workers{1};
  unsigned repeat = 1;
  std::chrono::milliseconds quantum{1000};
  FilterSpec filter;
};

struct BenchRow {
  unsigned workers = 0;
  double patients_per_s = 0;
  double events_per_s = 0;
  double wall_s = 0;
  std::size_t snapshots = 0;       // intermediate + final
  double p95_gap_ms = 0;           // between consecutive publications, start included
  double speedup = 1;              // relative to the 1-worker row (or the first row)
  std::uint64_t patients = 0;
  std::uint64_t events = 0;
};

/// Runs each worker count `repeat` times and keeps the run with the median
/// wall time.
std::vector<BenchRow> run_bench(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                                const BenchOptions& options);

/// Nearest-rank percentile of a sample (p in [0, 100]); 0 for an empty one.
double percentile(std::vector<double> values, double p);

std::string bench_table(const std::vector<BenchRow>& rows);
nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);

/// A recorded throughput figure for one worker count and the allowed drop.
struct BenchBaseline {
  unsigned workers = 1;
  double patients_per_s = 0;
  double tolerance = 0.5;  // fraction below baseline still accepted
};

BenchBaseline baseline_from_json(const nlohmann::json& doc);

/// True when the row for the baseline's worker count reaches
/// patients_per_s * (1 - tolerance). False when that row is missing.
bool within_baseline(const std::vector<BenchRow>& rows, const BenchBaseline& baseline);

}  // namespace pathflow
