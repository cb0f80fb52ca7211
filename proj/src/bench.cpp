#include "pathflow/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

void CountingSource::fetch(std::size_t index, RawPatient& out) const {
  inner_.fetch(index, out);
  events_.fetch_add(out.events.size(), std::memory_order_relaxed);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const auto index = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[index];
}

std::vector<BenchRow> run_bench(const PatientSource& source, std::shared_ptr<const DatasetManifest> manifest,
                                const BenchOptions& options) {
  if (options.workers.empty()) throw ParamError("bench needs at least one worker count");
  if (options.repeat == 0) throw ParamError("repeat must be positive");
  CountingSource counting(source);
  std::vector<BenchRow> rows;
  for (unsigned workers : options.workers) {
    if (workers == 0) throw ParamError("worker count must be positive");
    std::vector<BenchRow> runs;
    for (unsigned r = 0; r < options.repeat; ++r) {
      counting.reset();
      ProgressiveOptions popts;
      popts.workers = workers;
      popts.quantum = options.quantum;
      std::vector<double> stamps;  // ms since start
      const auto start = std::chrono::steady_clock::now();
      auto sink = [&](const SnapshotPtr&) {
        stamps.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
      };
      const auto final = progressive_build(counting, manifest, options.filter, popts, sink);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::vector<double> gaps;
      double prev = 0.0;
      for (double t : stamps) {
        gaps.push_back(t - prev);
        prev = t;
      }
      BenchRow row;
      row.workers = workers;
      row.wall_s = wall;
      row.patients = final->processed;
      row.events = counting.fetched_events();
      row.patients_per_s = wall > 0 ? static_cast<double>(row.patients) / wall : 0.0;
      row.events_per_s = wall > 0 ? static_cast<double>(row.events) / wall : 0.0;
      row.snapshots = stamps.size();
      row.p95_gap_ms = percentile(gaps, 95.0);
      runs.push_back(row);
    }
    std::sort(runs.begin(), runs.end(), [](const BenchRow& a, const BenchRow& b) { return a.wall_s < b.wall_s; });
    rows.push_back(runs[(runs.size() - 1) / 2]);
  }
  const auto ref = std::find_if(rows.begin(), rows.end(), [](const BenchRow& r) { return r.workers == 1; });
  const double ref_wall = (ref != rows.end() ? *ref : rows.front()).wall_s;
  for (auto& row : rows) row.speedup = row.wall_s > 0 ? ref_wall / row.wall_s : 0.0;
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::string out = "workers  patients/s      events/s        wall_s    snapshots  p95_gap_ms  speedup\n";
  char line[160];
  for (const auto& row : rows) {
    std::snprintf(line, sizeof line, "%7u  %14.0f  %14.0f  %8.3f  %9zu  %10.1f  %7.2f\n", row.workers,
                  row.patients_per_s, row.events_per_s, row.wall_s, row.snapshots, row.p95_gap_ms, row.speedup);
    out += line;
  }
  return out;
}

json bench_to_json(const std::vector<BenchRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back({{"workers", row.workers},
                   {"patients_per_s", row.patients_per_s},
                   {"events_per_s", row.events_per_s},
                   {"wall_s", row.wall_s},
                   {"snapshots", row.snapshots},
                   {"p95_gap_ms", row.p95_gap_ms},
                   {"speedup", row.speedup},
                   {"patients", row.patients},
                   {"events", row.events}});
  }
  return json{{"rows", std::move(out)}};
}

BenchBaseline baseline_from_json(const json& doc) {
  try {
    BenchBaseline b;
    b.workers = doc.value("workers", 1u);
    b.patients_per_s = doc.at("patients_per_s").get<double>();
    b.tolerance = doc.value("tolerance", 0.5);
    return b;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed baseline: ") + e.what());
  }
}

bool within_baseline(const std::vector<BenchRow>& rows, const BenchBaseline& baseline) {
  for (const auto& row : rows) {
    if (row.workers == baseline.workers) return row.patients_per_s >= baseline.patients_per_s * (1.0 - baseline.tolerance);
  }
  return false;
}

}  // namespace pathflow
