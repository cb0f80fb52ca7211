// pf: command-line front end for the pathflow engine.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pathflow/bench.hpp"
#include "pathflow/csv.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/filter_json.hpp"
#include "pathflow/layout.hpp"
#include "pathflow/manifest_json.hpp"
#include "pathflow/server.hpp"
#include "pathflow/synth.hpp"
#include "pathflow/tree_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pathflow;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path);
}

void report_issues(const std::vector<ParseIssue>& issues) {
  for (const auto& issue : issues) std::cerr << "warning: line " << issue.line << ": " << issue.message << "\n";
}

std::shared_ptr<const DatasetManifest> manifest_at(const std::string& path) {
  return std::make_shared<const DatasetManifest>(load_valid_manifest(path));
}

/// Synthesis parameters may name their manifest (relative to the params file).
std::string synth_manifest_path(const std::string& params_path, const json& doc, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!doc.contains("manifest")) throw ParamError(params_path + ": no \"manifest\" key and no --manifest given");
  fs::path p = doc["manifest"].get<std::string>();
  if (p.is_relative()) p = fs::path(params_path).parent_path() / p;
  return p.string();
}

int cmd_validate(const std::string& path) {
  const auto manifest = load_manifest(path);
  const auto violations = validate_manifest(manifest);
  if (violations.empty()) {
    std::cout << "ok: " << manifest.catalog.size() << " types, " << manifest.attributes.size() << " attributes\n";
    return kOk;
  }
  std::cout << violations_to_json(violations).dump(2) << "\n";
  return kData;
}

int cmd_synth(const std::string& params_path, const std::string& manifest_flag, const std::string& out,
              std::optional<std::uint64_t> patients, std::optional<std::uint64_t> seed) {
  const json doc = read_json_file(params_path);
  const auto manifest = manifest_at(synth_manifest_path(params_path, doc, manifest_flag));
  auto params = synthesis_params_from_json(doc, *manifest);
  if (patients) params.patient_count = *patients;
  if (seed) params.seed = *seed;
  if (out.empty() || out == "-") {
    write_synthetic_csv(std::cout, params, *manifest);
  } else {
    std::ofstream file(out, std::ios::binary);
    write_synthetic_csv(file, params, *manifest);
    if (!file) throw Error("cannot write " + out);
  }
  return kOk;
}

struct BuildArgs {
  std::string manifest, csv, filter, out, timing_log;
  bool progressive = false;
  long quantum = 1000;
  unsigned workers = 0;
};

int cmd_build(const BuildArgs& args) {
  const auto manifest = manifest_at(args.manifest);
  FilterSpec filter;
  if (!args.filter.empty()) {
    filter = filter_from_json(read_json_file(args.filter), *manifest);
    if (auto violations = validate_filter(filter, *manifest); !violations.empty()) {
      std::cerr << violations_to_json(violations).dump(2) << "\n";
      return kData;
    }
  }
  std::vector<ParseIssue> issues;
  const EventTable table = read_event_log(args.csv, *manifest, {}, &issues);
  report_issues(issues);

  if (!args.progressive) {
    write_text(args.out, tree_to_text(batch_build(table, manifest, filter)));
    return kOk;
  }
  std::string log_path = args.timing_log;
  if (log_path.empty() && !args.out.empty() && args.out != "-") log_path = args.out + ".timing.jsonl";
  std::ofstream log;
  if (!log_path.empty()) log.open(log_path);
  ProgressiveOptions options;
  options.quantum = std::chrono::milliseconds(args.quantum);
  options.workers = args.workers;
  auto sink = [&](const SnapshotPtr& snap) {
    if (!log.is_open()) return;
    log << json{{"version", snap->version},
                {"processed", snap->processed},
                {"total", snap->total},
                {"elapsed_ms", static_cast<double>(snap->elapsed.count()) / 1000.0},
                {"nodes", snap->tree->node_count()},
                {"final", snap->final}}
               .dump()
        << "\n";
  };
  const auto final = progressive_build(table, manifest, filter, options, sink);
  write_text(args.out, tree_to_text(*final->tree));
  return kOk;
}

int cmd_layout(const std::string& tree_path, const LayoutParams& params, const std::string& out) {
  const auto tree = tree_from_json(read_json_file(tree_path));
  write_text(out, rects_to_json(layout_icicle(tree, params), tree.manifest()).dump(1) + "\n");
  return kOk;
}

struct BenchArgs {
  std::string manifest, input, baseline;
  std::vector<unsigned> workers{1};
  unsigned repeat = 1;
  long quantum = 1000;
  std::optional<std::uint64_t> patients;
  bool json = false;
  bool materialize = false;
};

int cmd_bench(const BenchArgs& args) {
  const auto manifest = manifest_at(args.manifest);
  std::unique_ptr<PatientSource> source;
  if (fs::path(args.input).extension() == ".json") {
    auto params = synthesis_params_from_json(read_json_file(args.input), *manifest);
    if (args.patients) params.patient_count = *args.patients;
    if (args.materialize) {
      source = std::make_unique<EventTable>(synthesize(params, *manifest, 0));
    } else {
      source = std::make_unique<SyntheticSource>(params, *manifest);
    }
  } else {
    std::vector<ParseIssue> issues;
    source = std::make_unique<EventTable>(read_event_log(args.input, *manifest, {}, &issues));
    report_issues(issues);
  }
  BenchOptions options;
  options.workers = args.workers;
  options.repeat = args.repeat;
  options.quantum = std::chrono::milliseconds(args.quantum);
  const auto rows = run_bench(*source, manifest, options);
  std::optional<bool> gate;
  if (!args.baseline.empty()) gate = within_baseline(rows, baseline_from_json(read_json_file(args.baseline)));
  if (args.json) {
    json doc = bench_to_json(rows);
    doc["hardware_threads"] = std::thread::hardware_concurrency();
    if (gate) doc["baseline_ok"] = *gate;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << bench_table(rows);
    if (gate) std::cout << "baseline: " << (*gate ? "ok" : "regression") << "\n";
  }
  return kOk;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(const std::string& config_path, std::optional<int> port) {
  auto config = load_server_config(config_path);
  if (const char* env = std::getenv("PORT")) config.port = std::stoi(env);
  if (port) config.port = *port;
  Server server(std::move(config));
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  std::cerr << "listening on port " << server.start() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return kOk;
}

void print_error(const char* kind, const std::exception& e, std::size_t line = 0) {
  json err{{"error", kind}, {"message", e.what()}};
  if (line) err["line"] = line;
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathflow: progressive event-sequence aggregation"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a dataset manifest");
  validate->add_option("manifest", validate_path)->required();

  std::string synth_params, synth_manifest, synth_out;
  std::optional<std::uint64_t> synth_patients, synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event log");
  synth->add_option("params", synth_params)->required();
  synth->add_option("--manifest", synth_manifest);
  synth->add_option("-o,--output", synth_out);
  synth->add_option("--patients", synth_patients);
  synth->add_option("--seed", synth_seed);

  BuildArgs build_args;
  auto* build = app.add_subcommand("build", "Aggregate an event log into a tree");
  build->add_option("manifest", build_args.manifest)->required();
  build->add_option("csv", build_args.csv)->required();
  build->add_option("--filter", build_args.filter);
  build->add_flag("--progressive", build_args.progressive);
  build->add_option("--quantum", build_args.quantum, "ms between snapshots")->check(CLI::PositiveNumber);
  build->add_option("--workers", build_args.workers);
  build->add_option("--timing-log", build_args.timing_log);
  build->add_option("-o,--output", build_args.out);

  std::string layout_tree, layout_out, layout_mode = "mean";
  LayoutParams layout_params;
  double layout_scale = -1;
  auto* layout = app.add_subcommand("layout", "Compute icicle rectangles for a tree");
  layout->add_option("tree", layout_tree)->required();
  layout->add_option("--vw", layout_params.viewport_width);
  layout->add_option("--vh", layout_params.viewport_height);
  layout->add_option("--minpx", layout_params.min_node_height_px);
  layout->add_option("--mode", layout_mode)->check(CLI::IsMember({"mean", "median", "uniform"}));
  layout->add_option("--scale", layout_scale, "pixels per time unit (default: fit)");
  layout->add_option("-o,--output", layout_out);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Measure build throughput");
  bench->add_option("manifest", bench_args.manifest)->required();
  bench->add_option("input", bench_args.input, "event-log CSV or synthesis params (.json)")->required();
  bench->add_option("--workers", bench_args.workers)->delimiter(',');
  bench->add_option("--repeat", bench_args.repeat)->check(CLI::PositiveNumber);
  bench->add_option("--quantum", bench_args.quantum)->check(CLI::PositiveNumber);
  bench->add_option("--patients", bench_args.patients);
  bench->add_option("--baseline", bench_args.baseline);
  bench->add_flag("--materialize", bench_args.materialize, "generate synthetic data up front");
  bench->add_flag("--json", bench_args.json);

  std::string serve_config;
  std::optional<int> serve_port;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", serve_config)->required();
  serve->add_option("--port", serve_port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*synth) return cmd_synth(synth_params, synth_manifest, synth_out, synth_patients, synth_seed);
    if (*build) return cmd_build(build_args);
    if (*layout) {
      layout_params.width_mode = *parse_width_mode(layout_mode);
      if (layout_scale >= 0) layout_params.duration_scale = layout_scale;
      return cmd_layout(layout_tree, layout_params, layout_out);
    }
    if (*bench) return cmd_bench(bench_args);
    if (*serve) return cmd_serve(serve_config, serve_port);
  } catch (const ParseError& e) {
    print_error("parse", e, e.line());
    return kData;
  } catch (const ManifestError& e) {
    print_error("manifest", e);
    return kData;
  } catch (const QueryError& e) {
    print_error("filter", e);
    return kData;
  } catch (const ParamError& e) {
    print_error("params", e);
    return kData;
  } catch (const Error& e) {
    print_error("data", e);
    return kData;
  } catch (const nlohmann::json::exception& e) {
    print_error("parse", e);
    return kData;
  } catch (const std::exception& e) {
    print_error("internal", e);
    return kInternal;
  }
  return kUsage;
}
