#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pathflow/csv.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/filter_json.hpp"
#include "pathflow/history.hpp"
#include "pathflow/layout.hpp"
#include "pathflow/manifest_json.hpp"
#include "pathflow/query.hpp"
#include "pathflow/synth.hpp"
#include "pathflow/tree_json.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace pathflow;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.

struct Manifest {
  std::shared_ptr<const DatasetManifest> ptr;
};

struct Dataset {
  std::shared_ptr<const PatientSource> source;
  std::shared_ptr<const DatasetManifest> manifest;
};

struct Tree {
  std::shared_ptr<const AggregateTree> ptr;
};

FilterSpec parse_filter(const std::string& text, const DatasetManifest& manifest) {
  if (text.empty()) return {};
  FilterSpec spec = filter_from_json(json::parse(text), manifest);
  if (auto v = validate_filter(spec, manifest); !v.empty()) {
    throw QueryError("invalid filter: " + violations_to_json(v).dump());
  }
  return spec;
}

SnapshotPtr final_snapshot(const Tree& tree) {
  auto snap = std::make_shared<TreeSnapshot>();
  snap->tree = tree.ptr;
  snap->processed = snap->total = tree.ptr->patients();
  snap->final = true;
  return snap;
}

std::string snapshot_meta(const TreeSnapshot& snap) {
  return json{{"version", snap.version},
              {"processed", snap.processed},
              {"total", snap.total},
              {"elapsed_ms", static_cast<double>(snap.elapsed.count()) / 1000.0},
              {"final", snap.final},
              {"cancelled", snap.cancelled}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_pathflow, m) {
  m.doc() = "pathflow engine bindings";

  // Translators run newest first, so the base class is registered first.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ManifestError>(m, "ManifestError", base.ptr());
  py::register_exception<QueryError>(m, "QueryError", base.ptr());
  py::register_exception<ParamError>(m, "ParamError", base.ptr());
  py::register_exception<NotFoundError>(m, "NotFoundError", base.ptr());

  py::class_<Manifest>(m, "Manifest")
      .def_static("from_json", [](const std::string& text) {
        return Manifest{std::make_shared<const DatasetManifest>(manifest_from_json(json::parse(text)))};
      })
      .def_static("load", [](const std::string& path) {
        return Manifest{std::make_shared<const DatasetManifest>(load_manifest(path))};
      })
      .def("to_json", [](const Manifest& self) { return manifest_to_json(*self.ptr).dump(); })
      .def("violations", [](const Manifest& self) { return violations_to_json(validate_manifest(*self.ptr)).dump(); })
      .def_property_readonly("type_names", [](const Manifest& self) {
        std::vector<std::string> names;
        for (const auto& t : self.ptr->catalog.entries()) names.push_back(t.name);
        return names;
      });

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_csv", [](const std::string& path, const Manifest& manifest) {
        return Dataset{std::make_shared<EventTable>(read_event_log(path, *manifest.ptr)), manifest.ptr};
      })
      .def_static("from_csv_text", [](const std::string& text, const Manifest& manifest) {
        std::istringstream in(text);
        return Dataset{std::make_shared<EventTable>(read_event_log(in, *manifest.ptr)), manifest.ptr};
      })
      .def_static("synthetic", [](const std::string& params, const Manifest& manifest) {
        return Dataset{std::make_shared<SyntheticSource>(synthesis_params_from_json(json::parse(params), *manifest.ptr),
                                                         *manifest.ptr),
                       manifest.ptr};
      })
      .def("__len__", [](const Dataset& self) { return self.source->size(); })
      .def_property_readonly("parse_errors", [](const Dataset& self) { return self.source->parse_errors(); })
      .def("patient", [](const Dataset& self, std::size_t index) {
        if (index >= self.source->size()) throw py::index_error();
        RawPatient p;
        self.source->fetch(index, p);
        json events = json::array();
        for (const auto& e : p.events) events.push_back({e.type, e.start, e.end});
        return json{{"id", p.id}, {"attributes", p.attributes}, {"events", std::move(events)}}.dump();
      });

  py::class_<Tree>(m, "Tree")
      .def_static("from_json", [](const std::string& text) {
        return Tree{std::make_shared<const AggregateTree>(tree_from_json(json::parse(text)))};
      })
      .def("to_json", [](const Tree& self, std::size_t max_nodes) {
        return tree_to_json(*self.ptr, TreeJsonOptions{true, max_nodes}).dump();
      }, py::arg("max_nodes") = 0)
      .def("to_text", [](const Tree& self) { return tree_to_text(*self.ptr); })
      .def_property_readonly("patients", [](const Tree& self) { return self.ptr->patients(); })
      .def_property_readonly("node_count", [](const Tree& self) { return self.ptr->node_count(); })
      .def("count", [](const Tree& self, const std::vector<TypeId>& path) -> std::uint64_t {
        auto node = self.ptr->find(path);
        return node ? self.ptr->node(*node).count : 0;
      })
      .def("__eq__", [](const Tree& a, const Tree& b) { return *a.ptr == *b.ptr; });

  m.def("build", [](const Dataset& data, const std::string& filter) {
    const FilterSpec spec = parse_filter(filter, *data.manifest);
    py::gil_scoped_release release;
    return Tree{std::make_shared<const AggregateTree>(batch_build(*data.source, data.manifest, spec))};
  }, py::arg("dataset"), py::arg("filter") = "");

  m.def("build_progressive", [](const Dataset& data, const std::string& filter, long quantum_ms, unsigned workers,
                                std::function<void(std::string)> on_snapshot) {
    const FilterSpec spec = parse_filter(filter, *data.manifest);
    ProgressiveOptions options;
    options.quantum = std::chrono::milliseconds(quantum_ms);
    options.workers = workers;
    SnapshotSink sink;
    if (on_snapshot) {
      sink = [&](const SnapshotPtr& snap) {
        py::gil_scoped_acquire acquire;
        on_snapshot(snapshot_meta(*snap));
      };
    }
    SnapshotPtr final;
    {
      py::gil_scoped_release release;
      final = progressive_build(*data.source, data.manifest, spec, options, sink);
    }
    return Tree{final->tree};
  }, py::arg("dataset"), py::arg("filter") = "", py::arg("quantum_ms") = 1000, py::arg("workers") = 0,
     py::arg("on_snapshot") = nullptr);

  m.def("layout", [](const Tree& tree, double vw, double vh, double minpx, const std::string& mode,
                     std::optional<double> scale) {
    LayoutParams params{vw, vh, minpx, WidthMode::mean, scale};
    auto parsed = parse_width_mode(mode);
    if (!parsed) throw ParamError("bad width mode '" + mode + "'");
    params.width_mode = *parsed;
    return rects_to_json(layout_icicle(*tree.ptr, params), tree.ptr->manifest()).dump();
  }, py::arg("tree"), py::arg("vw") = 1000.0, py::arg("vh") = 600.0, py::arg("minpx") = 0.0,
     py::arg("mode") = "mean", py::arg("scale") = std::nullopt);

  m.def("hit_test", [](const std::string& rects, double x, double y) {
    return hit_test(rects_from_json(json::parse(rects)), x, y);
  });

  m.def("distribution", [](const Tree& tree, const std::vector<TypeId>& path, const std::string& selector) {
    const auto& manifest = tree.ptr->manifest();
    return distribution_to_json(node_distribution(*tree.ptr, path, parse_selector(selector, manifest)), manifest).dump();
  }, py::arg("tree"), py::arg("path"), py::arg("selector") = "duration");

  m.def("diff", [](const Tree& a, const Tree& b) {
    return diff_to_json(diff_trees(*a.ptr, *b.ptr), a.ptr->manifest()).dump();
  });

  m.def("normalize_filter", [](const std::string& filter, const Manifest& manifest) {
    return filter_to_json(parse_filter(filter, *manifest.ptr), *manifest.ptr).dump();
  });

  py::class_<HistoryStore, std::shared_ptr<HistoryStore>>(m, "History")
      .def(py::init([](const Manifest& manifest, std::optional<std::string> path) {
        std::optional<std::filesystem::path> file;
        if (path) file = *path;
        return std::make_shared<HistoryStore>(manifest.ptr, file);
      }), py::arg("manifest"), py::arg("path") = std::nullopt)
      .def("put", [](HistoryStore& self, const Tree& tree, const std::string& filter, const std::string& label) {
        return self.put(parse_filter(filter, tree.ptr->manifest()), final_snapshot(tree), label);
      }, py::arg("tree"), py::arg("filter") = "", py::arg("label") = "")
      .def("get", [](const HistoryStore& self, EntryId id) {
        const auto entry = self.get(id);
        return entry_to_json(entry, entry.snapshot->tree->manifest(), true).dump();
      })
      .def("tree", [](const HistoryStore& self, EntryId id) { return Tree{self.get(id).snapshot->tree}; })
      .def("__len__", &HistoryStore::size)
      .def("list", [](const HistoryStore& self) {
        json out = json::array();
        for (const auto& e : self.list()) out.push_back(entry_to_json(e, e.snapshot->tree->manifest(), false));
        return out.dump();
      });
}
