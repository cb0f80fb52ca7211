#pragma once

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

#include "pathflow/csv.hpp"
#include "pathflow/manifest_json.hpp"

#ifndef PATHFLOW_DATA_DIR
#define PATHFLOW_DATA_DIR "data"
#endif

namespace fixtures {

inline std::filesystem::path data(const std::string& rel) { return std::filesystem::path(PATHFLOW_DATA_DIR) / rel; }

inline std::shared_ptr<const pathflow::DatasetManifest> fig_ess_manifest() {
  return std::make_shared<const pathflow::DatasetManifest>(pathflow::load_valid_manifest(data("fig_ess/manifest.json")));
}

inline pathflow::EventTable fig_ess_table(const pathflow::DatasetManifest& m) {
  return pathflow::read_event_log(data("fig_ess/events.csv"), m);
}

/// Patient A only (the first three rows).
inline pathflow::EventTable fig_ess_patient_a(const pathflow::DatasetManifest& m) {
  std::istringstream in("patient_id,type_name,start,end,age\n1,a,0,2,30\n1,b,2,5,30\n1,c,5,6,30\n");
  return pathflow::read_event_log(in, m);
}

inline pathflow::TypeId type(const pathflow::DatasetManifest& m, const char* name) { return *m.catalog.find(name); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pathflow-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
