#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "pathflow/dataset.hpp"

namespace pathflow {

struct LogNormal {
  double mu = 0.0;     // mean of log(x)
  double sigma = 1.0;  // stddev of log(x)
};

struct AttributeGenerator {
  enum class Kind { constant, uniform, normal, categorical };
  Kind kind = Kind::constant;
  double a = 0.0;  // constant value | uniform low | normal mean
  double b = 0.0;  // uniform high (inclusive) | normal stddev
  std::vector<double> weights;  // categorical, one per category
};

/// Markov-chain generator over a subset of the catalog ("states").
///
/// Each patient draws an event count from Poisson(mean_events_per_patient),
/// an initial state from `initial`, then walks `transitions`. Every event
/// lasts round(LogNormal(durations[state])) time units (truncated at 0) and
/// is followed by a round(LogNormal(gap)) pause.
struct SynthesisParams {
  std::uint64_t patient_count = 0;
  std::uint64_t seed = 0;
  double mean_events_per_patient = 1.0;
  std::vector<TypeId> states;
  std::vector<double> initial;                   // per state
  std::vector<std::vector<double>> transitions;  // row-stochastic, states x states
  std::vector<LogNormal> durations;              // per state
  std::optional<LogNormal> gap;                  // none: back-to-back events
  std::vector<AttributeGenerator> attributes;    // per manifest attribute
};

/// Throws ParamError on a non-stochastic matrix, mismatched sizes, or
/// states / attributes unknown to the manifest.
void validate_synthesis_params(const SynthesisParams& params, const DatasetManifest& manifest);

/// Reads the documented params JSON. Type and attribute names are resolved
/// against `manifest`. The optional "manifest" key is not interpreted here.
SynthesisParams synthesis_params_from_json(const nlohmann::json& doc, const DatasetManifest& manifest);
nlohmann::json synthesis_params_to_json(const SynthesisParams& params, const DatasetManifest& manifest);

/// Deterministic generation of patient `index` (id = index + 1). The
/// random stream is keyed by (seed, index) alone.
void synthesize_patient(const SynthesisParams& params, std::size_t attribute_count, std::uint64_t index,
                        RawPatient& out);

/// Generates patients on demand; nothing is materialized.
class SyntheticSource final : public PatientSource {
 public:
  SyntheticSource(SynthesisParams params, const DatasetManifest& manifest);
  std::size_t size() const override { return static_cast<std::size_t>(params_.patient_count); }
  void fetch(std::size_t index, RawPatient& out) const override;
  const SynthesisParams& params() const noexcept { return params_; }

 private:
  SynthesisParams params_;
  std::size_t attribute_count_;
};

/// Materializes every patient, generating disjoint index ranges on up to
/// `workers` threads. The result does not depend on `workers`.
EventTable synthesize(const SynthesisParams& params, const DatasetManifest& manifest, unsigned workers = 1);

/// Streams the CSV form of every patient to `out`.
void write_synthetic_csv(std::ostream& out, const SynthesisParams& params, const DatasetManifest& manifest);

}  // namespace pathflow
