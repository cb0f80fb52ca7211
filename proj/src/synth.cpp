#include "pathflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "pathflow/csv.hpp"
#include "pathflow/errors.hpp"

namespace pathflow {

using nlohmann::json;

namespace {

constexpr double kStochasticTolerance = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::size_t sample_index(std::span<const double> weights, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Rounding can leave u just above the final sum; take the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

Duration draw_lognormal(const LogNormal& dist, std::mt19937_64& rng) {
  double value = std::exp(dist.mu);
  if (dist.sigma > 0.0) value = std::lognormal_distribution<double>(dist.mu, dist.sigma)(rng);
  return std::max<Duration>(0, std::llround(value));
}

LogNormal lognormal_from_json(const json& doc) {
  return LogNormal{doc.at("mu").get<double>(), doc.value("sigma", 0.0)};
}

json lognormal_to_json(const LogNormal& dist) { return json{{"mu", dist.mu}, {"sigma", dist.sigma}}; }

}  // namespace

void validate_synthesis_params(const SynthesisParams& params, const DatasetManifest& manifest) {
  const std::size_t n = params.states.size();
  if (n == 0) throw ParamError("synthesis needs at least one state");
  for (TypeId state : params.states) {
    if (!manifest.catalog.contains(state)) throw ParamError("state " + std::to_string(state) + " not in catalog");
  }
  if (params.mean_events_per_patient < 0.0 || !std::isfinite(params.mean_events_per_patient)) {
    throw ParamError("mean_events_per_patient must be a non-negative number");
  }
  if (params.initial.size() != n) throw ParamError("initial must have one weight per state");
  if (params.transitions.size() != n) throw ParamError("transition matrix must have one row per state");
  if (params.durations.size() != n) throw ParamError("durations must have one entry per state");

  auto check_row = [&](const std::vector<double>& row, const std::string& what) {
    if (row.size() != n) throw ParamError(what + " must have " + std::to_string(n) + " entries");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ParamError(what + " has a negative or NaN probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kStochasticTolerance) {
      throw ParamError(what + " sums to " + std::to_string(sum) + ", expected 1");
    }
  };
  check_row(params.initial, "initial distribution");
  for (std::size_t i = 0; i < n; ++i) check_row(params.transitions[i], "transition row " + std::to_string(i));
  for (const auto& d : params.durations) {
    if (!(d.sigma >= 0.0)) throw ParamError("duration sigma must be non-negative");
  }
  if (params.gap && !(params.gap->sigma >= 0.0)) throw ParamError("gap sigma must be non-negative");

  if (params.attributes.size() != manifest.attributes.size()) {
    throw ParamError("need one attribute generator per manifest attribute");
  }
  for (std::size_t a = 0; a < params.attributes.size(); ++a) {
    const auto& gen = params.attributes[a];
    const auto& spec = manifest.attributes[a];
    if (gen.kind == AttributeGenerator::Kind::categorical) {
      if (spec.kind != AttributeKind::categorical || gen.weights.size() != spec.categories.size()) {
        throw ParamError("attribute " + spec.name + ": categorical weights must match its categories");
      }
      const double sum = std::accumulate(gen.weights.begin(), gen.weights.end(), 0.0);
      if (!(sum > 0.0)) throw ParamError("attribute " + spec.name + ": weights must be positive");
    }
    if (gen.kind == AttributeGenerator::Kind::uniform && gen.b < gen.a) {
      throw ParamError("attribute " + spec.name + ": uniform high is below low");
    }
  }
}

SynthesisParams synthesis_params_from_json(const json& doc, const DatasetManifest& manifest) {
  SynthesisParams params;
  try {
    params.patient_count = doc.at("patient_count").get<std::uint64_t>();
    params.seed = doc.value("seed", std::uint64_t{0});
    params.mean_events_per_patient = doc.at("mean_events_per_patient").get<double>();
    for (const auto& name : doc.at("states")) {
      auto id = manifest.catalog.find(name.get<std::string>());
      if (!id) throw ParamError("unknown state '" + name.get<std::string>() + "'");
      params.states.push_back(*id);
    }
    const std::size_t n = params.states.size();
    if (auto it = doc.find("initial"); it != doc.end()) {
      params.initial = it->get<std::vector<double>>();
    } else {
      params.initial.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
    }
    params.transitions = doc.at("transitions").get<std::vector<std::vector<double>>>();
    const auto& durations = doc.at("durations");
    if (durations.is_array()) {
      for (const auto& d : durations) params.durations.push_back(lognormal_from_json(d));
    } else {
      for (TypeId state : params.states) {
        params.durations.push_back(lognormal_from_json(durations.at(manifest.catalog.name(state))));
      }
    }
    if (auto it = doc.find("gap"); it != doc.end() && !it->is_null()) params.gap = lognormal_from_json(*it);

    const json attrs = doc.value("attributes", json::object());
    for (const auto& spec : manifest.attributes) {
      AttributeGenerator gen;
      auto it = attrs.find(spec.name);
      if (it == attrs.end()) {
        gen.kind = AttributeGenerator::Kind::constant;
        gen.a = spec.kind == AttributeKind::categorical ? 0.0 : static_cast<double>(spec.min);
      } else {
        const auto dist = it->at("dist").get<std::string>();
        if (dist == "constant") {
          gen.kind = AttributeGenerator::Kind::constant;
          gen.a = it->at("value").get<double>();
        } else if (dist == "uniform") {
          gen.kind = AttributeGenerator::Kind::uniform;
          gen.a = it->at("low").get<double>();
          gen.b = it->at("high").get<double>();
        } else if (dist == "normal") {
          gen.kind = AttributeGenerator::Kind::normal;
          gen.a = it->at("mean").get<double>();
          gen.b = it->at("sd").get<double>();
        } else if (dist == "categorical") {
          gen.kind = AttributeGenerator::Kind::categorical;
          gen.weights = it->at("weights").get<std::vector<double>>();
        } else {
          throw ParamError("attribute " + spec.name + ": unknown dist '" + dist + "'");
        }
      }
      params.attributes.push_back(std::move(gen));
    }
    for (const auto& [key, value] : attrs.items()) {
      if (!manifest.find_attribute(key)) throw ParamError("attribute '" + key + "' is not in the manifest");
    }
  } catch (const json::exception& e) {
    throw ParamError(std::string("malformed synthesis params: ") + e.what());
  }
  validate_synthesis_params(params, manifest);
  return params;
}

json synthesis_params_to_json(const SynthesisParams& params, const DatasetManifest& manifest) {
  json doc;
  doc["patient_count"] = params.patient_count;
  doc["seed"] = params.seed;
  doc["mean_events_per_patient"] = params.mean_events_per_patient;
  json states = json::array();
  for (TypeId s : params.states) states.push_back(manifest.catalog.name(s));
  doc["states"] = std::move(states);
  doc["initial"] = params.initial;
  doc["transitions"] = params.transitions;
  json durations = json::array();
  for (const auto& d : params.durations) durations.push_back(lognormal_to_json(d));
  doc["durations"] = std::move(durations);
  if (params.gap) doc["gap"] = lognormal_to_json(*params.gap);
  json attrs = json::object();
  for (std::size_t a = 0; a < params.attributes.size() && a < manifest.attributes.size(); ++a) {
    const auto& gen = params.attributes[a];
    json entry;
    switch (gen.kind) {
      case AttributeGenerator::Kind::constant: entry = {{"dist", "constant"}, {"value", gen.a}}; break;
      case AttributeGenerator::Kind::uniform: entry = {{"dist", "uniform"}, {"low", gen.a}, {"high", gen.b}}; break;
      case AttributeGenerator::Kind::normal: entry = {{"dist", "normal"}, {"mean", gen.a}, {"sd", gen.b}}; break;
      case AttributeGenerator::Kind::categorical: entry = {{"dist", "categorical"}, {"weights", gen.weights}}; break;
    }
    attrs[manifest.attributes[a].name] = std::move(entry);
  }
  doc["attributes"] = std::move(attrs);
  return doc;
}

void synthesize_patient(const SynthesisParams& params, std::size_t attribute_count, std::uint64_t index,
                        RawPatient& out) {
  std::mt19937_64 rng(splitmix64(params.seed ^ splitmix64(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  out.id = static_cast<PatientId>(index + 1);
  out.attributes.assign(attribute_count, 0);
  for (std::size_t a = 0; a < attribute_count && a < params.attributes.size(); ++a) {
    const auto& gen = params.attributes[a];
    switch (gen.kind) {
      case AttributeGenerator::Kind::constant:
        out.attributes[a] = std::llround(gen.a);
        break;
      case AttributeGenerator::Kind::uniform:
        out.attributes[a] = std::uniform_int_distribution<AttrValue>(std::llround(gen.a), std::llround(gen.b))(rng);
        break;
      case AttributeGenerator::Kind::normal:
        out.attributes[a] = std::llround(gen.a + gen.b * std::normal_distribution<double>(0.0, 1.0)(rng));
        break;
      case AttributeGenerator::Kind::categorical: {
        const double total = std::accumulate(gen.weights.begin(), gen.weights.end(), 0.0);
        out.attributes[a] = static_cast<AttrValue>(sample_index(gen.weights, unit(rng) * total));
        break;
      }
    }
  }

  std::uint64_t count = 0;
  if (params.mean_events_per_patient > 0.0) {
    count = std::poisson_distribution<std::uint64_t>(params.mean_events_per_patient)(rng);
  }
  out.events.resize(count);
  std::size_t state = sample_index(params.initial, unit(rng));
  Time clock = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (i > 0) state = sample_index(params.transitions[state], unit(rng));
    const Duration length = draw_lognormal(params.durations[state], rng);
    out.events[i] = LowEvent{params.states[state], clock, clock + length};
    clock += length;
    if (params.gap) clock += draw_lognormal(*params.gap, rng);
  }
}

SyntheticSource::SyntheticSource(SynthesisParams params, const DatasetManifest& manifest)
    : params_(std::move(params)), attribute_count_(manifest.attributes.size()) {
  validate_synthesis_params(params_, manifest);
}

void SyntheticSource::fetch(std::size_t index, RawPatient& out) const {
  synthesize_patient(params_, attribute_count_, index, out);
}

EventTable synthesize(const SynthesisParams& params, const DatasetManifest& manifest, unsigned workers) {
  validate_synthesis_params(params, manifest);
  const std::size_t attrs = manifest.attributes.size();
  const std::uint64_t total = params.patient_count;
  workers = std::max(1u, workers);
  const std::uint64_t blocks = std::min<std::uint64_t>(workers, std::max<std::uint64_t>(total, 1));

  std::vector<EventTable> parts(blocks, EventTable(attrs));
  auto run = [&](std::uint64_t block) {
    const std::uint64_t begin = total * block / blocks;
    const std::uint64_t end = total * (block + 1) / blocks;
    parts[block].reserve(end - begin,
                         static_cast<std::size_t>(static_cast<double>(end - begin) * params.mean_events_per_patient));
    RawPatient patient;
    for (std::uint64_t i = begin; i < end; ++i) {
      synthesize_patient(params, attrs, i, patient);
      parts[block].push_back(patient);
    }
  };
  if (blocks == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::uint64_t b = 0; b < blocks; ++b) threads.emplace_back(run, b);
  }

  EventTable table = std::move(parts[0]);
  for (std::uint64_t b = 1; b < blocks; ++b) table.append(parts[b]);
  return table;
}

void write_synthetic_csv(std::ostream& out, const SynthesisParams& params, const DatasetManifest& manifest) {
  validate_synthesis_params(params, manifest);
  EventLogWriter writer(out, manifest);
  RawPatient patient;
  for (std::uint64_t i = 0; i < params.patient_count; ++i) {
    synthesize_patient(params, manifest.attributes.size(), i, patient);
    writer.write(patient);
  }
}

}  // namespace pathflow
