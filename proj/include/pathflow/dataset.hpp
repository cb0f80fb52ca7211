#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pathflow/manifest.hpp"

namespace pathflow {

/// One timestamped low-level event as it appears in a log row.
struct EventRecord {
  PatientId patient_id = 0;
  TypeId type = 0;
  Time start = 0;
  Time end = 0;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// A low-level event once grouped under its patient.
struct LowEvent {
  TypeId type = 0;
  Time start = 0;
  Time end = 0;

  friend bool operator==(const LowEvent&, const LowEvent&) = default;
};

/// All low-level events of one patient, sorted by start.
struct RawPatient {
  PatientId id = 0;
  std::vector<AttrValue> attributes;
  std::vector<LowEvent> events;

  friend bool operator==(const RawPatient&, const RawPatient&) = default;
};

/// Random-access patient supply for the engine. fetch() must be safe to call
/// concurrently from several workers.
class PatientSource {
 public:
  virtual ~PatientSource() = default;
  virtual std::size_t size() const = 0;
  virtual void fetch(std::size_t index, RawPatient& out) const = 0;
  /// Low-level events across all patients, when known without a full scan.
  virtual std::uint64_t event_count() const { return 0; }
  /// Rows rejected while the source was loaded.
  virtual std::uint64_t parse_errors() const { return 0; }
};

/// Columnar in-memory store of raw patients.
class EventTable final : public PatientSource {
 public:
  EventTable() = default;
  explicit EventTable(std::size_t attribute_count) : attribute_count_(attribute_count) {}

  void reserve(std::size_t patients, std::size_t events);
  void push_back(const RawPatient& patient);
  void append(const EventTable& other);

  std::size_t size() const override { return ids_.size(); }
  void fetch(std::size_t index, RawPatient& out) const override;
  std::uint64_t event_count() const override { return types_.size(); }
  std::uint64_t parse_errors() const override { return parse_errors_; }
  void set_parse_errors(std::uint64_t n) { parse_errors_ = n; }

  std::size_t attribute_count() const noexcept { return attribute_count_; }
  RawPatient at(std::size_t index) const {
    RawPatient p;
    fetch(index, p);
    return p;
  }

 private:
  std::size_t attribute_count_ = 0;
  std::vector<PatientId> ids_;
  std::vector<AttrValue> attributes_;    // attribute_count_ per patient
  std::vector<std::uint64_t> offsets_{0};  // event range per patient
  std::vector<TypeId> types_;
  std::vector<Time> starts_;
  std::vector<Time> ends_;
  std::uint64_t parse_errors_ = 0;
};

/// Non-owning view over a vector of RawPatient.
class VectorSource final : public PatientSource {
 public:
  explicit VectorSource(const std::vector<RawPatient>& patients) : patients_(&patients) {}
  std::size_t size() const override { return patients_->size(); }
  void fetch(std::size_t index, RawPatient& out) const override { out = (*patients_)[index]; }

 private:
  const std::vector<RawPatient>* patients_;
};

}  // namespace pathflow
