#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pathflow/dataset.hpp"

namespace pathflow {

/// Splits an RFC-4180 stream into records. Quoted fields may contain
/// commas, doubled quotes and line breaks; CRLF and LF are both accepted.
class CsvRecordReader {
 public:
  explicit CsvRecordReader(std::istream& in) : in_(in) {}

  /// False at end of input. `line()` is then the line the record started on.
  bool next(std::vector<std::string>& fields);
  std::size_t line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  std::size_t next_line_ = 1;
  std::size_t record_line_ = 0;
};

/// Quotes `field` when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view field);

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ReadOptions {
  /// Rows arrive grouped by patient; patients are emitted as soon as their
  /// group ends instead of being buffered until end of input.
  bool sorted_by_patient = false;
};

/// Streams RawPatient records out of an event log with columns
/// `patient_id,type_name,start,end,<attribute names...>`.
///
/// Rows with an unknown type name or a malformed value are skipped and
/// recorded in issues(). A row with an empty type_name declares a patient
/// (and its attributes) without adding an event. Patients are emitted in
/// order of first appearance with their events sorted by start.
class EventLogReader {
 public:
  /// Reads the header. Throws ParseError for a malformed header and
  /// ManifestError for attribute columns the manifest does not declare.
  EventLogReader(std::istream& in, const DatasetManifest& manifest, ReadOptions options = {});

  bool next(RawPatient& out);
  const std::vector<ParseIssue>& issues() const noexcept { return issues_; }

 private:
  enum class Row { ok, skipped, end };
  Row read_row(RawPatient& patient, bool& has_event, LowEvent& event);
  void buffer_all();

  CsvRecordReader records_;
  const DatasetManifest& manifest_;
  ReadOptions options_;
  std::vector<std::size_t> attr_columns_;  // manifest attribute -> csv column
  std::size_t column_count_ = 0;
  bool empty_input_ = false;
  std::vector<std::string> fields_;
  std::vector<ParseIssue> issues_;

  // sorted_by_patient state
  bool have_pending_ = false;
  RawPatient pending_;
  std::unordered_set<PatientId> finished_;

  // buffered state
  bool buffered_ = false;
  std::size_t emit_cursor_ = 0;
  std::vector<RawPatient> buffer_;
};

/// Reads a whole event log into a columnar table. Issues are appended to
/// `issues` when given; the table's parse_errors() holds their count.
EventTable read_event_log(std::istream& in, const DatasetManifest& manifest, ReadOptions options = {},
                          std::vector<ParseIssue>* issues = nullptr);
EventTable read_event_log(const std::filesystem::path& path, const DatasetManifest& manifest,
                          ReadOptions options = {}, std::vector<ParseIssue>* issues = nullptr);

/// Writes the documented CSV form, one row per event.
class EventLogWriter {
 public:
  EventLogWriter(std::ostream& out, const DatasetManifest& manifest);
  void write(const RawPatient& patient);

 private:
  std::ostream& out_;
  const DatasetManifest& manifest_;
  std::string attr_suffix_;
};

}  // namespace pathflow
