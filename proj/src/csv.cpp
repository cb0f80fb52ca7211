#include "pathflow/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "pathflow/errors.hpp"

namespace pathflow {

bool CsvRecordReader::next(std::vector<std::string>& fields) {
  fields.clear();
  std::streambuf* buf = in_.rdbuf();
  using traits = std::char_traits<char>;
  int c = buf->sgetc();
  if (c == traits::eof()) return false;

  record_line_ = next_line_;
  std::string field;
  bool quoted = false;
  bool after_quote = false;  // inside a quoted field, just saw a quote
  while (true) {
    c = buf->sbumpc();
    if (c == traits::eof()) {
      fields.push_back(std::move(field));
      return true;
    }
    const char ch = traits::to_char_type(c);
    if (quoted) {
      if (after_quote) {
        after_quote = false;
        if (ch == '"') {
          field.push_back('"');
          continue;
        }
        quoted = false;  // closing quote; fall through to unquoted handling
      } else if (ch == '"') {
        after_quote = true;
        continue;
      } else {
        if (ch == '\n') ++next_line_;
        field.push_back(ch);
        continue;
      }
    }
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++next_line_;
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '\r') {
      if (buf->sgetc() == '\n') continue;
      field.push_back(ch);
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else {
      field.push_back(ch);
    }
  }
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

template <typename T>
bool parse_int(std::string_view text, T& value) {
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = first + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc{} && ptr == last;
}

constexpr std::string_view kFixedColumns[] = {"patient_id", "type_name", "start", "end"};

}  // namespace

EventLogReader::EventLogReader(std::istream& in, const DatasetManifest& manifest, ReadOptions options)
    : records_(in), manifest_(manifest), options_(options) {
  std::vector<std::string> header;
  if (!records_.next(header)) {
    empty_input_ = true;
    return;
  }
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  if (header.size() < 4) throw ParseError(records_.line(), "header needs patient_id,type_name,start,end");
  for (std::size_t i = 0; i < 4; ++i) {
    if (header[i] != kFixedColumns[i]) {
      throw ParseError(records_.line(), "header column " + std::to_string(i + 1) + " must be '" +
                                            std::string(kFixedColumns[i]) + "', got '" + header[i] + "'");
    }
  }
  attr_columns_.assign(manifest.attributes.size(), 0);
  std::vector<bool> seen(manifest.attributes.size(), false);
  for (std::size_t col = 4; col < header.size(); ++col) {
    auto attr = manifest.find_attribute(header[col]);
    if (!attr) throw ManifestError("event log column '" + header[col] + "' is not a manifest attribute");
    if (seen[*attr]) throw ManifestError("event log repeats attribute column '" + header[col] + "'");
    seen[*attr] = true;
    attr_columns_[*attr] = col;
  }
  for (std::size_t a = 0; a < seen.size(); ++a) {
    if (!seen[a]) throw ManifestError("event log lacks attribute column '" + manifest.attributes[a].name + "'");
  }
  column_count_ = header.size();
}

EventLogReader::Row EventLogReader::read_row(RawPatient& patient, bool& has_event, LowEvent& event) {
  if (!records_.next(fields_)) return Row::end;
  const std::size_t line = records_.line();
  if (fields_.size() == 1 && fields_[0].empty()) return Row::skipped;  // blank line
  auto fail = [&](std::string message) {
    issues_.push_back({line, std::move(message)});
    return Row::skipped;
  };
  if (fields_.size() != column_count_) {
    return fail("expected " + std::to_string(column_count_) + " fields, got " + std::to_string(fields_.size()));
  }
  if (!parse_int(fields_[0], patient.id)) return fail("bad patient_id '" + fields_[0] + "'");

  patient.attributes.resize(manifest_.attributes.size());
  for (std::size_t a = 0; a < manifest_.attributes.size(); ++a) {
    const auto& spec = manifest_.attributes[a];
    const auto& text = fields_[attr_columns_[a]];
    if (spec.kind == AttributeKind::categorical) {
      auto index = spec.category_index(text);
      if (!index) return fail("unknown category '" + text + "' for attribute " + spec.name);
      patient.attributes[a] = *index;
    } else if (!parse_int(text, patient.attributes[a])) {
      return fail("bad integer '" + text + "' for attribute " + spec.name);
    }
  }

  has_event = !fields_[1].empty();
  if (!has_event) return Row::ok;
  auto type = manifest_.catalog.find(fields_[1]);
  if (!type) return fail("unknown event type '" + fields_[1] + "'");
  event.type = *type;
  if (!parse_int(fields_[2], event.start)) return fail("bad start '" + fields_[2] + "'");
  if (!parse_int(fields_[3], event.end)) return fail("bad end '" + fields_[3] + "'");
  if (event.end < event.start) return fail("end precedes start");
  return Row::ok;
}

namespace {
void sort_events(RawPatient& p) {
  std::stable_sort(p.events.begin(), p.events.end(),
                   [](const LowEvent& a, const LowEvent& b) { return a.start < b.start; });
}
}  // namespace

void EventLogReader::buffer_all() {
  buffered_ = true;
  std::unordered_map<PatientId, std::size_t> index;
  RawPatient row;
  LowEvent event;
  bool has_event = false;
  while (true) {
    const Row r = read_row(row, has_event, event);
    if (r == Row::end) break;
    if (r == Row::skipped) continue;
    auto [it, inserted] = index.try_emplace(row.id, buffer_.size());
    if (inserted) {
      buffer_.push_back(RawPatient{row.id, row.attributes, {}});
    }
    if (has_event) buffer_[it->second].events.push_back(event);
  }
  for (auto& p : buffer_) sort_events(p);
}

bool EventLogReader::next(RawPatient& out) {
  if (empty_input_) return false;
  if (!options_.sorted_by_patient) {
    if (!buffered_) buffer_all();
    if (emit_cursor_ >= buffer_.size()) return false;
    out = std::move(buffer_[emit_cursor_++]);
    return true;
  }

  RawPatient row;
  LowEvent event;
  bool has_event = false;
  while (true) {
    const Row r = read_row(row, has_event, event);
    if (r == Row::end) break;
    if (r == Row::skipped) continue;
    if (have_pending_ && row.id == pending_.id) {
      if (has_event) pending_.events.push_back(event);
      continue;
    }
    if (finished_.contains(row.id)) {
      issues_.push_back({records_.line(), "patient " + std::to_string(row.id) +
                                              " reappears after its group ended (input not sorted by patient)"});
      continue;
    }
    RawPatient fresh{row.id, row.attributes, {}};
    if (has_event) fresh.events.push_back(event);
    if (have_pending_) {
      finished_.insert(pending_.id);
      out = std::move(pending_);
      sort_events(out);
      pending_ = std::move(fresh);
      return true;
    }
    pending_ = std::move(fresh);
    have_pending_ = true;
  }
  if (!have_pending_) return false;
  have_pending_ = false;
  finished_.insert(pending_.id);
  out = std::move(pending_);
  sort_events(out);
  return true;
}

EventTable read_event_log(std::istream& in, const DatasetManifest& manifest, ReadOptions options,
                          std::vector<ParseIssue>* issues) {
  EventLogReader reader(in, manifest, options);
  EventTable table(manifest.attributes.size());
  RawPatient patient;
  while (reader.next(patient)) table.push_back(patient);
  table.set_parse_errors(reader.issues().size());
  if (issues) issues->insert(issues->end(), reader.issues().begin(), reader.issues().end());
  return table;
}

EventTable read_event_log(const std::filesystem::path& path, const DatasetManifest& manifest,
                          ReadOptions options, std::vector<ParseIssue>* issues) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return read_event_log(in, manifest, options, issues);
}

EventLogWriter::EventLogWriter(std::ostream& out, const DatasetManifest& manifest)
    : out_(out), manifest_(manifest) {
  out_ << "patient_id,type_name,start,end";
  for (const auto& attr : manifest.attributes) out_ << ',' << csv_escape(attr.name);
  out_ << '\n';
}

void EventLogWriter::write(const RawPatient& patient) {
  attr_suffix_.clear();
  for (std::size_t a = 0; a < manifest_.attributes.size(); ++a) {
    const auto& spec = manifest_.attributes[a];
    const AttrValue value = a < patient.attributes.size() ? patient.attributes[a] : 0;
    attr_suffix_.push_back(',');
    if (spec.kind == AttributeKind::categorical) {
      if (value < 0 || static_cast<std::size_t>(value) >= spec.categories.size()) {
        throw ManifestError("category index " + std::to_string(value) + " out of range for " + spec.name);
      }
      attr_suffix_ += csv_escape(spec.categories[static_cast<std::size_t>(value)]);
    } else {
      attr_suffix_ += std::to_string(value);
    }
  }
  if (patient.events.empty()) {
    out_ << patient.id << ",,," << attr_suffix_ << '\n';
    return;
  }
  for (const auto& e : patient.events) {
    out_ << patient.id << ',' << csv_escape(manifest_.catalog.name(e.type)) << ',' << e.start << ',' << e.end
         << attr_suffix_ << '\n';
  }
}

}  // namespace pathflow
