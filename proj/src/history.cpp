#include "pathflow/history.hpp"

#include <chrono>
#include <fstream>
#include <mutex>

#include "pathflow/errors.hpp"
#include "pathflow/filter_json.hpp"
#include "pathflow/tree_json.hpp"

namespace pathflow {

using nlohmann::json;

json snapshot_to_json(const TreeSnapshot& snapshot, const TreeJsonOptions& options) {
  json doc{{"version", snapshot.version},
           {"processed", snapshot.processed},
           {"total", snapshot.total},
           {"elapsed_ms", static_cast<double>(snapshot.elapsed.count()) / 1000.0},
           {"elapsed_us", snapshot.elapsed.count()},
           {"errors", snapshot.errors},
           {"final", snapshot.final},
           {"cancelled", snapshot.cancelled}};
  if (snapshot.tree) doc["tree"] = tree_to_json(*snapshot.tree, options);
  return doc;
}

SnapshotPtr snapshot_from_json(const json& doc, std::shared_ptr<const DatasetManifest> manifest) {
  try {
    auto snap = std::make_shared<TreeSnapshot>();
    snap->version = doc.at("version").get<std::uint64_t>();
    snap->processed = doc.at("processed").get<std::uint64_t>();
    snap->total = doc.at("total").get<std::uint64_t>();
    snap->elapsed = std::chrono::microseconds(doc.value("elapsed_us", std::int64_t{0}));
    snap->errors = doc.value("errors", std::uint64_t{0});
    snap->final = doc.at("final").get<bool>();
    snap->cancelled = doc.value("cancelled", false);
    if (auto it = doc.find("tree"); it != doc.end()) {
      snap->tree = std::make_shared<const AggregateTree>(tree_from_json(*it, std::move(manifest)));
    }
    return snap;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed snapshot: ") + e.what());
  }
}

json entry_to_json(const HistoryEntry& entry, const DatasetManifest& manifest, bool with_tree) {
  json doc{{"id", entry.id},
           {"label", entry.label},
           {"created_at", entry.created_at},
           {"filter", filter_to_json(entry.filter, manifest)}};
  if (entry.snapshot) {
    if (with_tree) {
      doc["snapshot"] = snapshot_to_json(*entry.snapshot, TreeJsonOptions{false, 0});
    } else {
      TreeSnapshot meta = *entry.snapshot;
      meta.tree.reset();
      doc["snapshot"] = snapshot_to_json(meta);
      doc["snapshot"]["patients"] = entry.snapshot->tree ? entry.snapshot->tree->patients() : 0;
    }
  }
  return doc;
}

HistoryEntry entry_from_json(const json& doc, std::shared_ptr<const DatasetManifest> manifest) {
  try {
    HistoryEntry entry;
    entry.id = doc.at("id").get<EntryId>();
    entry.label = doc.value("label", std::string{});
    entry.created_at = doc.at("created_at").get<std::int64_t>();
    entry.filter = filter_from_json(doc.at("filter"), *manifest);
    entry.snapshot = snapshot_from_json(doc.at("snapshot"), std::move(manifest));
    return entry;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed history entry: ") + e.what());
  }
}

bool same_entry(const HistoryEntry& a, const HistoryEntry& b) {
  if (a.id != b.id || a.label != b.label || a.created_at != b.created_at || !(a.filter == b.filter)) return false;
  if (!a.snapshot || !b.snapshot) return a.snapshot == b.snapshot;
  const auto& x = *a.snapshot;
  const auto& y = *b.snapshot;
  if (x.version != y.version || x.processed != y.processed || x.total != y.total || x.elapsed != y.elapsed ||
      x.errors != y.errors || x.final != y.final || x.cancelled != y.cancelled) {
    return false;
  }
  if (!x.tree || !y.tree) return x.tree == y.tree;
  return *x.tree == *y.tree;
}

HistoryStore::HistoryStore(std::shared_ptr<const DatasetManifest> manifest, std::optional<std::filesystem::path> file)
    : manifest_(std::move(manifest)), file_(std::move(file)) {
  if (file_ && std::filesystem::exists(*file_)) load();
}

void HistoryStore::load() {
  std::ifstream in(*file_);
  if (!in) throw Error("cannot open history file " + file_->string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      entries_.push_back(entry_from_json(json::parse(line), manifest_));
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("history file: ") + e.what());
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

EntryId HistoryStore::put(const FilterSpec& filter, SnapshotPtr snapshot, std::string label) {
  if (!snapshot || !snapshot->final || snapshot->processed != snapshot->total || !snapshot->tree) {
    throw QueryError("history stores only complete final snapshots");
  }
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  std::unique_lock lock(mutex_);
  HistoryEntry entry{entries_.empty() ? 1 : entries_.back().id + 1, filter, std::move(snapshot), now,
                     std::move(label)};
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    out << entry_to_json(entry, *manifest_).dump() << '\n';
    if (!out) throw Error("cannot append to history file " + file_->string());
  }
  entries_.push_back(std::move(entry));
  return entries_.back().id;
}

HistoryEntry HistoryStore::get(EntryId id) const {
  std::shared_lock lock(mutex_);
  for (const auto& entry : entries_) {
    if (entry.id == id) return entry;
  }
  throw NotFoundError("no history entry " + std::to_string(id));
}

std::vector<HistoryEntry> HistoryStore::list() const {
  std::shared_lock lock(mutex_);
  return entries_;
}

std::size_t HistoryStore::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace pathflow
