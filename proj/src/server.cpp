#include "pathflow/server.hpp"

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include <httplib.h>

#include "pathflow/csv.hpp"
#include "pathflow/errors.hpp"
#include "pathflow/filter_json.hpp"
#include "pathflow/layout.hpp"
#include "pathflow/manifest_json.hpp"
#include "pathflow/query.hpp"

namespace pathflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

ServerConfig server_config_from_json(const json& doc, const fs::path& base) {
  try {
    ServerConfig config;
    for (const auto& entry : doc.at("datasets")) {
      DatasetConfig ds;
      ds.name = entry.at("name").get<std::string>();
      ds.manifest = resolve(base, entry.at("manifest").get<std::string>());
      if (entry.contains("data")) ds.data = resolve(base, entry["data"].get<std::string>());
      if (entry.contains("synth")) ds.synth = resolve(base, entry["synth"].get<std::string>());
      if (ds.data.has_value() == ds.synth.has_value()) {
        throw ParseError(0, "dataset '" + ds.name + "' needs exactly one of \"data\" or \"synth\"");
      }
      config.datasets.push_back(std::move(ds));
    }
    if (doc.contains("history_dir")) config.history_dir = resolve(base, doc["history_dir"].get<std::string>());
    config.host = doc.value("host", config.host);
    config.port = doc.value("port", config.port);
    config.workers = doc.value("workers", config.workers);
    config.http_threads = doc.value("http_threads", config.http_threads);
    config.frame_max_nodes = doc.value("frame_max_nodes", config.frame_max_nodes);
    return config;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("malformed server config: ") + e.what());
  }
}

ServerConfig load_server_config(const fs::path& path) {
  return server_config_from_json(read_json_file(path), path.parent_path());
}

namespace {

enum class RunState { idle, running, done, cancelled, failed };

std::string_view state_name(RunState s) {
  switch (s) {
    case RunState::idle: return "idle";
    case RunState::running: return "running";
    case RunState::done: return "done";
    case RunState::cancelled: return "cancelled";
    case RunState::failed: return "failed";
  }
  return "idle";
}

struct Dataset {
  std::string name;
  std::shared_ptr<const DatasetManifest> manifest;
  std::unique_ptr<PatientSource> source;
};

struct Session {
  std::string id;
  const Dataset* dataset = nullptr;
  std::unique_ptr<HistoryStore> history;

  mutable std::mutex mutex;
  std::condition_variable changed;
  RunState state = RunState::idle;
  std::uint64_t run = 0;  // incremented per started run
  FilterSpec filter;
  SnapshotPtr latest;
  std::optional<EntryId> last_entry;
  std::string failure;
  std::atomic<bool> cancel{false};
  std::jthread runner;
};

json error_body(std::string_view message) { return json{{"error", message}}; }

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::optional<double> query_number(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto text = req.get_param_value(key);
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw ParamError(std::string("bad number for ") + key);
  return value;
}

EntryId parse_entry_id(const std::string& text) {
  EntryId id = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw NotFoundError("bad history entry id");
  return id;
}

}  // namespace

struct Server::Impl {
  ServerConfig config;
  std::map<std::string, Dataset> datasets;
  httplib::Server http;
  std::thread listener;
  int bound_port = 0;
  std::atomic<bool> stopping{false};

  std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::uint64_t session_counter = 0;

  explicit Impl(ServerConfig cfg) : config(std::move(cfg)) {
    for (const auto& ds : config.datasets) {
      Dataset d;
      d.name = ds.name;
      d.manifest = std::make_shared<const DatasetManifest>(load_valid_manifest(ds.manifest));
      if (ds.data) {
        d.source = std::make_unique<EventTable>(read_event_log(*ds.data, *d.manifest));
      } else {
        d.source = std::make_unique<SyntheticSource>(
            synthesis_params_from_json(read_json_file(*ds.synth), *d.manifest), *d.manifest);
      }
      datasets.emplace(d.name, std::move(d));
    }
    if (config.history_dir) fs::create_directories(*config.history_dir);
    const unsigned threads = std::max(4u, config.http_threads);
    http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    routes();
  }

  ~Impl() { shutdown(); }

  void shutdown() {
    if (stopping.exchange(true)) return;
    std::vector<std::shared_ptr<Session>> all;
    {
      std::unique_lock lock(sessions_mutex);
      for (auto& [id, s] : sessions) all.push_back(s);
    }
    for (auto& s : all) {
      s->cancel = true;
      s->changed.notify_all();
    }
    http.stop();
    if (listener.joinable()) listener.join();
    for (auto& s : all) {
      std::jthread runner;
      {
        std::lock_guard lock(s->mutex);
        runner = std::move(s->runner);
      }
      if (runner.joinable()) runner.join();
    }
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
  }

  std::shared_ptr<Session> create_session(const std::string& dataset_name) {
    auto it = datasets.find(dataset_name);
    if (it == datasets.end()) throw NotFoundError("unknown dataset '" + dataset_name + "'");
    auto session = std::make_shared<Session>();
    session->dataset = &it->second;
    std::unique_lock lock(sessions_mutex);
    char buf[40];
    std::snprintf(buf, sizeof buf, "s%llu-%08llx", static_cast<unsigned long long>(++session_counter),
                  static_cast<unsigned long long>(id_rng() & 0xffffffffULL));
    session->id = buf;
    std::optional<fs::path> file;
    if (config.history_dir) file = *config.history_dir / (session->id + ".jsonl");
    session->history = std::make_unique<HistoryStore>(it->second.manifest, file);
    sessions.emplace(session->id, session);
    return session;
  }

  json session_json(const Session& s) {
    std::lock_guard lock(s.mutex);
    json out{{"session_id", s.id},
             {"dataset", s.dataset->name},
             {"state", state_name(s.state)},
             {"filter", filter_to_json(s.filter, *s.dataset->manifest)},
             {"total", s.dataset->source->size()}};
    if (s.latest) {
      out["version"] = s.latest->version;
      out["processed"] = s.latest->processed;
    }
    if (!s.failure.empty()) out["failure"] = s.failure;
    return out;
  }

  /// Starts a run; returns false when one is already active.
  bool start_run(const std::shared_ptr<Session>& s, FilterSpec filter, std::chrono::milliseconds quantum,
                 std::string label) {
    std::jthread previous;
    {
      std::lock_guard lock(s->mutex);
      if (s->state == RunState::running) return false;
      previous = std::move(s->runner);
    }
    if (previous.joinable()) previous.join();
    std::lock_guard lock(s->mutex);
    if (s->state == RunState::running) return false;
    s->state = RunState::running;
    s->filter = filter;
    s->cancel = false;
    s->failure.clear();
    s->last_entry.reset();
    ++s->run;
    const std::uint64_t first_version = s->latest ? s->latest->version + 1 : 1;
    if (label.empty()) label = "run " + std::to_string(s->run);
    s->runner = std::jthread([this, s, filter = std::move(filter), quantum, first_version, label = std::move(label)] {
      ProgressiveOptions options;
      options.quantum = quantum;
      options.workers = config.workers;
      options.first_version = first_version;
      options.cancel = &s->cancel;
      auto sink = [&](const SnapshotPtr& snap) {
        {
          std::lock_guard lock(s->mutex);
          s->latest = snap;
        }
        s->changed.notify_all();
      };
      try {
        auto final = progressive_build(*s->dataset->source, s->dataset->manifest, filter, options, sink);
        std::optional<EntryId> entry;
        if (final->complete()) entry = s->history->put(filter, final, label);
        std::lock_guard lock(s->mutex);
        s->last_entry = entry;
        s->state = final->cancelled ? RunState::cancelled : RunState::done;
      } catch (const std::exception& e) {
        std::lock_guard lock(s->mutex);
        s->state = RunState::failed;
        s->failure = e.what();
      }
      s->changed.notify_all();
    });
    return true;
  }

  json snapshot_frame(const TreeSnapshot& snap) const {
    json frame = snapshot_to_json(snap, TreeJsonOptions{false, config.frame_max_nodes});
    frame["kind"] = "snapshot";
    return frame;
  }

  void stream(const std::shared_ptr<Session>& s, httplib::Response& res) {
    res.set_chunked_content_provider("application/x-ndjson", [this, s](std::size_t, httplib::DataSink& sink) {
      std::uint64_t sent = 0;
      bool any = false;
      auto write = [&](const json& frame) {
        const std::string line = frame.dump() + "\n";
        return sink.write(line.data(), line.size());
      };
      while (!stopping) {
        SnapshotPtr snap;
        RunState state;
        std::optional<EntryId> entry;
        std::string failure;
        {
          std::unique_lock lock(s->mutex);
          s->changed.wait_for(lock, std::chrono::milliseconds(250), [&] {
            return stopping || (s->latest && (!any || s->latest->version > sent)) ||
                   (s->state != RunState::running && s->state != RunState::idle);
          });
          snap = s->latest;
          state = s->state;
          entry = s->last_entry;
          failure = s->failure;
        }
        // A stream opened on an idle session waits for the next run.
        if (snap && (!any || snap->version > sent) && state != RunState::idle) {
          if (!write(snapshot_frame(*snap))) return false;
          sent = snap->version;
          any = true;
        }
        const bool finished = state == RunState::done || state == RunState::cancelled || state == RunState::failed;
        if (finished && (!snap || snap->final || state == RunState::failed)) {
          json done{{"kind", state == RunState::failed ? "error" : "done"}, {"state", state_name(state)}};
          if (snap) {
            done["version"] = snap->version;
            done["processed"] = snap->processed;
            done["total"] = snap->total;
          }
          if (entry) done["history_entry"] = *entry;
          if (state == RunState::failed) done["message"] = failure;
          write(done);
          sink.done();
          return true;
        }
        if (!sink.is_writable()) return false;
      }
      sink.done();
      return true;
    });
  }

  template <typename F>
  httplib::Server::Handler guarded(F body) {
    return [body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
      try {
        body(req, res);
      } catch (const NotFoundError& e) {
        reply(res, 404, error_body(e.what()));
      } catch (const ParamError& e) {
        reply(res, 400, error_body(e.what()));
      } catch (const QueryError& e) {
        reply(res, 400, error_body(e.what()));
      } catch (const json::exception& e) {
        reply(res, 400, error_body(std::string("bad request body: ") + e.what()));
      } catch (const std::exception& e) {
        reply(res, 500, error_body(e.what()));
      }
    };
  }

  SnapshotPtr latest_or_throw(const Session& s) {
    std::lock_guard lock(s.mutex);
    if (!s.latest) throw NotFoundError("session has no snapshot yet");
    return s.latest;
  }

  void routes() {
    http.Get("/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& [name, ds] : datasets) {
        list.push_back({{"name", name}, {"patients", ds.source->size()}, {"manifest", manifest_to_json(*ds.manifest)}});
      }
      reply(res, 200, list);
    }));

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      if (!body.contains("dataset") || !body["dataset"].is_string()) throw ParamError("missing \"dataset\"");
      auto s = create_session(body["dataset"].get<std::string>());
      reply(res, 201, {{"session_id", s->id}});
    }));

    http.Get("/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, session_json(*find_session(req.path_params.at("id"))));
    }));

    http.Post("/sessions/:id/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      const auto& manifest = *s->dataset->manifest;
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      FilterSpec filter;
      try {
        if (body.contains("filter")) filter = filter_from_json(body["filter"], manifest);
      } catch (const QueryError& e) {
        reply(res, 400, {{"error", "invalid filter"},
                         {"violations", json::array({{{"code", "bad-filter"}, {"subject", ""}, {"message", e.what()}}})}});
        return;
      }
      if (auto violations = validate_filter(filter, manifest); !violations.empty()) {
        reply(res, 400, {{"error", "invalid filter"}, {"violations", violations_to_json(violations)}});
        return;
      }
      const auto quantum_ms = body.value("quantum_ms", std::int64_t{1000});
      if (quantum_ms <= 0) throw ParamError("quantum_ms must be positive");
      if (!start_run(s, std::move(filter), std::chrono::milliseconds(quantum_ms), body.value("label", std::string{}))) {
        reply(res, 409, error_body("a run is already active"));
        return;
      }
      reply(res, 202, session_json(*s));
    }));

    http.Post("/sessions/:id/cancel", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      s->cancel = true;
      reply(res, 200, session_json(*s));
    }));

    http.Get("/sessions/:id/snapshots", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<Session> s;
      try {
        s = find_session(req.path_params.at("id"));
      } catch (const NotFoundError& e) {
        res.status = 404;
        res.set_content(json{{"kind", "error"}, {"status", 404}, {"message", e.what()}}.dump() + "\n",
                        "application/x-ndjson");
        return;
      }
      stream(s, res);
    });

    http.Get("/sessions/:id/layout", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      LayoutParams params;
      if (auto v = query_number(req, "vw")) params.viewport_width = *v;
      if (auto v = query_number(req, "vh")) params.viewport_height = *v;
      if (auto v = query_number(req, "minpx")) params.min_node_height_px = *v;
      if (auto v = query_number(req, "scale")) params.duration_scale = *v;
      if (req.has_param("mode")) {
        auto mode = parse_width_mode(req.get_param_value("mode"));
        if (!mode) throw ParamError("bad width mode");
        params.width_mode = *mode;
      }
      SnapshotPtr snap;
      if (req.has_param("entry")) {
        snap = s->history->get(parse_entry_id(req.get_param_value("entry"))).snapshot;
      } else {
        snap = latest_or_throw(*s);
      }
      json body{{"version", snap->version},
                {"processed", snap->processed},
                {"total", snap->total},
                {"rects", rects_to_json(layout_icicle(*snap, params), *s->dataset->manifest)}};
      reply(res, 200, body);
    }));

    http.Get("/sessions/:id/distribution", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      const auto& manifest = *s->dataset->manifest;
      std::vector<TypeId> path;
      try {
        path = parse_path(req.get_param_value("path"), manifest);
      } catch (const QueryError& e) {
        throw NotFoundError(e.what());
      }
      const auto selector = parse_selector(req.has_param("selector") ? req.get_param_value("selector") : "duration", manifest);
      const auto snap = latest_or_throw(*s);
      reply(res, 200, distribution_to_json(node_distribution(*snap, path, selector), manifest));
    }));

    http.Get("/sessions/:id/history", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      json list = json::array();
      for (const auto& entry : s->history->list()) list.push_back(entry_to_json(entry, *s->dataset->manifest, false));
      reply(res, 200, list);
    }));

    http.Get("/sessions/:id/history/:entry", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      const auto entry = s->history->get(parse_entry_id(req.path_params.at("entry")));
      reply(res, 200, entry_to_json(entry, *s->dataset->manifest, true));
    }));

    http.Get("/sessions/:id/history/:a/diff/:b", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = find_session(req.path_params.at("id"));
      const auto a = s->history->get(parse_entry_id(req.path_params.at("a")));
      const auto b = s->history->get(parse_entry_id(req.path_params.at("b")));
      reply(res, 200, diff_to_json(diff_trees(*a.snapshot, *b.snapshot), *s->dataset->manifest));
    }));
  }
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() = default;

namespace {

int bind_server(Server::Impl& impl) {
  if (impl.config.port == 0) {
    impl.bound_port = impl.http.bind_to_any_port(impl.config.host);
    if (impl.bound_port <= 0) throw Error("cannot bind " + impl.config.host);
  } else {
    if (!impl.http.bind_to_port(impl.config.host, impl.config.port)) {
      throw Error("cannot bind " + impl.config.host + ":" + std::to_string(impl.config.port));
    }
    impl.bound_port = impl.config.port;
  }
  return impl.bound_port;
}

}  // namespace

int Server::start() {
  auto& impl = *impl_;
  bind_server(impl);
  impl.listener = std::thread([&impl] { impl.http.listen_after_bind(); });
  impl.http.wait_until_ready();
  return impl.bound_port;
}

void Server::run() {
  bind_server(*impl_);
  impl_->http.listen_after_bind();
}

void Server::stop() { impl_->shutdown(); }

int Server::port() const noexcept { return impl_->bound_port; }

}  // namespace pathflow
