#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathflow/history.hpp"
#include "pathflow/synth.hpp"

namespace pathflow {

/// One registered dataset: a manifest plus either an event-log CSV or
/// synthesis parameters generated on demand.
struct DatasetConfig {
  std::string name;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> synth;
};

struct ServerConfig {
  std::vector<DatasetConfig> datasets;
  /// When set, each session appends its history to <dir>/<session>.jsonl.
  std::optional<std::filesystem::path> history_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  unsigned workers = 0;       // engine threads per run; 0 = hardware
  unsigned http_threads = 32; // streams hold a thread each
  std::size_t frame_max_nodes = 10000;
};

/// Relative paths resolve against the config file's directory.
ServerConfig server_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base = {});
ServerConfig load_server_config(const std::filesystem::path& path);

/// Session-oriented HTTP service. Streams are newline-delimited JSON frames
/// over chunked responses.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port. Throws Error when binding fails.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace pathflow
