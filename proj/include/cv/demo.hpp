// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cv::notify {
class Transport;
}

namespace cv::demo {

// HTTP ---------------------------------------------------------------------

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
};

/// Parses the request line of an HTTP/1.x request head. Returns nullopt
/// if it is malformed.
std::optional<Request> parse_request(std::string_view head);

std::string make_response(int status, std::string_view content_type, std::string_view body);

struct HttpResult {
  enum class Outcome { ok, timeout, connect_error, bad_reply };
  Outcome outcome = Outcome::connect_error;
  int status = 0;
  std::string body;
};

/// One GET on a fresh connection.
HttpResult http_get(const std::string& host, int port, const std::string& target,
                    std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// `host:port`; throws std::invalid_argument on anything else.
std::pair<std::string, int> split_host_port(const std::string& text);

/// Text of the element with id `id` in a page served by Server, if any.
std::optional<std::string> element_text(const std::string& page, const std::string& id);

// Server -------------------------------------------------------------------

enum class NotifyMode { signal, poll, both, none };
NotifyMode parse_notify_mode(const std::string& text);
/// Null for NotifyMode::none.
std::shared_ptr<notify::Transport> make_transport(NotifyMode mode, const std::filesystem::path& config);

struct ServerConfig {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 0;
  std::filesystem::path config;
  /// Sleep between synchronization points. 0 synchronizes on every
  /// request, a negative value never synchronizes.
  int sync_ms = 100;
  NotifyMode notify = NotifyMode::both;
  /// Re-read the file through a fresh handle at every tick instead of
  /// synchronizing only when a change was announced.
  bool force_reload = false;
  std::size_t workers = 4;
};

struct ServerStats {
  std::uint64_t requests = 0;
  std::uint64_t replies = 0;
  std::uint64_t syncs = 0;
};

/// Localized page server. One thread owns the Context and publishes an
/// immutable snapshot of every value; request threads only read snapshots.
/// GET `/` renders the page (`?session=x` binds the `session` layer),
/// GET `/_sync?ms=N` changes the sync interval.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Parses the configuration, binds, and starts all threads. Returns the port.
  int start();
  void stop();
  int port() const noexcept { return port_; }
  ServerStats stats() const;
  void set_sync_interval(int ms);

 private:
  struct State;
  std::unique_ptr<State> state_;
  int port_ = 0;
};

/// Runs a server until SIGINT or SIGTERM. Prints `listening on host:port`.
int serve(const ServerConfig& config);

// Sensor -------------------------------------------------------------------

struct SensorConfig {
  std::filesystem::path config;
  std::string key;
  std::vector<std::string> values;
  int period_ms = 100;
  /// Number of writes; 0 runs until stopped.
  std::size_t count = 0;
  NotifyMode notify = NotifyMode::both;
};

/// Reads the file, sets `key` to `value` and writes it back, announcing
/// the change through `notify`.
void write_value(const std::filesystem::path& config, const std::string& key, const std::string& value,
                 NotifyMode notify);

/// Cycles `key` through `values`. Returns after `count` writes or once
/// `stop` becomes true. Errors propagate.
void run_sensor(const SensorConfig& config, const std::atomic<bool>* stop = nullptr);

// Sweep --------------------------------------------------------------------

struct SweepConfig {
  std::string host = "127.0.0.1";
  int port = 0;
  std::vector<double> rates;
  /// Sync intervals; a negative value means "no synchronization".
  std::vector<int> sync_ms;
  std::chrono::milliseconds duration{2000};
  std::chrono::milliseconds timeout{1000};
  std::size_t clients = 8;
};

struct SweepRow {
  int sync_ms = -1;
  double offered_rate = 0;
  std::uint64_t requests = 0;
  std::uint64_t replies = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t errors = 0;
  double elapsed_s = 0;
  double reply_rate() const { return elapsed_s > 0 ? static_cast<double>(replies) / elapsed_s : 0; }
};

/// Fixed-rate GET load against `/` for `duration`, open loop: requests are
/// issued on schedule whether or not earlier ones were answered.
SweepRow drive_load(const std::string& host, int port, double rate, std::chrono::milliseconds duration,
                    std::chrono::milliseconds timeout, std::size_t clients);

/// For each sync interval: sets it on the server, then drives each rate.
std::vector<SweepRow> sweep(const SweepConfig& config);

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

}  // namespace cv::demo
