// SPDX-License-Identifier: Apache-2.0

#include <arpa/inet.h>
#include <csignal>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cv/context.hpp"
#include "cv/error.hpp"
#include "cv/notify.hpp"
#include "cv/demo.hpp"

namespace cv::demo {
namespace {

struct Snapshot {
  std::vector<std::pair<std::string, std::string>> values;
  LayerMap layers;
  StorePtr store;
  std::vector<CVSpec> session_specs;
};

std::string html_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&#39;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

NotifyMode parse_notify_mode(const std::string& text) {
  if (text == "signal") return NotifyMode::signal;
  if (text == "poll") return NotifyMode::poll;
  if (text == "both") return NotifyMode::both;
  if (text == "none") return NotifyMode::none;
  throw std::invalid_argument("unknown notify mode '" + text + "' (expected signal, poll, both or none)");
}

struct Server::State {
  ServerConfig config;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::vector<std::thread> workers;
  std::thread sync_thread;

  std::mutex snapshot_mu;
  std::shared_ptr<const Snapshot> snapshot;

  std::mutex ctx_mu;
  std::unique_ptr<StoreHandle> handle;
  std::unique_ptr<Context> ctx;
  std::vector<std::unique_ptr<ContextualValue>> values;
  notify::PendingFlag flag;
  notify::SubscriptionPtr subscription;

  std::mutex tick_mu;
  std::condition_variable tick_cv;
  std::atomic<int> interval_ms{100};

  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> replies{0};
  std::atomic<std::uint64_t> syncs{0};

  // Caller holds ctx_mu.
  void publish_snapshot() {
    auto snap = std::make_shared<Snapshot>();
    for (const auto* cv : ctx->values()) snap->values.emplace_back(cv->spec().name(), cv->text());
    snap->layers = ctx->layers();
    snap->store = ctx->store_snapshot();
    for (const auto* cv : ctx->values()) {
      if (cv->spec().dependencies.count("session") != 0) snap->session_specs.push_back(cv->spec());
    }
    std::lock_guard lock(snapshot_mu);
    snapshot = std::move(snap);
  }

  std::shared_ptr<const Snapshot> current() {
    std::lock_guard lock(snapshot_mu);
    return snapshot;
  }

  enum class SyncKind { announced, always, reload };

  void sync_now(SyncKind kind) {
    std::lock_guard lock(ctx_mu);
    bool synced = true;
    switch (kind) {
      case SyncKind::announced:
        synced = notify::check_and_sync(flag, *ctx, *handle);
        break;
      case SyncKind::always:
        ctx->sync(*handle);
        break;
      case SyncKind::reload: {
        StoreHandle fresh(config.config);
        ctx->sync(fresh);
        break;
      }
    }
    if (synced) {
      ++syncs;
      publish_snapshot();
    }
  }

  SyncKind tick_kind() const {
    if (config.force_reload) return SyncKind::reload;
    return config.notify == NotifyMode::none ? SyncKind::always : SyncKind::announced;
  }

  void sync_loop() {
    const SyncKind kind = tick_kind();
    std::unique_lock lock(tick_mu);
    while (!stopping) {
      const int ms = interval_ms.load();
      if (ms <= 0) {
        tick_cv.wait(lock, [&] { return stopping || interval_ms.load() != ms; });
        continue;
      }
      if (tick_cv.wait_for(lock, std::chrono::milliseconds(ms),
                           [&] { return stopping || interval_ms.load() != ms; })) {
        continue;
      }
      lock.unlock();
      try {
        sync_now(kind);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "error: sync failed: %s\n", e.what());
      }
      lock.lock();
    }
  }

  std::string render(const Request& req) {
    if (interval_ms.load() == 0) sync_now(config.force_reload ? SyncKind::reload : SyncKind::always);
    const auto snap = current();
    std::vector<std::pair<std::string, std::string>> values = snap->values;
    const auto session = req.query.find("session");
    if (session != req.query.end() && !snap->session_specs.empty()) {
      LayerMap layers = snap->layers;
      layers["session"] = session->second;
      for (const auto& spec : snap->session_specs) {
        const std::string text = to_text(evaluate(spec, layers, *snap->store).value);
        for (auto& [name, value] : values) {
          if (name == spec.name()) value = text;
        }
      }
    }
    std::string page = "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>";
    for (const auto& [name, value] : values) {
      if (name == "greeting") page += html_escape(value);
    }
    page += "</title></head>\n<body>\n";
    for (const auto& [name, value] : values) {
      page += "<p id=\"" + html_escape(name) + "\">" + html_escape(value) + "</p>\n";
    }
    page += "</body>\n</html>\n";
    return page;
  }

  std::string respond(const std::string& head) {
    const auto req = parse_request(head);
    if (!req) return make_response(400, "text/plain", "bad request\n");
    if (req->method != "GET") return make_response(405, "text/plain", "only GET is supported\n");
    if (req->path == "/") return make_response(200, "text/html; charset=utf-8", render(*req));
    if (req->path == "/_sync") {
      const auto ms = req->query.find("ms");
      if (ms == req->query.end()) {
        return make_response(200, "text/plain", "sync interval " + std::to_string(interval_ms.load()) + "\n");
      }
      int value = 0;
      const auto res = std::from_chars(ms->second.data(), ms->second.data() + ms->second.size(), value);
      if (res.ec != std::errc() || res.ptr != ms->second.data() + ms->second.size()) {
        return make_response(400, "text/plain", "ms must be an integer\n");
      }
      set_interval(value);
      return make_response(200, "text/plain", "sync interval " + std::to_string(value) + "\n");
    }
    return make_response(404, "text/plain", "not found\n");
  }

  void set_interval(int ms) {
    {
      std::lock_guard lock(tick_mu);
      interval_ms = ms < 0 ? -1 : ms;
    }
    tick_cv.notify_all();
  }

  void handle_connection(int fd) {
    timeval tv{2, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    std::string head;
    char buf[2048];
    while (head.find("\r\n\r\n") == std::string::npos && head.size() < 8192) {
      const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      head.append(buf, static_cast<std::size_t>(n));
    }
    if (head.empty()) return;
    ++requests;
    std::string response;
    try {
      response = respond(head);
    } catch (const std::exception& e) {
      response = make_response(500, "text/plain", std::string(e.what()) + "\n");
    }
    if (send_all(fd, response)) ++replies;
  }

  void accept_loop() {
    while (!stopping) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (stopping) break;
        if (errno == EINTR || errno == ECONNABORTED || errno == EMFILE || errno == ENFILE) {
          if (errno == EMFILE || errno == ENFILE) std::this_thread::sleep_for(std::chrono::milliseconds(5));
          continue;
        }
        break;
      }
      handle_connection(fd);
      ::close(fd);
    }
  }
};

Server::Server(ServerConfig config) : state_(std::make_unique<State>()) {
  state_->config = std::move(config);
  state_->interval_ms = state_->config.sync_ms < 0 ? -1 : state_->config.sync_ms;
}

Server::~Server() { stop(); }

int Server::start() {
  auto& s = *state_;
  s.handle = std::make_unique<StoreHandle>(s.config.config);
  const auto store = s.handle->get().store;
  s.ctx = std::make_unique<Context>(store);
  for (const auto& spec : extract_specs(*store)) {
    s.values.push_back(std::make_unique<ContextualValue>(*s.ctx, spec));
  }
  for (auto* cv : std::vector<ContextualValue*>(s.ctx->values())) s.ctx->activate(*cv);
  if (auto transport = make_transport(s.config.notify, s.config.config)) {
    s.subscription = transport->subscribe(s.flag);
  }
  s.publish_snapshot();

  s.listen_fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (s.listen_fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(s.listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(s.config.port));
  if (::inet_pton(AF_INET, s.config.host.c_str(), &addr.sin_addr) != 1) {
    ::close(s.listen_fd);
    s.listen_fd = -1;
    throw IoError("bad listen address '" + s.config.host + "'");
  }
  if (::bind(s.listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(s.listen_fd, 512) != 0) {
    const std::string why = std::strerror(errno);
    ::close(s.listen_fd);
    s.listen_fd = -1;
    throw IoError("cannot listen on " + s.config.host + ":" + std::to_string(s.config.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(s.listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  s.sync_thread = std::thread([&s] { s.sync_loop(); });
  for (std::size_t i = 0; i < std::max<std::size_t>(1, s.config.workers); ++i) {
    s.workers.emplace_back([&s] { s.accept_loop(); });
  }
  return port_;
}

void Server::stop() {
  auto& s = *state_;
  if (s.stopping.exchange(true)) return;
  if (s.listen_fd >= 0) ::shutdown(s.listen_fd, SHUT_RDWR);
  s.tick_cv.notify_all();
  for (auto& t : s.workers) t.join();
  if (s.sync_thread.joinable()) s.sync_thread.join();
  if (s.listen_fd >= 0) ::close(s.listen_fd);
  s.listen_fd = -1;
  s.subscription.reset();
}

ServerStats Server::stats() const {
  return {state_->requests.load(), state_->replies.load(), state_->syncs.load()};
}

void Server::set_sync_interval(int ms) { state_->set_interval(ms); }

int serve(const ServerConfig& config) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Server server(config);
  const int port = server.start();
  std::printf("listening on %s:%d\n", config.host.c_str(), port);
  std::fflush(stdout);

  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  return 0;
}

}  // namespace cv::demo
