// SPDX-License-Identifier: Apache-2.0

#include "cv/notify.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cv/error.hpp"
#include "cv/store_handle.hpp"

namespace fs = std::filesystem;

namespace cv::notify {
namespace {

/// flock(2) held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) : fd_(::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644)) {
    if (fd_ < 0) throw IoError("cannot open lock '" + path.string() + "': " + std::strerror(errno));
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw IoError("cannot lock '" + path.string() + "': " + std::strerror(errno));
      }
    }
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_;
};

fs::path notify_file(const fs::path& config_path, const char* suffix) {
  return state_directory(config_path) / (config_path.filename().string() + suffix);
}

fs::path lock_path_for(const fs::path& file) { return file.string() + ".lock"; }

std::string read_small(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t parse_counter(const std::string& text) {
  std::uint64_t value = 0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  while (end != begin && (end[-1] == '\n' || end[-1] == ' ')) --end;
  std::from_chars(begin, end, value);
  return value;
}

std::vector<long> parse_pids(const std::string& text) {
  std::vector<long> pids;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    long pid = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), pid);
    if (ec == std::errc() && ptr == line.data() + line.size() && pid > 0) pids.push_back(pid);
  }
  return pids;
}

std::string render_pids(const std::vector<long>& pids) {
  std::string out;
  for (long pid : pids) out += std::to_string(pid) + "\n";
  return out;
}

// ---------------------------------------------------------------- polling

class PollingSubscription final : public Subscription {
 public:
  PollingSubscription(const PollingTransport& transport, PendingFlag& flag, std::chrono::milliseconds interval)
      : transport_(transport), flag_(flag), interval_(interval), last_(transport.read_counter()) {
    thread_ = std::thread([this] { run(); });
  }

  ~PollingSubscription() override {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

 private:
  void run() {
    std::unique_lock lock(mutex_);
    while (!cv_.wait_for(lock, interval_, [this] { return stop_; })) {
      std::uint64_t now = 0;
      try {
        now = transport_.read_counter();
      } catch (const std::exception&) {
        continue;
      }
      if (now != last_) {
        last_ = now;
        flag_.raise();
      }
    }
  }

  const PollingTransport transport_;
  PendingFlag& flag_;
  std::chrono::milliseconds interval_;
  std::uint64_t last_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::thread thread_;
};

// ----------------------------------------------------------------- signal

constexpr std::size_t kMaxSignalFlags = 64;
std::array<std::atomic<PendingFlag*>, kMaxSignalFlags> g_signal_flags{};

extern "C" void raise_pending_flags(int) {
  for (auto& slot : g_signal_flags) {
    if (PendingFlag* flag = slot.load(std::memory_order_acquire)) flag->raise();
  }
}

std::mutex g_handler_mutex;
std::array<int, NSIG> g_handler_users{};
std::array<struct sigaction, NSIG> g_previous_actions{};

void retain_handler(int sig) {
  std::lock_guard lock(g_handler_mutex);
  if (g_handler_users[sig]++ > 0) return;
  struct sigaction sa {};
  sa.sa_handler = raise_pending_flags;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = SA_RESTART;
  if (::sigaction(sig, &sa, &g_previous_actions[sig]) != 0) {
    --g_handler_users[sig];
    throw IoError(std::string("cannot install signal handler: ") + std::strerror(errno));
  }
}

void release_handler(int sig) {
  std::lock_guard lock(g_handler_mutex);
  if (--g_handler_users[sig] > 0) return;
  ::sigaction(sig, &g_previous_actions[sig], nullptr);
}

class SignalSubscription final : public Subscription {
 public:
  SignalSubscription(fs::path registry, int sig, PendingFlag& flag) : registry_(std::move(registry)), signal_(sig) {
    for (std::size_t i = 0; i < g_signal_flags.size(); ++i) {
      PendingFlag* expected = nullptr;
      if (g_signal_flags[i].compare_exchange_strong(expected, &flag)) {
        slot_ = i;
        break;
      }
    }
    if (slot_ == kMaxSignalFlags) throw IoError("too many signal subscriptions in one process");
    try {
      retain_handler(signal_);
    } catch (...) {
      g_signal_flags[slot_].store(nullptr);
      throw;
    }
    try {
      FileLock lock(lock_path_for(registry_));
      auto pids = parse_pids(read_small(registry_));
      pids.push_back(static_cast<long>(::getpid()));
      write_file_atomically(registry_, render_pids(pids));
    } catch (...) {
      release_handler(signal_);
      g_signal_flags[slot_].store(nullptr);
      throw;
    }
  }

  ~SignalSubscription() override {
    try {
      FileLock lock(lock_path_for(registry_));
      auto pids = parse_pids(read_small(registry_));
      const auto it = std::find(pids.begin(), pids.end(), static_cast<long>(::getpid()));
      if (it != pids.end()) {
        pids.erase(it);
        write_file_atomically(registry_, render_pids(pids));
      }
    } catch (const std::exception&) {
      // A leftover record is pruned by the next publisher.
    }
    release_handler(signal_);
    g_signal_flags[slot_].store(nullptr, std::memory_order_release);
  }

 private:
  fs::path registry_;
  int signal_;
  std::size_t slot_ = kMaxSignalFlags;
};

class CompositeSubscription final : public Subscription {
 public:
  explicit CompositeSubscription(std::vector<SubscriptionPtr> parts) : parts_(std::move(parts)) {}

 private:
  std::vector<SubscriptionPtr> parts_;
};

}  // namespace

ChangeEvent ChangeEvent::next(std::string path) {
  static std::atomic<std::uint64_t> sequence{0};
  return ChangeEvent{std::move(path), sequence.fetch_add(1) + 1, static_cast<std::int64_t>(::getpid())};
}

fs::path state_directory(const fs::path& config_path) {
  const fs::path parent = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  fs::path dir = parent / ".notify";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

PollingTransport::PollingTransport(fs::path config_path, std::chrono::milliseconds interval)
    : stamp_path_(notify_file(config_path, ".stamp")), interval_(interval) {}

void PollingTransport::publish(const ChangeEvent&) {
  FileLock lock(lock_path_for(stamp_path_));
  const std::uint64_t next = parse_counter(read_small(stamp_path_)) + 1;
  write_file_atomically(stamp_path_, std::to_string(next) + "\n");
}

SubscriptionPtr PollingTransport::subscribe(PendingFlag& flag) {
  return std::make_unique<PollingSubscription>(*this, flag, interval_);
}

std::uint64_t PollingTransport::read_counter() const { return parse_counter(read_small(stamp_path_)); }

int signal_from_environment() {
  const char* env = std::getenv("CV_NOTIFY_SIGNAL");
  if (env == nullptr || *env == '\0') return SIGUSR1;
  std::string_view text(env);
  int number = 0;
  if (std::from_chars(text.data(), text.data() + text.size(), number).ptr == text.data() + text.size()) {
    if (number > 0 && number < NSIG) return number;
    throw Error("CV_NOTIFY_SIGNAL out of range: " + std::string(text));
  }
  if (text.substr(0, 3) == "SIG") text.remove_prefix(3);
  if (text == "USR1") return SIGUSR1;
  if (text == "USR2") return SIGUSR2;
  if (text == "HUP") return SIGHUP;
  throw Error("unsupported CV_NOTIFY_SIGNAL: " + std::string(env));
}

SignalTransport::SignalTransport(fs::path config_path) : SignalTransport(std::move(config_path), signal_from_environment()) {}

SignalTransport::SignalTransport(fs::path config_path, int signal_number)
    : registry_path_(notify_file(config_path, ".pids")), signal_(signal_number) {}

void SignalTransport::publish(const ChangeEvent&) {
  FileLock lock(lock_path_for(registry_path_));
  const auto pids = parse_pids(read_small(registry_path_));
  std::vector<long> alive;
  alive.reserve(pids.size());
  for (long pid : pids) {
    if (::kill(static_cast<pid_t>(pid), signal_) == 0 || errno != ESRCH) {
      alive.push_back(pid);
    }
  }
  if (alive.size() != pids.size()) write_file_atomically(registry_path_, render_pids(alive));
}

SubscriptionPtr SignalTransport::subscribe(PendingFlag& flag) {
  return std::make_unique<SignalSubscription>(registry_path_, signal_, flag);
}

std::vector<long> SignalTransport::registered_pids() const { return parse_pids(read_small(registry_path_)); }

void CompositeTransport::publish(const ChangeEvent& event) {
  std::exception_ptr first;
  for (const auto& part : parts_) {
    try {
      part->publish(event);
    } catch (...) {
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

SubscriptionPtr CompositeTransport::subscribe(PendingFlag& flag) {
  std::vector<SubscriptionPtr> subs;
  for (const auto& part : parts_) subs.push_back(part->subscribe(flag));
  return std::make_unique<CompositeSubscription>(std::move(subs));
}

std::shared_ptr<Transport> default_transport(const fs::path& config_path) {
  const char* env = std::getenv("CV_NOTIFY");
  const std::string mode = env == nullptr ? "both" : env;
  if (mode == "none") return nullptr;
  if (mode == "poll") return std::make_shared<PollingTransport>(config_path);
  if (mode == "signal") return std::make_shared<SignalTransport>(config_path);
  if (mode == "both" || mode.empty()) {
    return std::make_shared<CompositeTransport>(std::vector<std::shared_ptr<Transport>>{
        std::make_shared<PollingTransport>(config_path), std::make_shared<SignalTransport>(config_path)});
  }
  throw Error("unknown CV_NOTIFY mode: " + mode);
}

}  // namespace cv::notify
