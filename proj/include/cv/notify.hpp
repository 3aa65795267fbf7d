// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace cv {

class Context;
class StoreHandle;

namespace notify {

/// "Configuration at parent_path changed", sent after a successful write.
struct ChangeEvent {
  std::string parent_path;
  std::uint64_t sequence = 0;
  std::int64_t sender = 0;

  /// Event for `path` carrying this process's id and its next sequence number.
  static ChangeEvent next(std::string path);
};

/// Set by a delivery path, cleared by the owning thread at its
/// synchronization point. Raising it is async-signal-safe.
class PendingFlag {
 public:
  static_assert(std::atomic<bool>::is_always_lock_free);

  void raise() noexcept { set_.store(true, std::memory_order_release); }
  bool is_set() const noexcept { return set_.load(std::memory_order_acquire); }
  /// Returns the previous state.
  bool test_and_clear() noexcept { return set_.exchange(false, std::memory_order_acq_rel); }

 private:
  std::atomic<bool> set_{false};
};

/// Keeps a subscription alive; destroying it deregisters.
class Subscription {
 public:
  virtual ~Subscription() = default;
};

using SubscriptionPtr = std::unique_ptr<Subscription>;

class Transport {
 public:
  virtual ~Transport() = default;

  /// Delivers at least once to every current subscriber. Duplicates and
  /// coalescing are allowed.
  virtual void publish(const ChangeEvent& event) = 0;

  /// `flag` must outlive the returned subscription.
  virtual SubscriptionPtr subscribe(PendingFlag& flag) = 0;
};

/// `<dir>/.notify/` next to `config_path`, created on demand.
std::filesystem::path state_directory(const std::filesystem::path& config_path);

/// Publisher bumps a decimal counter in `.notify/<name>.stamp`; each
/// subscription polls it from a background thread.
class PollingTransport final : public Transport {
 public:
  explicit PollingTransport(std::filesystem::path config_path,
                            std::chrono::milliseconds interval = std::chrono::milliseconds(50));

  void publish(const ChangeEvent& event) override;
  SubscriptionPtr subscribe(PendingFlag& flag) override;

  std::uint64_t read_counter() const;
  const std::filesystem::path& stamp_path() const noexcept { return stamp_path_; }

 private:
  std::filesystem::path stamp_path_;
  std::chrono::milliseconds interval_;
};

/// Subscribers record their PID in `.notify/<name>.pids`; the publisher
/// signals each recorded PID and prunes the ones that no longer exist.
/// The handler only raises flags.
class SignalTransport final : public Transport {
 public:
  /// Signal from `CV_NOTIFY_SIGNAL` (number or name such as `USR2`), else SIGUSR1.
  explicit SignalTransport(std::filesystem::path config_path);
  SignalTransport(std::filesystem::path config_path, int signal_number);

  void publish(const ChangeEvent& event) override;
  SubscriptionPtr subscribe(PendingFlag& flag) override;

  std::vector<long> registered_pids() const;
  const std::filesystem::path& registry_path() const noexcept { return registry_path_; }
  int signal_number() const noexcept { return signal_; }

 private:
  std::filesystem::path registry_path_;
  int signal_;
};

/// Fans publish() and subscribe() out to several transports. publish()
/// tries every transport and rethrows the first failure afterwards.
class CompositeTransport final : public Transport {
 public:
  explicit CompositeTransport(std::vector<std::shared_ptr<Transport>> parts) : parts_(std::move(parts)) {}

  void publish(const ChangeEvent& event) override;
  SubscriptionPtr subscribe(PendingFlag& flag) override;

 private:
  std::vector<std::shared_ptr<Transport>> parts_;
};

/// Transport selected by `CV_NOTIFY` (`poll`, `signal`, `both`, `none`);
/// `both` by default. Returns nullptr for `none`.
std::shared_ptr<Transport> default_transport(const std::filesystem::path& config_path);

int signal_from_environment();

/// If `flag` was raised: clear it, sync `ctx` from `handle`, return true.
/// Otherwise touches nothing and returns false.
bool check_and_sync(PendingFlag& flag, Context& ctx, StoreHandle& handle);

}  // namespace notify
}  // namespace cv
