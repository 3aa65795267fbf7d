// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include "cv/demo.hpp"
#include "cv/error.hpp"
#include "cv/notify.hpp"
#include "cv/store_handle.hpp"

namespace cv::demo {
namespace {

void write_with(StoreHandle& handle, const std::string& key, const std::string& value) {
  ConfigStore next = *kdb_get(handle).store;
  next.set(key, value);
  kdb_set(handle, next);
}

}  // namespace

std::shared_ptr<notify::Transport> make_transport(NotifyMode mode, const std::filesystem::path& config) {
  switch (mode) {
    case NotifyMode::signal:
      return std::make_shared<notify::SignalTransport>(config);
    case NotifyMode::poll:
      return std::make_shared<notify::PollingTransport>(config);
    case NotifyMode::both:
      return std::make_shared<notify::CompositeTransport>(std::vector<std::shared_ptr<notify::Transport>>{
          std::make_shared<notify::SignalTransport>(config), std::make_shared<notify::PollingTransport>(config)});
    case NotifyMode::none:
      return nullptr;
  }
  return nullptr;
}

void write_value(const std::filesystem::path& config, const std::string& key, const std::string& value,
                 NotifyMode notify) {
  StoreHandle handle(config);
  handle.set_transport(make_transport(notify, config));
  write_with(handle, key, value);
}

void run_sensor(const SensorConfig& config, const std::atomic<bool>* stop) {
  if (config.values.empty()) throw Error("sensor needs at least one value");
  StoreHandle handle(config.config);
  handle.set_transport(make_transport(config.notify, config.config));
  auto next_tick = std::chrono::steady_clock::now();
  for (std::size_t i = 0; config.count == 0 || i < config.count; ++i) {
    if (stop != nullptr && stop->load()) return;
    write_with(handle, config.key, config.values[i % config.values.size()]);
    if (config.count != 0 && i + 1 == config.count) break;
    next_tick += std::chrono::milliseconds(config.period_ms);
    std::this_thread::sleep_until(next_tick);
  }
}

}  // namespace cv::demo
