// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <thread>

#include "cv/demo.hpp"

namespace cv::demo {

SweepRow drive_load(const std::string& host, int port, double rate, std::chrono::milliseconds duration,
                    std::chrono::milliseconds timeout, std::size_t clients) {
  SweepRow row;
  row.offered_rate = rate;
  const auto total = rate > 0 ? static_cast<std::uint64_t>(std::floor(rate * static_cast<double>(duration.count()) / 1000.0)) : 0;
  if (total == 0) return row;

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto spacing = std::chrono::duration<double>(1.0 / rate);
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> replies{0};
  std::atomic<std::uint64_t> timeouts{0};
  std::atomic<std::uint64_t> errors{0};

  std::vector<std::thread> threads;
  for (std::size_t c = 0; c < std::max<std::size_t>(1, clients); ++c) {
    threads.emplace_back([&] {
      for (;;) {
        const std::uint64_t i = next.fetch_add(1);
        if (i >= total) return;
        std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(spacing * static_cast<double>(i)));
        const auto result = http_get(host, port, "/", timeout);
        switch (result.outcome) {
          case HttpResult::Outcome::ok:
            if (result.status == 200) {
              ++replies;
            } else {
              ++errors;
            }
            break;
          case HttpResult::Outcome::timeout:
            ++timeouts;
            break;
          default:
            ++errors;
        }
      }
    });
  }
  for (auto& t : threads) t.join();

  row.elapsed_s = std::max(std::chrono::duration<double>(Clock::now() - start).count(),
                           std::chrono::duration<double>(duration).count());
  row.requests = total;
  row.replies = replies;
  row.timeouts = timeouts;
  row.errors = errors;
  return row;
}

std::vector<SweepRow> sweep(const SweepConfig& config) {
  std::vector<SweepRow> rows;
  for (int ms : config.sync_ms) {
    const auto admin = http_get(config.host, config.port, "/_sync?ms=" + std::to_string(ms < 0 ? -1 : ms), config.timeout);
    if (admin.outcome != HttpResult::Outcome::ok || admin.status != 200) {
      throw std::runtime_error("cannot set sync interval on " + config.host + ":" + std::to_string(config.port));
    }
    for (double rate : config.rates) {
      SweepRow row = drive_load(config.host, config.port, rate, config.duration, config.timeout, config.clients);
      row.sync_ms = ms < 0 ? -1 : ms;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv_header() { return "syncIntervalMs,offered_rate,reply_rate,timeouts"; }

std::string sweep_csv_row(const SweepRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s,%.1f,%.1f,%llu", row.sync_ms < 0 ? "none" : std::to_string(row.sync_ms).c_str(),
                row.offered_rate, row.reply_rate(), static_cast<unsigned long long>(row.timeouts));
  return buf;
}

}  // namespace cv::demo
