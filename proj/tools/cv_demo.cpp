// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "cv/demo.hpp"

namespace {

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized page server, context sensor and load sweep"};
  app.require_subcommand(1);

  cv::demo::ServerConfig server;
  std::string listen = "127.0.0.1:8080";
  std::string server_notify = "both";
  auto* serve = app.add_subcommand("serve", "Serve the page for the current context");
  serve->add_option("--listen", listen, "host:port (port 0 picks a free one)");
  serve->add_option("--config", server.config, "Configuration file")->required();
  serve->add_option("--sync-ms", server.sync_ms, "Sync interval; 0 syncs per request, -1 never");
  serve->add_option("--notify", server_notify, "signal, poll, both or none");
  serve->add_flag("--force-reload", server.force_reload, "Re-read the file at every tick");
  serve->add_option("--workers", server.workers, "Request threads");

  cv::demo::SensorConfig sensor;
  std::string values;
  std::string sensor_notify = "both";
  auto* sens = app.add_subcommand("sensor", "Cycle a persistent key through values");
  sens->add_option("--config", sensor.config, "Configuration file")->required();
  sens->add_option("--key", sensor.key, "Key to write")->required();
  sens->add_option("--values", values, "Comma separated values")->required();
  sens->add_option("--period-ms", sensor.period_ms, "Delay between writes");
  sens->add_option("--count", sensor.count, "Number of writes (0 = until killed)");
  sens->add_option("--notify", sensor_notify, "signal, poll, both or none");

  std::string target = "127.0.0.1:8080";
  std::string rates = "500";
  std::string sync_list = "none,1000,100,50,10";
  std::string csv_path;
  int duration_ms = 2000;
  int timeout_ms = 1000;
  std::size_t clients = 8;
  auto* sweep = app.add_subcommand("sweep", "Fixed-rate load for each sync interval, CSV output");
  sweep->add_option("--target", target, "Server host:port");
  sweep->add_option("--rates", rates, "Comma separated request rates per second");
  sweep->add_option("--sync-ms", sync_list, "Comma separated sync intervals; 'none' disables syncing");
  sweep->add_option("--duration-ms", duration_ms, "Load duration per configuration");
  sweep->add_option("--timeout-ms", timeout_ms, "Reply timeout");
  sweep->add_option("--clients", clients, "Client threads");
  sweep->add_option("--csv", csv_path, "Also write CSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (serve->parsed()) {
      std::tie(server.host, server.port) = cv::demo::split_host_port(listen);
      server.notify = cv::demo::parse_notify_mode(server_notify);
      return cv::demo::serve(server);
    }
    if (sens->parsed()) {
      sensor.values = split_list(values);
      sensor.notify = cv::demo::parse_notify_mode(sensor_notify);
      cv::demo::run_sensor(sensor);
      return 0;
    }
    if (sweep->parsed()) {
      cv::demo::SweepConfig cfg;
      std::tie(cfg.host, cfg.port) = cv::demo::split_host_port(target);
      for (const auto& r : split_list(rates)) cfg.rates.push_back(std::stod(r));
      for (const auto& s : split_list(sync_list)) cfg.sync_ms.push_back(s == "none" ? -1 : std::stoi(s));
      cfg.duration = std::chrono::milliseconds(duration_ms);
      cfg.timeout = std::chrono::milliseconds(timeout_ms);
      cfg.clients = clients;
      std::ofstream csv;
      if (!csv_path.empty()) {
        csv.open(csv_path, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
        csv << cv::demo::sweep_csv_header() << "\n";
      }
      std::printf("%s\n", cv::demo::sweep_csv_header().c_str());
      for (const auto& row : cv::demo::sweep(cfg)) {
        std::printf("%s\n", cv::demo::sweep_csv_row(row).c_str());
        if (csv.is_open()) csv << cv::demo::sweep_csv_row(row) << "\n";
      }
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
