// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cv/bench.hpp"
#include "cv/codegen.hpp"
#include "cv/context.hpp"
#include "cv/error.hpp"
#include "cv/notify.hpp"
#include "cv/spec.hpp"
#include "cv/store_handle.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

/// Splits positional arguments into (file, rest), taking the file from
/// CV_CONFIG when one argument fewer than `with_file` was given.
std::pair<std::string, std::vector<std::string>> with_config(const std::vector<std::string>& args,
                                                             std::size_t with_file) {
  if (args.size() == with_file) return {args.front(), {args.begin() + 1, args.end()}};
  const char* env = std::getenv("CV_CONFIG");
  if (args.size() + 1 == with_file && env != nullptr && *env != '\0') return {env, args};
  throw UsageError("expected " + std::to_string(with_file) + " arguments (or " + std::to_string(with_file - 1) +
                   " with CV_CONFIG set), got " + std::to_string(args.size()));
}

cv::LayerMap parse_layers(const std::vector<std::string>& flags) {
  cv::LayerMap layers;
  for (const auto& flag : flags) {
    const auto eq = flag.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--layer expects name=value, got '" + flag + "'");
    layers[flag.substr(0, eq)] = flag.substr(eq + 1);
  }
  return layers;
}

int cmd_gen(const std::string& spec_file, const std::string& out_dir) {
  cv::StoreHandle handle(spec_file);
  const auto store = handle.get().store;
  const auto specs = cv::extract_specs(*store);
  const auto model = cv::codegen::build_model(specs);
  const auto files = cv::codegen::generate(model);
  const auto lines = cv::codegen::write_files(out_dir, files);
  std::printf("%zu contextual values, %zu files, %zu lines written to %s\n", model.value_count(), files.size(), lines,
              out_dir.c_str());
  return 0;
}

int cmd_get(const std::string& file, const std::string& key, const cv::LayerMap& layers, bool value_only) {
  cv::StoreHandle handle(file);
  const auto store = handle.get().store;
  const auto specs = cv::extract_specs(*store);
  const cv::CVSpec* match = nullptr;
  for (const auto& spec : specs) {
    if (spec.key.str() == key) match = &spec;
  }
  if (match == nullptr) {
    for (const auto& spec : specs) {
      if (spec.name() == key) {
        if (match != nullptr) throw cv::Error("'" + key + "' is ambiguous; use the full key pattern");
        match = &spec;
      }
    }
  }
  if (match != nullptr) {
    const auto ev = cv::evaluate(*match, layers, *store);
    const std::string value = cv::to_text(ev.value);
    if (value_only) {
      std::printf("%s\n", value.c_str());
    } else {
      std::printf("%s = %s\n", ev.key.c_str(), value.c_str());
    }
    return 0;
  }
  if (const auto* entry = store->lookup(key)) {
    if (value_only) {
      std::printf("%s\n", entry->c_str());
    } else {
      std::printf("%s = %s\n", key.c_str(), entry->c_str());
    }
    return 0;
  }
  throw cv::Error("unknown key '" + key + "'");
}

int cmd_set(const std::string& file, const std::string& key, const std::string& value) {
  cv::StoreHandle handle(file);
  handle.set_transport(cv::notify::default_transport(file));
  cv::ConfigStore next = *cv::kdb_get(handle).store;
  next.set(key, value);
  cv::kdb_set(handle, next);
  if (!handle.last_notify_error().empty()) {
    std::fprintf(stderr, "warning: notification failed: %s\n", one_line(handle.last_notify_error()).c_str());
  }
  return 0;
}

int cmd_spec_check(const std::string& file) {
  cv::StoreHandle handle(file);
  const auto store = handle.get().store;
  const auto graph = cv::build_dependency_graph(cv::extract_specs(*store));
  const auto order = cv::topo_order(graph);
  std::string line = "order:";
  for (const auto& name : order.layer_names()) line += " " + name;
  std::printf("%s\n", line.c_str());
  for (const auto& w : order.warnings) std::printf("warning: %s\n", w.c_str());
  for (const auto& ext : graph.external_layers) std::printf("warning: external layer: %s\n", ext.c_str());
  return 0;
}

int cmd_layers(const std::string& file, const cv::LayerMap& extra) {
  cv::StoreHandle handle(file);
  const auto store = handle.get().store;
  cv::Context ctx(store);
  for (const auto& [name, value] : extra) ctx.activate_layer(name, value);
  std::vector<std::unique_ptr<cv::ContextualValue>> values;
  for (const auto& spec : cv::extract_specs(*store)) {
    if (extra.count(spec.layer_name) != 0) continue;
    values.push_back(std::make_unique<cv::ContextualValue>(ctx, spec));
  }
  for (auto* cv : std::vector<cv::ContextualValue*>(ctx.values())) ctx.activate(*cv);
  for (const auto& [name, value] : ctx.active_layers()) std::printf("%s = %s\n", name.c_str(), value.c_str());
  return 0;
}

int cmd_bench(const std::string& mode_name, const std::vector<std::size_t>& ns, std::size_t iters, std::size_t runs,
              const std::string& csv_path) {
  std::vector<cv::bench::Mode> modes;
  if (mode_name == "all") {
    modes = cv::bench::all_modes();
  } else {
    modes.push_back(cv::bench::parse_mode(mode_name));
  }
  if (iters == 0) throw UsageError("--iters must be at least 1");
  if (runs % 2 == 0) throw UsageError("--runs must be odd");

  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path, std::ios::trunc);
    if (!csv) throw cv::IoError("cannot write '" + csv_path + "'");
    csv << cv::bench::csv_header() << "\n";
  }
  std::printf("%s\n", cv::bench::csv_header().c_str());
  std::vector<std::vector<std::string>> rows(modes.size());
  for (std::size_t n : ns) {
    std::vector<cv::bench::BenchSpec> specs;
    for (auto mode : modes) {
      cv::bench::BenchSpec spec;
      spec.mode = mode;
      spec.n = n;
      spec.iters = iters;
      spec.runs = runs;
      specs.push_back(spec);
    }
    const auto results = cv::bench::run_interleaved(specs);
    for (std::size_t m = 0; m < modes.size(); ++m) rows[m].push_back(cv::bench::csv_row(results[m]));
  }
  for (const auto& mode_rows : rows) {
    for (const auto& row : mode_rows) {
      std::printf("%s\n", row.c_str());
      if (csv.is_open()) csv << row << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual values: code generation, inspection and benchmarks"};
  app.require_subcommand(1);

  std::vector<std::string> gen_args;
  std::string out_dir;
  auto* gen = app.add_subcommand("gen", "Generate typed accessors from a specification");
  gen->add_option("spec", gen_args, "Specification file (default: $CV_CONFIG)")->expected(0, 1);
  gen->add_option("-o,--out", out_dir, "Output directory")->required();

  std::vector<std::string> get_args;
  std::vector<std::string> get_layers;
  bool value_only = false;
  auto* get = app.add_subcommand("get", "Evaluate a contextual value or read an entry");
  get->add_option("args", get_args, "[file] key")->expected(1, 2);
  get->add_option("--layer", get_layers, "Layer binding name=value (repeatable)");
  get->add_flag("--value-only", value_only, "Print only the value");

  std::vector<std::string> set_args;
  auto* set = app.add_subcommand("set", "Write an entry and notify other processes");
  set->add_option("args", set_args, "[file] key value")->expected(2, 3);

  std::vector<std::string> check_args;
  auto* check = app.add_subcommand("spec-check", "Validate a specification and print the update order");
  check->add_option("file", check_args, "Specification file")->expected(0, 1);

  std::vector<std::string> layers_args;
  std::vector<std::string> layers_flags;
  auto* layers = app.add_subcommand("layers", "Activate every contextual value and print the active layers");
  layers->add_option("file", layers_args, "Configuration file")->expected(0, 1);
  layers->add_option("--layer", layers_flags, "Additional layer binding name=value (repeatable)");

  std::string bench_mode;
  std::vector<std::size_t> bench_n{1};
  std::size_t bench_iters = 1000;
  std::size_t bench_runs = 11;
  std::string bench_csv;
  auto* bench = app.add_subcommand("bench", "Run a microbenchmark and print CSV");
  bench->add_option("mode", bench_mode, "activate, activate_cv, sync, reload or all")
      ->required()
      ->check(CLI::IsMember({"activate", "activate_cv", "sync", "reload", "all"}));
  bench->add_option("--n", bench_n, "Number of layers/values (comma separated list allowed)")->delimiter(',');
  bench->add_option("--iters", bench_iters, "Iterations per run");
  bench->add_option("--runs", bench_runs, "Recorded runs (odd)");
  bench->add_option("--csv", bench_csv, "Also write CSV to this file");

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
    if (gen->parsed()) {
      auto [file, rest] = with_config(gen_args, 1);
      return cmd_gen(file, out_dir);
    }
    if (get->parsed()) {
      auto [file, rest] = with_config(get_args, 2);
      return cmd_get(file, rest.at(0), parse_layers(get_layers), value_only);
    }
    if (set->parsed()) {
      auto [file, rest] = with_config(set_args, 3);
      return cmd_set(file, rest.at(0), rest.at(1));
    }
    if (check->parsed()) {
      auto [file, rest] = with_config(check_args, 1);
      return cmd_spec_check(file);
    }
    if (layers->parsed()) {
      auto [file, rest] = with_config(layers_args, 1);
      return cmd_layers(file, parse_layers(layers_flags));
    }
    if (bench->parsed()) return cmd_bench(bench_mode, bench_n, bench_iters, bench_runs, bench_csv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
