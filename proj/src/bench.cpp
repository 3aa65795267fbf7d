// SPDX-License-Identifier: Apache-2.0

#include "cv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unistd.h>

#include "cv/accessor.hpp"
#include "cv/context.hpp"
#include "cv/error.hpp"
#include "cv/store_handle.hpp"

namespace cv::bench {
namespace {

using Clock = std::chrono::steady_clock;

struct TempDir {
  std::filesystem::path path;
  bool owned = false;

  explicit TempDir(const std::filesystem::path& requested) {
    if (!requested.empty()) {
      path = requested;
      std::filesystem::create_directories(path);
      return;
    }
    std::string templ = (std::filesystem::temp_directory_path() / "cv-bench-XXXXXX").string();
    if (mkdtemp(templ.data()) == nullptr) throw IoError("cannot create temporary directory");
    path = templ;
    owned = true;
  }
  ~TempDir() {
    if (owned) {
      std::error_code ec;
      std::filesystem::remove_all(path, ec);
    }
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

struct Fixture {
  std::filesystem::path file;
  Context ctx;
  std::vector<std::unique_ptr<ContextualValue>> sources;
  std::vector<std::unique_ptr<ContextualValue>> consumers;
  std::unique_ptr<ContextualValue> probe;
  std::vector<std::string> layers;

  Fixture(std::filesystem::path path, StorePtr store) : file(std::move(path)), ctx(std::move(store)) {}
};

std::unique_ptr<Fixture> make_fixture(const std::filesystem::path& dir, std::string_view mode, std::size_t n) {
  const auto file = dir / ("bench-" + std::string(mode) + "-" + std::to_string(n) + ".ecf");
  write_file_atomically(file, fixture_text(n));
  StoreHandle handle(file);
  auto store = handle.get().store;
  auto fx = std::make_unique<Fixture>(file, store);
  for (const auto& spec : extract_specs(*store)) {
    auto cv = std::make_unique<ContextualValue>(fx->ctx, spec);
    const std::string name = spec.name();
    if (name == "bench/probe") {
      fx->probe = std::move(cv);
    } else if (name.rfind("bench/src", 0) == 0) {
      fx->layers.push_back(spec.layer_name);
      fx->sources.push_back(std::move(cv));
    } else {
      fx->consumers.push_back(std::move(cv));
    }
  }
  return fx;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::activate:
      return "activate";
    case Mode::activate_cv:
      return "activate_cv";
    case Mode::sync:
      return "sync";
    case Mode::reload:
      return "reload";
  }
  return "activate";
}

Mode parse_mode(std::string_view name) {
  for (Mode m : all_modes()) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown benchmark mode '" + std::string(name) + "'");
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes{Mode::activate, Mode::activate_cv, Mode::sync, Mode::reload};
  return modes;
}

std::string fixture_text(std::size_t n) {
  std::string out = "# benchmark fixture\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += "[bench/src" + s + "]\nlayer/name := p" + s + "\n";
    out += "[bench/c" + s + "/%p" + s + "%]\ntype := long\n";
  }
  out += "[bench/probe]\ntype := long\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += "bench/src" + s + " = a\n";
    out += "bench/c" + s + "/a = 1\n";
    out += "bench/c" + s + "/* = 0\n";
  }
  out += "bench/probe = 42\n";
  return out;
}

namespace {

void check_spec(const BenchSpec& spec) {
  if (spec.iters == 0) throw std::invalid_argument("iters must be at least 1");
  if (spec.runs % 2 == 0) throw std::invalid_argument("runs must be odd");
}

/// Fixture and context for one BenchSpec; each call to time_run() times
/// `iters` iterations.
class Session {
 public:
  explicit Session(const BenchSpec& spec)
      : dir_(spec.workdir), fx_(make_fixture(dir_.path, mode_name(spec.mode), spec.n)), handle_(fx_->file) {
    result_.spec = spec;
    handle_.get();
    if (spec.mode == Mode::sync || spec.mode == Mode::reload) {
      for (auto& src : fx_->sources) fx_->ctx.activate(*src);
    }
  }

  double time_run() {
    const auto start = Clock::now();
    for (std::size_t i = 0; i < result_.spec.iters; ++i) iteration();
    return std::chrono::duration<double, std::nano>(Clock::now() - start).count() /
           static_cast<double>(result_.spec.iters);
  }

  void warm_up() {
    time_run();
    result_.probe_reads = 0;
  }

  void record() { result_.run_ns.push_back(time_run()); }

  BenchResult finish() {
    result_.mean_ns = mean_of(result_.run_ns);
    auto sorted = result_.run_ns;
    std::sort(sorted.begin(), sorted.end());
    result_.median_ns = sorted[sorted.size() / 2];
    double sq = 0;
    for (double v : result_.run_ns) sq += (v - result_.mean_ns) * (v - result_.mean_ns);
    result_.stddev_ns =
        result_.run_ns.size() > 1 ? std::sqrt(sq / static_cast<double>(result_.run_ns.size() - 1)) : 0;
    return result_;
  }

 private:
  void iteration() {
    switch (result_.spec.mode) {
      case Mode::activate:
        for (const auto& layer : fx_->layers) fx_->ctx.activate_layer(layer, "a");
        for (const auto& layer : fx_->layers) fx_->ctx.deactivate_layer(layer);
        break;
      case Mode::activate_cv:
        for (auto& src : fx_->sources) fx_->ctx.activate(*src);
        for (auto& src : fx_->sources) fx_->ctx.deactivate(*src);
        break;
      case Mode::sync:
        fx_->ctx.sync(handle_);
        break;
      case Mode::reload: {
        StoreHandle fresh(fx_->file);
        fx_->ctx.sync(fresh);
        break;
      }
    }
    sink_ = sink_ + fx_->probe->get<std::int64_t>();
    ++result_.probe_reads;
  }

  TempDir dir_;
  std::unique_ptr<Fixture> fx_;
  StoreHandle handle_;
  BenchResult result_;
  volatile std::int64_t sink_ = 0;
};

}  // namespace

BenchResult run(const BenchSpec& spec) {
  check_spec(spec);
  Session session(spec);
  session.warm_up();
  for (std::size_t r = 0; r < spec.runs; ++r) session.record();
  return session.finish();
}

std::vector<BenchResult> run_interleaved(const std::vector<BenchSpec>& specs) {
  std::size_t runs = 0;
  for (const auto& spec : specs) {
    check_spec(spec);
    runs = std::max(runs, spec.runs);
  }
  std::vector<std::unique_ptr<Session>> sessions;
  for (const auto& spec : specs) sessions.push_back(std::make_unique<Session>(spec));
  for (auto& s : sessions) s->warm_up();
  for (std::size_t r = 0; r < runs; ++r) {
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      if (r < specs[i].runs) sessions[i]->record();
    }
  }
  std::vector<BenchResult> results;
  for (auto& s : sessions) results.push_back(s->finish());
  return results;
}

std::string csv_header() { return "mode,n,iters,mean_ns,stddev_ns,runs"; }

std::string csv_row(const BenchResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.1f,%.1f,%zu", std::string(mode_name(r.spec.mode)).c_str(), r.spec.n,
                r.spec.iters, r.mean_ns, r.stddev_ns, r.spec.runs);
  return buf;
}

LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  LinearFit fit;
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxx > 0 ? sxy / sxx : 0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 1;
  return fit;
}

ReadOverhead measure_read_overhead(std::size_t reads, std::size_t runs) {
  Context ctx;
  Accessor<std::int64_t> value("[bench/read]\ntype := long\ndefault := 7\n");
  value.bind(ctx);
  volatile std::int64_t plain = 7;
  volatile std::int64_t sink = 0;

  ReadOverhead best{1e300, 1e300};
  for (std::size_t r = 0; r < runs; ++r) {
    auto start = Clock::now();
    for (std::size_t i = 0; i < reads; ++i) {
      asm volatile("" : : "r"(&value) : "memory");
      sink = sink + value.get();
    }
    best.cv_ns = std::min(best.cv_ns, std::chrono::duration<double, std::nano>(Clock::now() - start).count());

    start = Clock::now();
    for (std::size_t i = 0; i < reads; ++i) {
      asm volatile("" : : : "memory");
      sink = sink + plain;
    }
    best.plain_ns = std::min(best.plain_ns, std::chrono::duration<double, std::nano>(Clock::now() - start).count());
  }
  return best;
}

}  // namespace cv::bench
