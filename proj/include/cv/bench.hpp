// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cv::bench {

enum class Mode { activate, activate_cv, sync, reload };

std::string_view mode_name(Mode mode);
/// Throws std::invalid_argument for an unknown name.
Mode parse_mode(std::string_view name);
const std::vector<Mode>& all_modes();

struct BenchSpec {
  Mode mode = Mode::activate;
  std::size_t n = 1;
  std::size_t iters = 1000;
  /// Must be odd. One extra warm-up run is executed and discarded.
  std::size_t runs = 11;
  /// Fixture directory; a fresh temporary directory when empty.
  std::filesystem::path workdir;
};

struct BenchResult {
  BenchSpec spec;
  /// Nanoseconds per iteration, one entry per recorded run.
  std::vector<double> run_ns;
  double mean_ns = 0;
  double median_ns = 0;
  double stddev_ns = 0;
  /// Reads of the probe value performed after each iteration.
  std::uint64_t probe_reads = 0;
};

/// Fixture for `n`: sources `bench/src<i>` providing layer `p<i>`, and
/// consumers `bench/c<i>/%p<i>%` evaluated under it, plus a probe value.
std::string fixture_text(std::size_t n);

/// Throws std::invalid_argument when iters is 0 or runs is even, IoError
/// when the fixture cannot be written.
BenchResult run(const BenchSpec& spec);

/// Runs every spec, alternating single runs between them after each has
/// been warmed up, so slow drifts of the machine affect all alike.
std::vector<BenchResult> run_interleaved(const std::vector<BenchSpec>& specs);

std::string csv_header();
std::string csv_row(const BenchResult& result);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};
LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct ReadOverhead {
  double cv_ns = 0;
  double plain_ns = 0;
  double ratio() const { return plain_ns > 0 ? cv_ns / plain_ns : 0; }
};
/// Times `reads` reads of a contextual value against `reads` reads of a
/// volatile integer; best of `runs`.
ReadOverhead measure_read_overhead(std::size_t reads, std::size_t runs = 5);

}  // namespace cv::bench
