// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "cv/bench.hpp"
#include "cv/config_store.hpp"
#include "cv/spec.hpp"

using namespace cv::bench;

TEST_CASE("fixture has n sources, n consumers and a probe") {
  const auto specs = cv::extract_specs(cv::parse_config(fixture_text(3)));
  CHECK(specs.size() == 7);
  const auto graph = cv::build_dependency_graph(specs);
  CHECK(graph.edges.size() == 3);
  CHECK(graph.external_layers.empty());
}

TEST_CASE("all four modes run for small n and emit one row each") {
  std::vector<std::string> rows;
  for (Mode mode : all_modes()) {
    for (std::size_t n : {0, 1, 2, 4, 8}) {
      BenchSpec spec;
      spec.mode = mode;
      spec.n = n;
      spec.iters = 20;
      spec.runs = 3;
      const auto r = run(spec);
      CHECK(r.run_ns.size() == 3);
      CHECK(r.probe_reads == 60);
      CHECK(r.mean_ns > 0);
      CHECK(r.median_ns > 0);
      rows.push_back(csv_row(r));
    }
  }
  CHECK(rows.size() == 20);
  CHECK(csv_header() == "mode,n,iters,mean_ns,stddev_ns,runs");
  CHECK(rows.front().rfind("activate,0,20,", 0) == 0);
}

TEST_CASE("invalid benchmark parameters are rejected") {
  BenchSpec spec;
  spec.iters = 0;
  CHECK_THROWS_AS(run(spec), std::invalid_argument);
  spec.iters = 1;
  spec.runs = 4;
  CHECK_THROWS_AS(run(spec), std::invalid_argument);
  CHECK_THROWS_AS(parse_mode("fast"), std::invalid_argument);
  CHECK(parse_mode("activate_cv") == Mode::activate_cv);
}

TEST_CASE("linear fit recovers exact lines") {
  const auto fit = linear_fit({1, 2, 4, 8, 16}, {13, 23, 43, 83, 163});
  CHECK(fit.slope == doctest::Approx(10));
  CHECK(fit.intercept == doctest::Approx(3));
  CHECK(fit.r_squared == doctest::Approx(1));
  const auto flat = linear_fit({1, 2, 3}, {5, 1, 5});
  CHECK(flat.r_squared == doctest::Approx(0));
}

TEST_CASE("read overhead measurement returns positive timings") {
  const auto r = measure_read_overhead(10000, 1);
  CHECK(r.cv_ns > 0);
  CHECK(r.plain_ns > 0);
}

TEST_CASE("interleaved runs report every spec") {
  std::vector<cv::bench::BenchSpec> specs;
  for (auto mode : cv::bench::all_modes()) {
    cv::bench::BenchSpec spec;
    spec.mode = mode;
    spec.n = 3;
    spec.iters = 20;
    spec.runs = 5;
    specs.push_back(spec);
  }
  specs.back().runs = 3;
  const auto results = cv::bench::run_interleaved(specs);
  REQUIRE(results.size() == specs.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    CHECK(results[i].spec.mode == specs[i].mode);
    CHECK(results[i].run_ns.size() == specs[i].runs);
    CHECK(results[i].probe_reads == specs[i].runs * specs[i].iters);
    CHECK(results[i].mean_ns > 0);
  }
  specs[0].runs = 4;
  CHECK_THROWS_AS(cv::bench::run_interleaved(specs), std::invalid_argument);
}
