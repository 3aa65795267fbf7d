// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion. Exit status is the number
// of failed criteria. Criterion numbers given as arguments select a subset.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "case_study_trace.hpp"
#include "cv/bench.hpp"
#include "cv/codegen.hpp"
#include "cv/context.hpp"
#include "cv/demo.hpp"
#include "cv/error.hpp"
#include "cv/store_handle.hpp"
#include "environment.hpp"
#include "merge_table.hpp"
#include "runtime_oracle.hpp"
#include "support.hpp"
#include "topo_oracle.hpp"

using namespace cv;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  std::chrono::seconds limit;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

StorePtr store_of(const std::string& text) { return std::make_shared<const ConfigStore>(parse_config(text)); }

CVSpec spec_named(const ConfigStore& store, const std::string& name) {
  for (auto& spec : extract_specs(store)) {
    if (spec.name() == name) return spec;
  }
  throw Error("no specification named " + name);
}

// 1 ---------------------------------------------------------------------------

Outcome semantics() {
  const auto store = store_of(
      "[language]\n[greeting/%language%]\n"
      "greeting/german = Guten Tag!\ngreeting/english = Hello!\ngreeting/* = Hi!\n");
  Context ctx(store);
  ContextualValue language(ctx, spec_named(*store, "language"));
  ContextualValue greeting(ctx, spec_named(*store, "greeting"));

  std::vector<std::string> failures;
  auto expect = [&](const char* step, const std::string& want) {
    if (greeting.text() != want) failures.push_back(std::string(step) + ": '" + greeting.text() + "'");
  };
  expect("initial", "Hi!");
  ctx.assign_text(language, "german");
  expect("assigned, inactive", "Hi!");
  ctx.activate(language);
  expect("activated german", "Guten Tag!");
  ctx.deactivate(language);
  expect("deactivated", "Hi!");
  ctx.activate(language);
  expect("reactivated", "Guten Tag!");
  ctx.assign_text(language, "");
  expect("empty value", "Hi!");
  ctx.assign_text(language, "english");
  expect("english", "Hello!");

  if (!failures.empty()) return {false, failures.front()};
  return {true, "Guten Tag! on activation, Hi! after deactivation and after empty value"};
}

// 2 ---------------------------------------------------------------------------

Outcome cycles() {
  const std::string text = "[country/%language%]\n[language/%country%]\nlanguage/* = german\ncountry/german = at\n";
  const auto store = store_of(text);
  std::string diagnostic;
  try {
    build_dependency_graph(extract_specs(*store));
    return {false, "spec-check accepted the cycle"};
  } catch (const CycleError& e) {
    diagnostic = e.what();
  }
  if (diagnostic.find("country") == std::string::npos || diagnostic.find("language") == std::string::npos) {
    return {false, "diagnostic does not name both layers: " + diagnostic};
  }

  testing::TempDir dir;
  testing::write_text(dir / "cycle.ecf", text);
  const auto cli = testing::run_process({CV_TOOL, "spec-check", (dir / "cycle.ecf").string()});
  if (cli.exit_code != 1 || cli.err.find("country") == std::string::npos ||
      cli.err.find("language") == std::string::npos) {
    return {false, "cv spec-check: exit " + std::to_string(cli.exit_code) + " " + cli.err};
  }

  Context::Options options;
  options.check_cycles = false;
  Context ctx(store, options);
  ContextualValue country(ctx, spec_named(*store, "country"));
  ContextualValue language(ctx, spec_named(*store, "language"));
  ctx.activate(country);
  try {
    ctx.activate(language);
    return {false, "runtime propagation did not detect the cycle"};
  } catch (const PropagationCycleError&) {
  }
  return {true, "rejected with '" + diagnostic + "'; runtime raised the propagation-cycle error"};
}

// 3 ---------------------------------------------------------------------------

Outcome order_preferences() {
  const auto preferred = topo_order(build_dependency_graph(extract_specs(
      parse_config("[language]\nlayer/order := 2\n[country]\nlayer/order := 1\n"))));
  if (preferred.layer_names() != std::vector<std::string>{"country", "language"} || !preferred.warnings.empty()) {
    return {false, "country-before-language fixture not honored"};
  }
  const auto contradicted = topo_order(build_dependency_graph(extract_specs(
      parse_config("[country/%language%]\nlayer/order := 1\n[language]\nlayer/order := 2\n"))));
  if (contradicted.layer_names() != std::vector<std::string>{"language", "country"} ||
      contradicted.warnings.size() != 1) {
    return {false, "contradicting fixture: expected language country with one warning, got " +
                       std::to_string(contradicted.warnings.size()) + " warnings"};
  }

  std::mt19937 rng(4242);
  for (int instance = 0; instance < 200; ++instance) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto g = testing::random_graph(rng, n, true, 0.3);
    if (auto err = testing::check_against_enumeration(g); !err.empty()) {
      return {false, "instance " + std::to_string(instance) + ": " + err};
    }
  }
  return {true, "fixtures honored; 200 random graphs (<= 8 nodes) agree with enumeration"};
}

// 4 ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937 rng(2016);
  testing::TempDir dir;
  std::uint64_t comparisons = 0;
  for (int sequence = 0; sequence < 200; ++sequence) {
    testing::RuntimeOracleRun run(rng, dir.path());
    if (auto err = run.run(50); !err.empty()) {
      return {false, "sequence " + std::to_string(sequence) + ": " + err};
    }
    comparisons += run.comparisons();
  }
  return {true, "200 sequences, " + std::to_string(comparisons) + " cache comparisons, 0 mismatches"};
}

// 5 ---------------------------------------------------------------------------

ConfigStore store_with(const std::string& key, char state) {
  ConfigStore s;
  if (auto v = testing::merge_state(state)) s.set(key, *v);
  return s;
}

Outcome merge_suite() {
  int row_no = 0;
  for (const auto& row : testing::kMergeTable) {
    ++row_no;
    const std::string where = "row " + std::to_string(row_no);
    try {
      const auto merged = three_way_merge(store_with("k", row.base), store_with("k", row.ours), store_with("k", row.theirs));
      if (row.expected == 'C') return {false, where + ": expected a conflict"};
      const auto expected = testing::merge_state(row.expected);
      const auto* got = merged.lookup("k");
      if ((got == nullptr) != !expected.has_value() || (got != nullptr && *got != *expected)) {
        return {false, where + ": wrong merge result"};
      }
    } catch (const ConflictError& e) {
      if (row.expected != 'C') return {false, where + ": unexpected conflict"};
      if (e.keys() != std::vector<std::string>{"k"}) return {false, where + ": wrong conflict keys"};
    }
  }

  ConfigStore base;
  ConfigStore ours;
  ConfigStore theirs;
  std::vector<std::string> conflicts;
  for (std::size_t i = 0; i < testing::kMergeTable.size(); ++i) {
    const auto& row = testing::kMergeTable[i];
    const std::string key = "case/" + std::string(i < 9 ? "0" : "") + std::to_string(i + 1);
    if (auto v = testing::merge_state(row.base)) base.set(key, *v);
    if (auto v = testing::merge_state(row.ours)) ours.set(key, *v);
    if (auto v = testing::merge_state(row.theirs)) theirs.set(key, *v);
    if (row.expected == 'C') conflicts.push_back(key);
  }
  try {
    three_way_merge(base, ours, theirs);
    return {false, "combined merge did not conflict"};
  } catch (const ConflictError& e) {
    if (e.keys() != conflicts) return {false, "combined merge reported the wrong key list"};
  }
  return {true, "27 cases match; combined conflict lists exactly " + std::to_string(conflicts.size()) + " keys"};
}

// 6 ---------------------------------------------------------------------------

constexpr double kMinRSquared = 0.9;
constexpr double kNoiseFactor = 1.15;

Outcome bench_trends() {
  const std::vector<std::size_t> ns{1, 2, 4, 8, 16};
  std::map<bench::Mode, std::vector<double>> means;
  std::map<bench::Mode, std::vector<std::string>> rows;
  for (std::size_t n : ns) {
    std::vector<bench::BenchSpec> specs;
    for (auto mode : bench::all_modes()) {
      bench::BenchSpec spec;
      spec.mode = mode;
      spec.n = n;
      spec.iters = 5000;
      spec.runs = 21;
      specs.push_back(spec);
    }
    for (const auto& r : bench::run_interleaved(specs)) {
      means[r.spec.mode].push_back(r.mean_ns);
      rows[r.spec.mode].push_back(bench::csv_row(r));
    }
  }
  for (auto mode : bench::all_modes()) {
    for (const auto& row : rows[mode]) std::printf("       %s\n", row.c_str());
  }

  std::vector<std::string> problems;
  std::vector<double> xs(ns.begin(), ns.end());
  std::map<bench::Mode, bench::LinearFit> fits;
  for (auto mode : bench::all_modes()) {
    fits[mode] = bench::linear_fit(xs, means[mode]);
    std::printf("       fit %-11s slope %9.1f ns/n  intercept %9.1f ns  R^2 %.3f\n",
                std::string(bench::mode_name(mode)).c_str(), fits[mode].slope, fits[mode].intercept,
                fits[mode].r_squared);
    if (fits[mode].r_squared < kMinRSquared) {
      problems.push_back(std::string(bench::mode_name(mode)) + " R^2 " + fmt("%.3f", fits[mode].r_squared));
    }
  }

  using bench::Mode;
  auto at_least = [&](Mode hi, Mode lo, std::size_t i, bool strict) {
    const double h = means[hi][i] * kNoiseFactor;
    const double l = means[lo][i];
    if (strict ? h > l : h >= l) return;
    problems.push_back("n=" + std::to_string(ns[i]) + " " + std::string(bench::mode_name(hi)) + " " +
                       fmt("%.0f", means[hi][i]) + " < " + std::string(bench::mode_name(lo)) + " " +
                       fmt("%.0f", means[lo][i]));
  };
  for (std::size_t i = 0; i < ns.size(); ++i) {
    at_least(Mode::reload, Mode::sync, i, true);
    at_least(Mode::sync, Mode::activate_cv, i, false);
    at_least(Mode::activate_cv, Mode::activate, i, false);
  }
  const double offset = fits[Mode::reload].intercept - fits[Mode::sync].intercept;
  if (offset <= 0) problems.push_back("reload-sync intercept " + fmt("%.0f", offset));

  if (!problems.empty()) {
    std::string all;
    for (const auto& p : problems) all += (all.empty() ? "" : "; ") + p;
    return {false, all};
  }
  return {true, "R^2 >= 0.9 for all modes, ordering holds at every n, reload-sync intercept " + fmt("%.0f ns", offset)};
}

// 7 ---------------------------------------------------------------------------

constexpr double kMaxReadRatio = 5.0;

Outcome read_overhead() {
  const auto r = bench::measure_read_overhead(1'000'000, 5);
  const std::string detail = fmt("CV %.2f ms vs volatile %.2f ms per 10^6 reads, ratio %.2f", r.cv_ns / 1e6,
                                 r.plain_ns / 1e6, r.ratio());
  return {r.ratio() < kMaxReadRatio, detail};
}

// 8 ---------------------------------------------------------------------------

constexpr int kPropagationSyncMs = 100;
constexpr auto kPropagationSlack = 200ms;

std::optional<int> wait_for_port(const testing::Child& server) {
  const auto deadline = Clock::now() + 10s;
  static const std::regex listening("listening on [^:]+:([0-9]+)");
  while (Clock::now() < deadline) {
    std::smatch m;
    const std::string out = server.out();
    if (std::regex_search(out, m, listening)) return std::stoi(m[1]);
    std::this_thread::sleep_for(10ms);
  }
  return std::nullopt;
}

int sequence_of(const std::string& value) {
  if (value.size() < 2 || value[0] != 'v') return 0;
  return std::stoi(value.substr(1));
}

Outcome propagation() {
  testing::TempDir dir;
  const auto config = dir / "greeting.ecf";
  testing::write_text(config, testing::read_text(testing::fixture("case_study.ecf")));
  testing::Child server({CV_DEMO_TOOL, "serve", "--listen", "127.0.0.1:0", "--config", config.string(), "--sync-ms",
                         std::to_string(kPropagationSyncMs), "--notify", "both"});
  const auto port = wait_for_port(server);
  if (!port) return {false, "server did not start: " + server.err()};

  const auto bound = std::chrono::milliseconds(kPropagationSyncMs) + kPropagationSlack;
  int last_seen = 0;
  int violations = 0;
  std::chrono::nanoseconds worst{0};
  for (int seq = 1; seq <= 50; ++seq) {
    const auto started = Clock::now();
    const auto sensor = testing::run_process({CV_DEMO_TOOL, "sensor", "--config", config.string(), "--key",
                                              "language/*", "--values", "v" + std::to_string(seq), "--count", "1",
                                              "--period-ms", "0", "--notify", "both"});
    if (sensor.exit_code != 0) return {false, "sensor failed: " + sensor.err};
    while (true) {
      const auto reply = demo::http_get("127.0.0.1", *port, "/");
      if (reply.outcome == demo::HttpResult::Outcome::ok) {
        const int seen = sequence_of(demo::element_text(reply.body, "language").value_or(""));
        if (seen < last_seen) ++violations;
        last_seen = std::max(last_seen, seen);
        if (seen == seq) break;
        if (seen > seq) return {false, "page shows v" + std::to_string(seen) + " before it was written"};
      }
      if (Clock::now() - started > bound + 2s) {
        return {false, "v" + std::to_string(seq) + " never reached the page"};
      }
      std::this_thread::sleep_for(2ms);
    }
    const auto latency = Clock::now() - started;
    worst = std::max<std::chrono::nanoseconds>(worst, latency);
    if (latency > bound) {
      return {false, "v" + std::to_string(seq) + " took " +
                         fmt("%.0f ms", std::chrono::duration<double, std::milli>(latency).count())};
    }
  }
  server.stop();
  const std::string detail = "50 updates, worst latency " +
                             fmt("%.0f ms (bound %.0f ms), ", std::chrono::duration<double, std::milli>(worst).count(),
                                 std::chrono::duration<double, std::milli>(bound).count()) +
                             std::to_string(violations) + " ordering violations";
  return {violations == 0, detail};
}

// 9 ---------------------------------------------------------------------------

constexpr double kMaxDegradation = 0.10;
constexpr double kModerateRate = 400;

Outcome degradation() {
  testing::TempDir dir;
  const auto config = dir / "greeting.ecf";
  testing::write_text(config, testing::read_text(testing::fixture("case_study.ecf")));
  testing::Child server({CV_DEMO_TOOL, "serve", "--listen", "127.0.0.1:0", "--config", config.string(), "--sync-ms",
                         "-1", "--notify", "none", "--force-reload"});
  const auto port = wait_for_port(server);
  if (!port) return {false, "server did not start: " + server.err()};

  demo::SweepConfig cfg;
  cfg.port = *port;
  cfg.rates = {kModerateRate};
  cfg.sync_ms = {-1, 1000, 100, 50, 10};
  cfg.duration = 2000ms;
  cfg.timeout = 1000ms;
  cfg.clients = 8;
  const auto rows = demo::sweep(cfg);
  std::printf("       %s\n", demo::sweep_csv_header().c_str());
  for (const auto& row : rows) std::printf("       %s\n", demo::sweep_csv_row(row).c_str());

  const double baseline = rows.at(0).reply_rate();
  std::vector<std::string> problems;
  if (rows.at(0).timeouts != 0) problems.push_back("baseline timeouts " + std::to_string(rows[0].timeouts));
  for (const auto& row : rows) {
    if (row.sync_ms < 50) continue;
    if (row.reply_rate() < baseline * (1 - kMaxDegradation)) {
      problems.push_back("sync " + std::to_string(row.sync_ms) + " ms: " + fmt("%.0f vs baseline %.0f req/s", row.reply_rate(), baseline));
    }
    if (row.timeouts != 0) problems.push_back("sync " + std::to_string(row.sync_ms) + " ms: " + std::to_string(row.timeouts) + " timeouts");
  }
  if (!problems.empty()) {
    std::string all;
    for (const auto& p : problems) all += (all.empty() ? "" : "; ") + p;
    return {false, all};
  }
  return {true, fmt("baseline %.0f req/s at %.0f offered; intervals >= 50 ms within 10%%, no timeouts", baseline,
                    kModerateRate)};
}

// 10 --------------------------------------------------------------------------

testing::ValueIndex index_generated(cvgen::Environment& env) {
  return {
      {"location", &env.location.value()},
      {"country", &env.country.value()},
      {"language", &env.language.value()},
      {"session", &env.session.value()},
      {"greeting", &env.greeting.value()},
      {"sensor/motion", &env.sensor.motion.value()},
      {"server/port", &env.server.port.value()},
      {"server/threads", &env.server.threads.value()},
      {"page/title", &env.page.title.value()},
      {"page/footer", &env.page.footer.value()},
      {"visits", &env.visits.value()},
      {"display/brightness", &env.display.brightness.value()},
      {"user/name", &env.user.name.value()},
      {"user/admin", &env.user.admin.value()},
      {"currency", &env.currency.value()},
      {"timezone", &env.timezone.value()},
      {"date/format", &env.date.format.value()},
  };
}

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    files[entry.path().filename().string()] = testing::read_text(entry.path());
  }
  return files;
}

Outcome codegen_gate() {
  testing::TempDir dir;
  const auto spec = testing::fixture("case_study.ecf").string();
  for (const char* out : {"a", "b"}) {
    const auto r = testing::run_process({CV_TOOL, "gen", spec, "-o", (dir / out).string()});
    if (r.exit_code != 0) return {false, "cv gen failed: " + r.err};
    if (r.out.rfind("17 contextual values", 0) != 0) return {false, "unexpected summary: " + r.out};
  }
  const auto a = read_dir(dir / "a");
  if (a != read_dir(dir / "b")) return {false, "two generations differ"};
  if (a != read_dir(CV_GEN_DIR)) return {false, "generation differs from the build's copy"};

  testing::write_text(dir / "use.cpp",
                      "#include \"environment.hpp\"\n"
                      "int main() {\n  cv::Context ctx;\n  cvgen::Environment env(ctx);\n"
                      "  env.language = \"german\";\n  env.language.activate();\n"
                      "  return env.greeting.get() == \"Guten Tag!\" ? 0 : 1;\n}\n");
  const auto compiled = testing::run_process({CV_CXX_COMPILER, "-std=c++20", "-fsyntax-only", "-Wall", "-Wextra",
                                              "-Wpedantic", "-Werror", "-I", CV_INCLUDE_DIR, "-I",
                                              (dir / "a").string(), (dir / "use.cpp").string()});
  if (compiled.exit_code != 0) return {false, "generated code does not compile: " + compiled.err.substr(0, 300)};

  std::vector<std::string> dynamic_trace;
  {
    StoreHandle handle(spec);
    Context ctx(handle.get().store);
    std::vector<std::unique_ptr<ContextualValue>> owned;
    testing::ValueIndex index;
    for (const auto& s : extract_specs(ctx.store())) {
      owned.push_back(std::make_unique<ContextualValue>(ctx, s));
      index[s.name()] = owned.back().get();
    }
    dynamic_trace = testing::case_study_trace(ctx, index, handle);
  }
  std::vector<std::string> generated_trace;
  {
    StoreHandle handle(spec);
    Context ctx(handle.get().store);
    cvgen::Environment env(ctx);
    if (ctx.values().size() != 17) return {false, "environment binds " + std::to_string(ctx.values().size())};
    generated_trace = testing::case_study_trace(ctx, index_generated(env), handle);

    StoreHandle fresh(spec);
    Context semantics(fresh.get().store);
    cvgen::Environment senv(semantics);
    senv.language = "german";
    senv.language.activate();
    const bool activated = senv.greeting.get() == "Guten Tag!";
    senv.language.deactivate();
    const bool reverted = senv.greeting.get() == "Hi!";
    senv.language.activate();
    senv.language = "";
    const bool emptied = senv.greeting.get() == "Hi!";
    if (!activated || !reverted || !emptied) return {false, "generated accessors fail the greeting semantics"};
  }
  if (dynamic_trace != generated_trace) {
    for (std::size_t i = 0; i < dynamic_trace.size(); ++i) {
      if (i >= generated_trace.size() || dynamic_trace[i] != generated_trace[i]) {
        return {false, "traces diverge at step " + std::to_string(i)};
      }
    }
    return {false, "trace lengths differ"};
  }
  return {true, "deterministic, compiles with -Werror, " + std::to_string(dynamic_trace.size()) +
                    " trace steps identical to dynamic values"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "semantics", 1s, semantics},
      {2, "cycle-rejection", 1s, cycles},
      {3, "order-preferences", 10s, order_preferences},
      {4, "oracle-equivalence", 60s, oracle_equivalence},
      {5, "merge", 1s, merge_suite},
      {6, "bench-trends", 300s, bench_trends},
      {7, "read-overhead", 30s, read_overhead},
      {8, "ipc-propagation", 60s, propagation},
      {9, "sync-degradation", 300s, degradation},
      {10, "codegen", 120s, codegen_gate},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) continue;
    ++ran;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    const double limit = static_cast<double>(c.limit.count());
    if (outcome.pass && seconds >= limit) {
      outcome.pass = false;
      outcome.detail += fmt(" (time limit %.0f s exceeded)", limit);
    }
    if (!outcome.pass) ++failed;
    std::printf("%s %2d %-18s %7.2f s  %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, seconds,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed;
}
