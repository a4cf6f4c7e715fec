#pragma once

// Command-line front end. dispatch() never exits the process; it returns
// 0 on success, 1 when the parameters or inputs are rejected, 2 on a usage
// error, and writes everything to the given streams.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "throughputlab/bench.hpp"
#include "throughputlab/cost_model.hpp"
#include "throughputlab/csv.hpp"
#include "throughputlab/errors.hpp"
#include "throughputlab/sim/programs.hpp"
#include "throughputlab/sim/simulator.hpp"

namespace tlab::cli {

inline constexpr const char* kHostTagEnv = "THROUGHPUTLAB_HOST_TAG";

namespace detail {

inline std::string printf_str(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Output {
  bool csv = false;
  std::string out_path;
  std::string host_tag;

  void attach(CLI::App& sub) {
    sub.add_flag("--csv", csv, "Write rows in the shared CSV schema to stdout instead of text (default: off)");
    sub.add_option("--out", out_path, "Also append rows to this CSV file (default: none)");
    sub.add_option("--host-tag", host_tag, "Machine label stored in each row (default: empty)")
        ->envname(kHostTagEnv);
  }

  // Emits rows as CSV when requested; returns true if stdout was used.
  bool emit(std::span<const csv::Row> rows, std::ostream& out) const {
    if (!out_path.empty()) csv::write_csv(rows, out_path);
    if (csv) csv::write_rows(out, rows);
    return csv;
  }
};

struct CostFlags {
  double alpha = 1.0;
  std::int64_t W = 1;
  std::int64_t Ri = 1;
  std::int64_t M = 1;
  std::int64_t X = 0;

  void attach(CLI::App& sub) {
    sub.add_option("--alpha", alpha, "Scale from per-cycle rate to reported unit");
    sub.add_option("--W", W, "Cost of a write or atomic read-modify-write, cycles");
    sub.add_option("--Ri", Ri, "Cost of reading a line invalidated by another worker, cycles");
    sub.add_option("--M", M, "Cost of a shared read of the stack head, cycles");
    sub.add_option("--X", X, "Alternative contended RMW cost, cycles (recorded only)");
  }

  CostModel model() const {
    CostModel m;
    m.alpha = alpha;
    m.W = W;
    m.Ri = Ri;
    m.M = M;
    m.X = X;
    m.validate();
    return m;
  }
};

struct Grid {
  std::vector<std::int64_t> N{1};
  std::vector<std::int64_t> C{0};
  std::vector<std::int64_t> P{0};

  void attach(CLI::App& sub) {
    sub.add_option("--N", N, "Worker counts (comma-separated list)")->delimiter(',');
    sub.add_option("--C", C, "Critical-section sizes, cycles (list)")->delimiter(',');
    sub.add_option("--P", P, "Parallel-section sizes, cycles (list)")->delimiter(',');
  }

  template <typename F>
  void each(F&& f) const {
    for (auto n : N) {
      for (auto c : C) {
        for (auto p : P) f(WorkloadParams{n, c, p});
      }
    }
  }

  std::size_t size() const { return N.size() * C.size() * P.size(); }
};

inline std::string point_prefix(const WorkloadParams& w, bool many) {
  if (!many) return {};
  return printf_str("N=%lld C=%lld P=%lld ", static_cast<long long>(w.N),
                    static_cast<long long>(w.C), static_cast<long long>(w.P));
}

// ---- report -----------------------------------------------------------------

using JoinKey = std::tuple<std::string, std::optional<std::int64_t>, std::optional<std::int64_t>,
                           std::optional<std::int64_t>>;

struct Joined {
  std::vector<double> predict, sim, bench;
};

inline std::string cell(const std::optional<std::int64_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

inline std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::string num(const std::optional<double>& v) {
  return v ? printf_str("%.6g", *v) : std::string();
}

inline std::string pct(const std::optional<double>& v) {
  return v ? printf_str("%+.2f%%", *v * 100.0) : std::string();
}

// A key is listed when rows from at least two sources meet there, or when the
// input holds a single source. Errors are relative to the prediction.
inline void print_report(const std::vector<csv::Row>& rows, std::ostream& out, std::ostream& err) {
  std::map<JoinKey, Joined> table;
  bool seen[3] = {false, false, false};
  for (const auto& r : rows) {
    if (!r.throughput_ops_s) continue;
    Joined& j = table[JoinKey{r.structure, r.N, r.C, r.P}];
    if (r.source == "predict") {
      j.predict.push_back(*r.throughput_ops_s);
      seen[0] = true;
    } else if (r.source == "sim") {
      j.sim.push_back(*r.throughput_ops_s);
      seen[1] = true;
    } else {
      j.bench.push_back(*r.throughput_ops_s);
      seen[2] = true;
    }
  }
  const bool single_source = (seen[0] + seen[1] + seen[2]) <= 1;

  out << printf_str("%-10s %6s %8s %10s %14s %14s %14s %10s %10s\n", "structure", "N", "C", "P",
                    "predict", "sim", "bench", "err_sim", "err_bench");
  double abs_sim = 0.0, abs_bench = 0.0;
  std::size_t n_sim = 0, n_bench = 0, listed = 0;
  for (const auto& [key, j] : table) {
    const int sources = !j.predict.empty() + !j.sim.empty() + !j.bench.empty();
    if (sources < 2 && !single_source) continue;
    ++listed;
    const auto p = mean(j.predict);
    const auto s = mean(j.sim);
    const auto b = mean(j.bench);
    std::optional<double> es, eb;
    if (p && *p > 0.0 && s) {
      es = (*s - *p) / *p;
      abs_sim += std::fabs(*es);
      ++n_sim;
    }
    if (p && *p > 0.0 && b) {
      eb = (*b - *p) / *p;
      abs_bench += std::fabs(*eb);
      ++n_bench;
    }
    out << printf_str("%-10s %6s %8s %10s %14s %14s %14s %10s %10s\n", std::get<0>(key).c_str(),
                      cell(std::get<1>(key)).c_str(), cell(std::get<2>(key)).c_str(),
                      cell(std::get<3>(key)).c_str(), num(p).c_str(), num(s).c_str(),
                      num(b).c_str(), pct(es).c_str(), pct(eb).c_str());
  }
  const auto mape = [](double total, std::size_t n) {
    return n ? printf_str("%.2f%% (%zu rows)", 100.0 * total / static_cast<double>(n), n)
             : std::string("n/a");
  };
  out << "MAPE sim=" << mape(abs_sim, n_sim) << " bench=" << mape(abs_bench, n_bench) << '\n';
  if (listed == 0) err << "warning: no rows share (structure, N, C, P) across sources\n";
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Throughput predictions, simulations and benchmarks for an MCS lock, a Treiber "
               "stack and a fat-node skip-list set.",
               "throughputlab"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  // predict
  auto* predict = app.add_subcommand("predict", "Closed-form throughput for the lock or stack workload");
  std::string predict_structure = "mcs";
  detail::CostFlags predict_costs;
  detail::Grid predict_grid;
  detail::Output predict_out;
  predict->add_option("--structure", predict_structure, "Workload: mcs or treiber")
      ->check(CLI::IsMember({"mcs", "treiber"}));
  predict_costs.attach(*predict);
  predict_grid.attach(*predict);
  predict_out.attach(*predict);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run the discrete-event schedule simulator");
  std::string sim_structure = "mcs";
  detail::CostFlags sim_costs;
  detail::Grid sim_grid;
  detail::Output sim_out;
  std::int64_t horizon = 1'000'000;
  std::int64_t warmup = 100'000;
  std::uint64_t sim_seed = 0;
  double threshold = sim::SimOptions{}.saturation_wait_threshold;
  simulate->add_option("--structure", sim_structure, "Workload: mcs or treiber")
      ->check(CLI::IsMember({"mcs", "treiber"}));
  sim_costs.attach(*simulate);
  sim_grid.attach(*simulate);
  simulate->add_option("--horizon", horizon, "Simulated cycles, warmup included");
  simulate->add_option("--warmup", warmup, "Cycles excluded from the measurement");
  simulate->add_option("--seed", sim_seed, "Tie-break rotation seed");
  simulate->add_option("--wait-threshold", threshold,
                       "Mean wait fraction above which a run is classified Saturated");
  sim_out.attach(*simulate);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Measure real-thread throughput");
  std::string bench_structure = "mcs";
  detail::Grid bench_grid;
  std::vector<std::int64_t> bench_k{32};
  std::vector<std::int64_t> mix{90, 5, 5};
  bench::BenchConfig bench_defaults;
  std::int64_t key_range = bench_defaults.key_range;
  double prefill = bench_defaults.prefill;
  double bench_warmup = bench_defaults.warmup_s;
  double duration = bench_defaults.duration_s;
  std::uint64_t bench_seed = 0;
  bool pin = false;
  int repeats = 1;
  detail::Output bench_out;
  bench_cmd->add_option("--structure", bench_structure, "Structure: mcs, treiber or skiplist")
      ->check(CLI::IsMember({"mcs", "treiber", "skiplist"}));
  bench_grid.attach(*bench_cmd);
  const auto attach_set_flags = [&](CLI::App& sub) {
    sub.add_option("--mix", mix, "contains,insert,remove percentages summing to 100")
        ->delimiter(',')
        ->expected(3);
    sub.add_option("--key-range", key_range, "Keys are drawn from [0, key-range)");
    sub.add_option("--prefill", prefill, "Fraction of key-range inserted (pushed) before timing");
    sub.add_option("--warmup", bench_warmup, "Seconds run before measuring");
    sub.add_option("--duration", duration, "Seconds measured");
    sub.add_option("--seed", bench_seed, "Base seed; worker i uses seed + i");
    sub.add_flag("--pin", pin, "Pin worker i to CPU i mod core count (default: off)");
    sub.add_option("--repeats", repeats, "Runs per configuration")->check(CLI::PositiveNumber);
  };
  bench_cmd->add_option("--k", bench_k, "Skip-list node capacities (list of 1,2,4,8,16,32,64)")
      ->delimiter(',');
  attach_set_flags(*bench_cmd);
  bench_out.attach(*bench_cmd);

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Skip-list throughput ratio of two node capacities");
  std::int64_t k_baseline = 1;
  std::int64_t k_candidate = 32;
  std::int64_t compare_n = 4;
  detail::Output compare_out;
  compare_cmd->add_option("--k-baseline", k_baseline, "Baseline node capacity");
  compare_cmd->add_option("--k-candidate", k_candidate, "Candidate node capacity");
  compare_cmd->add_option("--N", compare_n, "Worker count");
  attach_set_flags(*compare_cmd);
  compare_out.attach(*compare_cmd);

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit alpha to bench rows by least squares");
  std::vector<std::string> calibrate_inputs;
  std::string calibrate_structure = "mcs";
  detail::CostFlags calibrate_costs;
  detail::Output calibrate_out;
  calibrate->add_option("inputs", calibrate_inputs, "CSV files in the shared schema")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--structure", calibrate_structure, "Workload: mcs or treiber")
      ->check(CLI::IsMember({"mcs", "treiber"}));
  calibrate_costs.attach(*calibrate);
  calibrate_out.attach(*calibrate);

  // report
  auto* report = app.add_subcommand("report", "Join predict, sim and bench rows and print errors");
  std::vector<std::string> report_inputs;
  detail::Output report_out;
  report->add_option("inputs", report_inputs, "CSV files in the shared schema")
      ->required()
      ->check(CLI::ExistingFile);
  report_out.attach(*report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (predict->parsed()) {
      const WorkloadKind kind = parse_workload_kind(predict_structure);
      const CostModel model = predict_costs.model();
      std::vector<csv::Row> rows;
      std::ostringstream text;
      const bool many = predict_grid.size() > 1;
      predict_grid.each([&](const WorkloadParams& w) {
        const Prediction p = tlab::predict(kind, model, w);
        rows.push_back(csv::predict_row(kind, model, w, predict_out.host_tag));
        text << detail::point_prefix(w, many)
             << detail::printf_str("regime=%s throughput=%.6f\n", std::string(to_string(p.regime)).c_str(),
                                   p.throughput);
      });
      if (!predict_out.emit(rows, out)) out << text.str();
      return 0;
    }

    if (simulate->parsed()) {
      const WorkloadKind kind = parse_workload_kind(sim_structure);
      const CostModel model = sim_costs.model();
      sim::SimOptions options;
      options.saturation_wait_threshold = threshold;
      std::vector<csv::Row> rows;
      std::ostringstream text;
      const bool many = sim_grid.size() > 1;
      sim_grid.each([&](const WorkloadParams& w) {
        w.validate();
        const auto program = sim::build_program(kind, w.C, w.P);
        sim::SweepRow row{std::string(to_string(kind)), model, w.N, w.C, w.P, sim_seed,
                          sim::simulate(program, model, w.N, horizon, warmup, sim_seed, options)};
        rows.push_back(csv::sim_row(kind, row, sim_out.host_tag));
        text << detail::point_prefix(w, many)
             << detail::printf_str("regime=%s throughput=%.6f ops=%llu seed=%llu\n",
                                   std::string(to_string(row.result.regime_observed)).c_str(),
                                   model.alpha * row.result.throughput_per_cycle,
                                   static_cast<unsigned long long>(row.result.total_ops),
                                   static_cast<unsigned long long>(sim_seed));
      });
      if (!sim_out.emit(rows, out)) out << text.str();
      return 0;
    }

    const auto set_config = [&](bench::BenchConfig& cfg) {
      if (mix.size() != 3) throw DomainError("mix needs three percentages");
      cfg.mix = {mix[0], mix[1], mix[2]};
      cfg.key_range = key_range;
      cfg.prefill = prefill;
      cfg.warmup_s = bench_warmup;
      cfg.duration_s = duration;
      cfg.seed = bench_seed;
      cfg.pin = pin;
    };

    if (bench_cmd->parsed()) {
      bench::BenchConfig base;
      base.structure = bench::parse_structure(bench_structure);
      base.host_tag = bench_out.host_tag;
      set_config(base);
      const bool set = base.structure == bench::Structure::SkipList;
      // Validate every configuration before spending time on any of them.
      std::vector<bench::BenchConfig> configs;
      for (auto k : set ? bench_k : std::vector<std::int64_t>{base.k}) {
        bench_grid.each([&](const WorkloadParams& w) {
          bench::BenchConfig cfg = base;
          cfg.N = w.N;
          cfg.C = w.C;
          cfg.P = w.P;
          cfg.k = k;
          cfg.validate();
          configs.push_back(cfg);
        });
      }
      std::vector<csv::Row> rows;
      std::ostringstream text;
      for (const auto& cfg : configs) {
        for (int r = 0; r < repeats; ++r) {
          const bench::BenchRecord rec = bench::run_bench(cfg);
          if (!rec.consistent()) {
            throw HarnessError("consistency check failed for " + std::string(to_string(cfg.structure)) +
                               " N=" + std::to_string(cfg.N));
          }
          rows.push_back(bench::to_row(rec));
          text << detail::printf_str(
              "structure=%s N=%lld C=%lld P=%lld%s throughput=%.1f ops/s duration=%.3fs seed=%llu\n",
              std::string(to_string(cfg.structure)).c_str(), static_cast<long long>(cfg.N),
              static_cast<long long>(cfg.C), static_cast<long long>(cfg.P),
              set ? detail::printf_str(" k=%lld", static_cast<long long>(cfg.k)).c_str() : "",
              rec.throughput, rec.measured_duration_s, static_cast<unsigned long long>(cfg.seed));
        }
      }
      if (!bench_out.emit(rows, out)) out << text.str();
      return 0;
    }

    if (compare_cmd->parsed()) {
      bench::BenchConfig base;
      base.structure = bench::Structure::SkipList;
      base.N = compare_n;
      base.host_tag = compare_out.host_tag;
      set_config(base);
      bench::BenchConfig baseline_cfg = base;
      baseline_cfg.k = k_baseline;
      bench::BenchConfig candidate_cfg = base;
      candidate_cfg.k = k_candidate;
      baseline_cfg.validate();
      candidate_cfg.validate();
      std::vector<bench::BenchRecord> baseline, candidate;
      for (int r = 0; r < repeats; ++r) {
        baseline.push_back(bench::run_set_bench(baseline_cfg));
        candidate.push_back(bench::run_set_bench(candidate_cfg));
      }
      const bench::ComparisonReport cmp = bench::compare(baseline, candidate);
      std::vector<csv::Row> rows;
      for (const auto& rec : baseline) rows.push_back(bench::to_row(rec));
      for (const auto& rec : candidate) rows.push_back(bench::to_row(rec));
      if (!compare_out.emit(rows, out)) {
        out << detail::printf_str("k=%lld vs k=%lld N=%lld seed=%llu\n", static_cast<long long>(k_candidate),
                                  static_cast<long long>(k_baseline), static_cast<long long>(compare_n),
                                  static_cast<unsigned long long>(bench_seed));
        for (double ratio : cmp.ratios) out << detail::printf_str("ratio=%.4f\n", ratio);
        out << detail::printf_str("min=%.4f median=%.4f max=%.4f\n", cmp.min, cmp.median, cmp.max);
      }
      return 0;
    }

    if (calibrate->parsed()) {
      const WorkloadKind kind = parse_workload_kind(calibrate_structure);
      const CostModel model = calibrate_costs.model();
      std::vector<Observation> observations;
      for (const auto& path : calibrate_inputs) {
        for (const auto& row : csv::read_csv(path)) {
          if (row.source == "bench" && row.structure == calibrate_structure) {
            observations.push_back(bench::to_observation(row));
          }
        }
      }
      if (observations.empty()) {
        throw CalibrationError("no bench rows for structure " + calibrate_structure);
      }
      const CostModel fitted = fit_alpha(observations, model, kind);
      std::vector<csv::Row> rows;
      for (const auto& o : observations) {
        rows.push_back(csv::predict_row(kind, fitted, o.workload, calibrate_out.host_tag));
      }
      if (!calibrate_out.emit(rows, out)) {
        out << detail::printf_str("alpha=%.10g records=%zu\n", fitted.alpha, observations.size());
      }
      return 0;
    }

    if (report->parsed()) {
      std::vector<csv::Row> rows;
      for (const auto& path : report_inputs) {
        auto more = csv::read_csv(path);
        rows.insert(rows.end(), more.begin(), more.end());
      }
      if (!report_out.emit(rows, out)) detail::print_report(rows, out, err);
      return 0;
    }
  } catch (const std::invalid_argument& e) {  // DomainError and friends
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {  // CSV, calibration, harness, simulation
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

// argv without the program name.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"throughputlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tlab::cli
