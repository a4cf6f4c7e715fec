#pragma once

// Shared result table. Every producer (closed-form predictions, simulator
// sweeps, real-thread benchmarks) writes rows under one fixed header; fields
// that do not apply to a row are left empty. Values never contain commas, so
// no quoting is done or accepted.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "throughputlab/cost_model.hpp"
#include "throughputlab/errors.hpp"
#include "throughputlab/sim/simulator.hpp"

namespace tlab::csv {

inline constexpr std::string_view kHeader =
    "source,structure,N,C,P,k,mix_contains,mix_insert,mix_remove,key_range,prefill,alpha,W,Ri,M,"
    "duration_s,throughput_ops_s,seed,host_tag";

inline constexpr std::size_t kColumns = 19;

struct Row {
  std::string source;  // bench | sim | predict
  std::string structure;
  std::optional<std::int64_t> N, C, P, k;
  std::optional<std::int64_t> mix_contains, mix_insert, mix_remove;
  std::optional<std::int64_t> key_range;
  std::optional<double> prefill;
  std::optional<double> alpha;
  std::optional<std::int64_t> W, Ri, M;
  std::optional<double> duration_s;
  std::optional<double> throughput_ops_s;
  std::optional<std::uint64_t> seed;
  std::string host_tag;

  bool operator==(const Row&) const = default;
};

inline bool is_source(std::string_view s) { return s == "bench" || s == "sim" || s == "predict"; }

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <typename T>
void put(std::string& out, const std::optional<T>& v) {
  out += ',';
  if (!v) return;
  if constexpr (std::is_floating_point_v<T>) {
    out += fmt(*v);
  } else {
    out += std::to_string(*v);
  }
}

inline void check_text(std::string_view field, std::string_view value) {
  if (value.find_first_of(",\r\n") != std::string_view::npos) {
    throw CsvError("csv: " + std::string(field) + " must not contain commas or newlines: '" +
                   std::string(value) + "'");
  }
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> get(std::string_view text, std::string_view column, std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw CsvError("csv line " + std::to_string(line_no) + ": bad " + std::string(column) +
                   " value '" + std::string(text) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw CsvError("csv line " + std::to_string(line_no) + ": non-finite " +
                     std::string(column));
    }
  }
  return value;
}

}  // namespace detail

inline std::string format_row(const Row& r) {
  detail::check_text("structure", r.structure);
  detail::check_text("host_tag", r.host_tag);
  if (!is_source(r.source)) throw CsvError("csv: unknown source '" + r.source + "'");
  std::string out = r.source;
  out += ',';
  out += r.structure;
  detail::put(out, r.N);
  detail::put(out, r.C);
  detail::put(out, r.P);
  detail::put(out, r.k);
  detail::put(out, r.mix_contains);
  detail::put(out, r.mix_insert);
  detail::put(out, r.mix_remove);
  detail::put(out, r.key_range);
  detail::put(out, r.prefill);
  detail::put(out, r.alpha);
  detail::put(out, r.W);
  detail::put(out, r.Ri);
  detail::put(out, r.M);
  detail::put(out, r.duration_s);
  detail::put(out, r.throughput_ops_s);
  detail::put(out, r.seed);
  out += ',';
  out += r.host_tag;
  return out;
}

inline Row parse_row(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto f = detail::split(line);
  if (f.size() != kColumns) {
    throw CsvError("csv line " + std::to_string(line_no) + ": expected " +
                   std::to_string(kColumns) + " fields, got " + std::to_string(f.size()));
  }
  Row r;
  r.source = std::string(f[0]);
  if (!is_source(r.source)) {
    throw CsvError("csv line " + std::to_string(line_no) + ": unknown source '" + r.source + "'");
  }
  using detail::get;
  r.structure = std::string(f[1]);
  r.N = get<std::int64_t>(f[2], "N", line_no);
  r.C = get<std::int64_t>(f[3], "C", line_no);
  r.P = get<std::int64_t>(f[4], "P", line_no);
  r.k = get<std::int64_t>(f[5], "k", line_no);
  r.mix_contains = get<std::int64_t>(f[6], "mix_contains", line_no);
  r.mix_insert = get<std::int64_t>(f[7], "mix_insert", line_no);
  r.mix_remove = get<std::int64_t>(f[8], "mix_remove", line_no);
  r.key_range = get<std::int64_t>(f[9], "key_range", line_no);
  r.prefill = get<double>(f[10], "prefill", line_no);
  r.alpha = get<double>(f[11], "alpha", line_no);
  r.W = get<std::int64_t>(f[12], "W", line_no);
  r.Ri = get<std::int64_t>(f[13], "Ri", line_no);
  r.M = get<std::int64_t>(f[14], "M", line_no);
  r.duration_s = get<double>(f[15], "duration_s", line_no);
  r.throughput_ops_s = get<double>(f[16], "throughput_ops_s", line_no);
  r.seed = get<std::uint64_t>(f[17], "seed", line_no);
  r.host_tag = std::string(f[18]);
  return r;
}

inline void write_rows(std::ostream& out, std::span<const Row> rows, bool header = true) {
  if (header) out << kHeader << '\n';
  for (const Row& r : rows) out << format_row(r) << '\n';
}

// Appends under the fixed header. A new or empty file gets the header first;
// an existing file must already start with it.
inline void write_csv(std::span<const Row> rows, const std::filesystem::path& path) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const Row& r : rows) lines.push_back(format_row(r));

  std::error_code ec;
  const bool has_content = std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) > 0;
  if (has_content) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    if (first != kHeader) {
      throw CsvError(path.string() + ": existing header does not match: '" + first + "'");
    }
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw CsvError(path.string() + ": cannot open for writing");
  if (!has_content) out << kHeader << '\n';
  for (const auto& line : lines) out << line << '\n';
  out.flush();
  if (!out) throw CsvError(path.string() + ": write failed");
}

inline std::vector<Row> read_csv(std::istream& in, std::string_view name = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(std::string(name) + ": empty input, missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw CsvError(std::string(name) + ": bad header '" + line + "'");
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      rows.push_back(parse_row(line, line_no));
    } catch (const CsvError& e) {
      throw CsvError(std::string(name) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<Row> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(path.string() + ": cannot open for reading");
  return read_csv(in, path.string());
}

// ---- row builders for the non-bench sources --------------------------------

namespace detail {

inline void put_costs(Row& r, WorkloadKind kind, const CostModel& model) {
  r.alpha = model.alpha;
  r.W = model.W;
  if (kind == WorkloadKind::Mcs) {
    r.Ri = model.Ri;
  } else {
    r.M = model.M;
  }
}

}  // namespace detail

// The stack workload has no critical section, so its rows leave C empty.
inline Row predict_row(WorkloadKind kind, const CostModel& model, const WorkloadParams& w,
                       std::string host_tag = {}) {
  Row r;
  r.source = "predict";
  r.structure = std::string(to_string(kind));
  r.N = w.N;
  if (kind == WorkloadKind::Mcs) r.C = w.C;
  r.P = w.P;
  detail::put_costs(r, kind, model);
  r.throughput_ops_s = predict(kind, model, w).throughput;
  r.host_tag = std::move(host_tag);
  return r;
}

// Simulated throughput is per cycle; alpha converts it like a prediction.
inline Row sim_row(WorkloadKind kind, const sim::SweepRow& s, std::string host_tag = {}) {
  Row r;
  r.source = "sim";
  r.structure = std::string(to_string(kind));
  r.N = s.N;
  if (kind == WorkloadKind::Mcs) r.C = s.C;
  r.P = s.P;
  detail::put_costs(r, kind, s.model);
  r.throughput_ops_s = s.model.alpha * s.result.throughput_per_cycle;
  r.seed = s.seed;
  r.host_tag = std::move(host_tag);
  return r;
}

}  // namespace tlab::csv
