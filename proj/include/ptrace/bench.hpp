#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptrace/driver.hpp"
#include "ptrace/scenarios.hpp"

namespace ptrace {

// Parameter sweep over particle counts, worker counts, schedules, output
// protocols and scenario knobs. Cells run serially; each cell runs
// `warmup` throwaway repetitions followed by `reps` timed ones.
struct BenchMatrix {
  std::string scenario = "tc1";
  SimMode mode = SimMode::endpoint;
  std::vector<std::int64_t> np_list{1000};
  std::vector<int> worker_list{1};
  std::vector<ScheduleKind> schedules{ScheduleKind::dynamic};
  std::vector<OutputProtocolKind> protocols;  // empty: no timeseries writing
  std::vector<double> sigma2_list{2.5};       // tc1 only
  std::vector<int> ts_counts{5};              // tc2 only
  std::vector<int> refines{1};                // tc2 only
  int reps = 3;
  int warmup = 1;
  double scale = 0.2;
  std::uint64_t seed = 7;
  std::int64_t chunk = 1;

  void validate() const;
};

// `key = comma-separated-values` text file; unknown keys are an error.
BenchMatrix load_bench_matrix(const std::filesystem::path& path);

struct BenchRow {
  std::string scenario;
  SimMode mode = SimMode::endpoint;
  std::int64_t np = 0;
  int threads = 1;
  ScheduleKind schedule = ScheduleKind::dynamic;
  std::int64_t chunk = 1;
  bool has_protocol = false;
  OutputProtocolKind protocol = OutputProtocolKind::critical_single;
  double sigma2 = 0.0;
  int ts_count = 0;
  int refine = 1;
  bool failed = false;
  double median_s = 0.0;
  // Derived columns; quiet NaN marks "not applicable / absent".
  double speedup = 0.0;
  double ratio_dyn_sta = 0.0;
  double ratio_refined_base = 0.0;
};

inline constexpr const char* kBenchCsvHeader =
    "scenario,mode,np,threads,schedule,chunk,protocol,sigma2,ts_count,refine,"
    "rep_median_s,speedup,ratio_dyn_sta,ratio_refined_base";

// Runs the sweep, fills the derived ratio columns and writes the CSV.
// Flow fields are solved once per (scenario, sigma2, refine) coordinate
// and reused, so flow solving never enters the timed loop. A failed cell
// is recorded with `failed` in its timing column; the sweep continues.
std::vector<BenchRow> run_bench(const BenchMatrix& matrix,
                                const std::filesystem::path& out_csv,
                                const std::filesystem::path& scratch_dir);

void write_bench_csv(const std::vector<BenchRow>& rows,
                     const std::filesystem::path& out_csv);
std::vector<BenchRow> read_bench_csv(const std::filesystem::path& csv);

// Markdown tables derived purely from the CSV: speedup vs particle count
// per schedule, dynamic/static runtime ratio vs sigma2, protocol
// comparison, and refined/base runtime ratio vs particle count. Absent
// matrix coordinates render as "-".
void emit_speedup_report(const std::filesystem::path& csv,
                         const std::filesystem::path& report_path);

}  // namespace ptrace
