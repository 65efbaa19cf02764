#include "ptrace/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ptrace {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Key of everything except the coordinate being compared.
std::string row_key_except(const BenchRow& r, const std::string& drop) {
  std::ostringstream os;
  os << r.scenario << '|' << to_string(r.mode) << '|';
  if (drop != "np") os << r.np;
  os << '|';
  if (drop != "threads") os << r.threads;
  os << '|';
  if (drop != "schedule") os << to_string(r.schedule) << '|' << r.chunk;
  os << '|';
  if (drop != "protocol")
    os << (r.has_protocol ? to_string(r.protocol) : "");
  os << '|' << r.sigma2 << '|' << r.ts_count << '|';
  if (drop != "refine") os << r.refine;
  return os.str();
}

}  // namespace

void BenchMatrix::validate() const {
  if (scenario != "tc1" && scenario != "tc2")
    throw std::invalid_argument("bench: scenario must be tc1 or tc2");
  if (reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
  if (warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  if (np_list.empty() || worker_list.empty() || schedules.empty())
    throw std::invalid_argument("bench: np, threads and schedule lists must be non-empty");
  for (int w : worker_list)
    if (w < 1) throw std::invalid_argument("bench: worker counts must be >= 1");
  for (auto np : np_list)
    if (np < 1) throw std::invalid_argument("bench: particle counts must be >= 1");
  if (mode == SimMode::timeseries && protocols.empty())
    throw std::invalid_argument("bench: timeseries mode needs a protocol list");
  if (mode == SimMode::endpoint && !protocols.empty())
    throw std::invalid_argument("bench: endpoint mode takes no protocol list");
}

BenchMatrix load_bench_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("bench: cannot open matrix file " + path.string());
  BenchMatrix m;
  m.sigma2_list.clear();
  m.ts_counts.clear();
  m.refines.clear();
  m.np_list.clear();
  m.worker_list.clear();
  m.schedules.clear();
  bool saw_sigma2 = false, saw_ts = false, saw_refine = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bench: matrix line " + std::to_string(lineno) +
                               " is not 'key = values'");
    std::string key = trim(s.substr(0, eq));
    std::vector<std::string> vals = split(s.substr(eq + 1), ',');
    try {
      if (key == "scenario") m.scenario = vals.at(0);
      else if (key == "mode") m.mode = sim_mode_from_string(vals.at(0));
      else if (key == "np")
        for (auto& v : vals) m.np_list.push_back(std::stoll(v));
      else if (key == "threads")
        for (auto& v : vals) m.worker_list.push_back(std::stoi(v));
      else if (key == "schedule")
        for (auto& v : vals) m.schedules.push_back(schedule_from_string(v));
      else if (key == "protocol")
        for (auto& v : vals) m.protocols.push_back(protocol_from_string(v));
      else if (key == "sigma2") {
        saw_sigma2 = true;
        for (auto& v : vals) m.sigma2_list.push_back(std::stod(v));
      } else if (key == "ts_count") {
        saw_ts = true;
        for (auto& v : vals) m.ts_counts.push_back(std::stoi(v));
      } else if (key == "refine") {
        saw_refine = true;
        for (auto& v : vals) m.refines.push_back(std::stoi(v));
      } else if (key == "reps") m.reps = std::stoi(vals.at(0));
      else if (key == "warmup") m.warmup = std::stoi(vals.at(0));
      else if (key == "scale") m.scale = std::stod(vals.at(0));
      else if (key == "seed") m.seed = std::stoull(vals.at(0));
      else if (key == "chunk") m.chunk = std::stoll(vals.at(0));
      else
        throw std::runtime_error("bench: unknown matrix key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("bench: matrix line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  if (!saw_sigma2) m.sigma2_list = {2.5};
  if (!saw_ts) m.ts_counts = {5};
  if (!saw_refine) m.refines = {1};
  if (m.np_list.empty()) m.np_list = {1000};
  if (m.worker_list.empty()) m.worker_list = {1};
  if (m.schedules.empty()) m.schedules = {ScheduleKind::dynamic};
  m.validate();
  return m;
}

namespace {

struct CachedScenario {
  ScenarioSpec spec;
  FlowStore store;
};

}  // namespace

std::vector<BenchRow> run_bench(const BenchMatrix& matrix,
                                const std::filesystem::path& out_csv,
                                const std::filesystem::path& scratch_dir) {
  matrix.validate();
  std::filesystem::create_directories(scratch_dir);

  bool tc1 = matrix.scenario == "tc1";
  std::vector<double> sigma2s = tc1 ? matrix.sigma2_list : std::vector<double>{0.0};
  std::vector<int> refines = tc1 ? std::vector<int>{1} : matrix.refines;
  std::vector<int> ts_counts =
      matrix.mode == SimMode::timeseries ? matrix.ts_counts : std::vector<int>{0};
  std::vector<std::optional<OutputProtocolKind>> protocols;
  if (matrix.protocols.empty()) protocols.push_back(std::nullopt);
  else
    for (auto p : matrix.protocols) protocols.push_back(p);

  std::int64_t np_max = *std::max_element(matrix.np_list.begin(), matrix.np_list.end());

  // One solved scenario per flow-relevant coordinate.
  std::map<std::pair<double, int>, std::unique_ptr<CachedScenario>> cache;
  auto scenario_for = [&](double sigma2, int refine) -> CachedScenario& {
    auto key = std::make_pair(sigma2, refine);
    auto it = cache.find(key);
    if (it == cache.end()) {
      Scenario sc = tc1 ? build_tc1(sigma2, np_max, matrix.seed, matrix.scale)
                        : build_tc2(np_max, 5, refine, matrix.scale);
      std::vector<FlowSnapshot> snaps;
      snaps.push_back(std::move(sc.snapshot));
      auto cs = std::make_unique<CachedScenario>(
          CachedScenario{std::move(sc.spec), FlowStore(std::move(snaps))});
      it = cache.emplace(key, std::move(cs)).first;
    }
    return *it->second;
  };

  std::vector<BenchRow> rows;
  int cell_index = 0;
  for (double sigma2 : sigma2s)
    for (int refine : refines)
      for (int ts_count : ts_counts)
        for (std::int64_t np : matrix.np_list)
          for (ScheduleKind schedule : matrix.schedules)
            for (auto protocol : protocols)
              for (int threads : matrix.worker_list) {
                BenchRow row;
                row.scenario = matrix.scenario;
                row.mode = matrix.mode;
                row.np = np;
                row.threads = threads;
                row.schedule = schedule;
                row.chunk = matrix.chunk;
                row.has_protocol = protocol.has_value();
                if (protocol) row.protocol = *protocol;
                row.sigma2 = tc1 ? sigma2 : kAbsent;
                row.ts_count = ts_count;
                row.refine = refine;
                row.speedup = kAbsent;
                row.ratio_dyn_sta = kAbsent;
                row.ratio_refined_base = kAbsent;
                try {
                  CachedScenario& sc = scenario_for(sigma2, refine);
                  SimulationConfig config = sc.spec.default_config;
                  config.mode = matrix.mode;
                  config.release_plan =
                      redistribute_release_plan(sc.spec.release_plan, np);
                  config.schedule.kind = schedule;
                  config.schedule.chunk = matrix.chunk;
                  config.workers = threads;
                  if (protocol) config.protocol = *protocol;
                  if (matrix.mode == SimMode::timeseries)
                    config.timeseries.count = ts_count;
                  if (matrix.mode == SimMode::endpoint)
                    config.t_stop = kUntilTermination;
                  config.out_dir =
                      scratch_dir / ("cell" + std::to_string(cell_index));
                  std::vector<double> times;
                  for (int r = 0; r < matrix.warmup + matrix.reps; ++r) {
                    SimulationSummary summary = run_simulation(config, sc.store);
                    if (r >= matrix.warmup)
                      times.push_back(summary.elapsed_loop_s);
                  }
                  row.median_s = median(std::move(times));
                } catch (const std::exception& e) {
                  std::cerr << "bench: cell " << cell_index << " failed: "
                            << e.what() << "\n";
                  row.failed = true;
                }
                rows.push_back(row);
                ++cell_index;
              }

  // Derived columns against matched baseline rows.
  auto matched = [&](const BenchRow& r, const std::string& drop,
                     auto pred) -> const BenchRow* {
    std::string key = row_key_except(r, drop);
    for (const BenchRow& c : rows)
      if (!c.failed && pred(c) && row_key_except(c, drop) == key) return &c;
    return nullptr;
  };
  for (BenchRow& r : rows) {
    if (r.failed) continue;
    if (const BenchRow* base = matched(
            r, "threads", [](const BenchRow& c) { return c.threads == 1; }))
      if (base->median_s > 0.0) r.speedup = base->median_s / r.median_s;
    if (r.schedule == ScheduleKind::dynamic)
      if (const BenchRow* sta = matched(r, "schedule", [](const BenchRow& c) {
            return c.schedule == ScheduleKind::static_balanced;
          }))
        if (sta->median_s > 0.0) r.ratio_dyn_sta = r.median_s / sta->median_s;
    if (r.refine > 1)
      if (const BenchRow* base = matched(
              r, "refine", [](const BenchRow& c) { return c.refine == 1; }))
        if (base->median_s > 0.0)
          r.ratio_refined_base = r.median_s / base->median_s;
  }

  write_bench_csv(rows, out_csv);
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows,
                     const std::filesystem::path& out_csv) {
  if (out_csv.has_parent_path())
    std::filesystem::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("bench: cannot write " + out_csv.string());
  out << "# bench csv v1\n";
  out << "# reference: on the original 8-core desktop measurement, static"
         " T1/T8 = 5.09 and dynamic T1/T8 = 6.63 at np >= 1e5, sigma2 = 2.5;"
         " machine-specific, not expected elsewhere\n";
  out << kBenchCsvHeader << "\n";
  auto field = [](double v) { return std::isnan(v) ? std::string() : format_num(v); };
  for (const BenchRow& r : rows) {
    out << r.scenario << ',' << to_string(r.mode) << ',' << r.np << ','
        << r.threads << ',' << to_string(r.schedule) << ',' << r.chunk << ','
        << (r.has_protocol ? to_string(r.protocol) : "") << ','
        << field(r.sigma2) << ',' << (r.ts_count > 0 ? std::to_string(r.ts_count) : "")
        << ',' << r.refine << ','
        << (r.failed ? "failed" : format_num(r.median_s)) << ','
        << (r.failed ? "" : field(r.speedup)) << ','
        << (r.failed ? "" : field(r.ratio_dyn_sta)) << ','
        << (r.failed ? "" : field(r.ratio_refined_base)) << "\n";
  }
}

std::vector<BenchRow> read_bench_csv(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("bench: cannot open " + csv.string());
  std::vector<BenchRow> rows;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (!saw_header) {
      if (s != kBenchCsvHeader)
        throw std::runtime_error("bench: unexpected CSV header in " + csv.string());
      saw_header = true;
      continue;
    }
    std::vector<std::string> f = split(s, ',');
    if (f.size() != 14)
      throw std::runtime_error("bench: malformed CSV row: " + s);
    BenchRow r;
    r.scenario = f[0];
    r.mode = sim_mode_from_string(f[1]);
    r.np = std::stoll(f[2]);
    r.threads = std::stoi(f[3]);
    r.schedule = schedule_from_string(f[4]);
    r.chunk = std::stoll(f[5]);
    r.has_protocol = !f[6].empty();
    if (r.has_protocol) r.protocol = protocol_from_string(f[6]);
    r.sigma2 = f[7].empty() ? kAbsent : std::stod(f[7]);
    r.ts_count = f[8].empty() ? 0 : std::stoi(f[8]);
    r.refine = std::stoi(f[9]);
    if (f[10] == "failed") r.failed = true;
    else r.median_s = std::stod(f[10]);
    r.speedup = f[11].empty() ? kAbsent : std::stod(f[11]);
    r.ratio_dyn_sta = f[12].empty() ? kAbsent : std::stod(f[12]);
    r.ratio_refined_base = f[13].empty() ? kAbsent : std::stod(f[13]);
    rows.push_back(std::move(r));
  }
  if (!saw_header)
    throw std::runtime_error("bench: no header row in " + csv.string());
  return rows;
}

namespace {

// Generic pivot table: row label -> column label -> cell text.
void emit_table(std::ostream& out, const std::string& title,
                const std::vector<std::string>& row_labels,
                const std::vector<std::string>& col_labels,
                const std::string& corner,
                const std::map<std::pair<std::string, std::string>, std::string>& cells) {
  out << "## " << title << "\n\n";
  out << "| " << corner << " |";
  for (const auto& c : col_labels) out << " " << c << " |";
  out << "\n|" << std::string(corner.size() + 2, '-') << "|";
  for (const auto& c : col_labels) out << std::string(c.size() + 2, '-') << "|";
  out << "\n";
  for (const auto& r : row_labels) {
    out << "| " << r << " |";
    for (const auto& c : col_labels) {
      auto it = cells.find({r, c});
      out << " " << (it == cells.end() ? "-" : it->second) << " |";
    }
    out << "\n";
  }
  out << "\n";
}

std::string np_label(std::int64_t np) { return std::to_string(np); }

}  // namespace

void emit_speedup_report(const std::filesystem::path& csv,
                         const std::filesystem::path& report_path) {
  std::vector<BenchRow> rows = read_bench_csv(csv);
  if (report_path.has_parent_path())
    std::filesystem::create_directories(report_path.parent_path());
  std::ofstream out(report_path);
  if (!out)
    throw std::runtime_error("bench: cannot write " + report_path.string());
  out << "# Benchmark report\n\nDerived from " << csv.filename().string()
      << ". Timings are medians of repeated runs; absent matrix"
         " coordinates show as \"-\".\n\n";

  std::vector<BenchRow> ok;
  for (auto& r : rows)
    if (!r.failed) ok.push_back(r);

  auto sorted_unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };

  // Table 1: speedup vs particle count, one column per (schedule, threads).
  {
    std::vector<std::string> row_labels, col_labels;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    std::set<std::int64_t> nps;
    for (const auto& r : ok) {
      if (std::isnan(r.speedup)) continue;
      nps.insert(r.np);
      std::string col = std::string(to_string(r.schedule)) + " N=" +
                        std::to_string(r.threads);
      col_labels.push_back(col);
      cells[{np_label(r.np), col}] = format_num(r.speedup);
    }
    for (auto np : nps) row_labels.push_back(np_label(np));
    emit_table(out, "Speedup vs particle count", row_labels,
               sorted_unique(col_labels), "np", cells);
  }

  // Table 2: dynamic/static runtime ratio vs sigma2, per thread count.
  {
    std::vector<std::string> row_labels, col_labels;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    std::set<double> sigmas;
    std::map<std::pair<std::string, std::string>, std::int64_t> best_np;
    for (const auto& r : ok) {
      if (std::isnan(r.ratio_dyn_sta) || std::isnan(r.sigma2)) continue;
      std::string row = format_num(r.sigma2);
      std::string col = "N=" + std::to_string(r.threads);
      auto key = std::make_pair(row, col);
      // Largest particle count wins when several are present.
      if (best_np.count(key) && best_np[key] >= r.np) continue;
      best_np[key] = r.np;
      sigmas.insert(r.sigma2);
      col_labels.push_back(col);
      cells[key] = format_num(r.ratio_dyn_sta);
    }
    for (double s : sigmas) row_labels.push_back(format_num(s));
    emit_table(out, "Dynamic/static runtime ratio vs sigma2", row_labels,
               sorted_unique(col_labels), "sigma2", cells);
  }

  // Table 3: protocol comparison, speedup per protocol and thread count.
  {
    std::vector<std::string> row_labels, col_labels;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    std::map<std::pair<std::string, std::string>, std::int64_t> best_np;
    for (const auto& r : ok) {
      if (!r.has_protocol || std::isnan(r.speedup)) continue;
      std::string row = to_string(r.protocol);
      std::string col = "N=" + std::to_string(r.threads);
      auto key = std::make_pair(row, col);
      if (best_np.count(key) && best_np[key] >= r.np) continue;
      best_np[key] = r.np;
      row_labels.push_back(row);
      col_labels.push_back(col);
      cells[key] = format_num(r.speedup);
    }
    emit_table(out, "Output protocol speedup", sorted_unique(row_labels),
               sorted_unique(col_labels), "protocol", cells);
  }

  // Table 4: refined/base runtime ratio vs particle count.
  {
    std::vector<std::string> row_labels, col_labels;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    std::set<std::int64_t> nps;
    for (const auto& r : ok) {
      if (std::isnan(r.ratio_refined_base)) continue;
      nps.insert(r.np);
      std::string col = "N=" + std::to_string(r.threads);
      col_labels.push_back(col);
      cells[{np_label(r.np), col}] = format_num(r.ratio_refined_base);
    }
    for (auto np : nps) row_labels.push_back(np_label(np));
    emit_table(out, "Refined/base runtime ratio vs particle count", row_labels,
               sorted_unique(col_labels), "np", cells);
  }
}

}  // namespace ptrace
