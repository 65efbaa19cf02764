// Command-line front end: single simulation runs and benchmark sweeps.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ptrace/bench.hpp"
#include "ptrace/driver.hpp"
#include "ptrace/scenarios.hpp"

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line is not 'key = value': " + s);
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  return kv;
}

ptrace::WeakSinkPolicy weak_sink_from_string(const std::string& name) {
  if (name == "pass" || name == "pass_through")
    return ptrace::WeakSinkPolicy::pass_through;
  if (name == "stop") return ptrace::WeakSinkPolicy::stop;
  throw CLI::ValidationError("--weak-sink", "must be pass_through or stop");
}

void print_summary(const ptrace::SimulationSummary& s) {
  std::printf("particles            %lld\n",
              static_cast<long long>(s.n_particles));
  std::printf("elapsed loop         %.6f s\n", s.elapsed_loop_s);
  std::printf("  flow updates       %.6f s\n", s.flow_update_s);
  std::printf("  particle loops     %.6f s\n", s.particle_loop_s);
  std::printf("  consolidation      %.6f s\n", s.consolidation_s);
  std::printf("records written      %lld\n",
              static_cast<long long>(s.totals.records_written));
  std::printf("weak sink passes     %lld\n",
              static_cast<long long>(s.totals.weak_sink_passes));
  for (int i = 0; i < 7; ++i)
    if (s.status_histogram[static_cast<std::size_t>(i)] > 0)
      std::printf("status %-18s %lld\n",
                  ptrace::to_string(static_cast<ptrace::ParticleStatus>(i)),
                  static_cast<long long>(
                      s.status_histogram[static_cast<std::size_t>(i)]));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ptrace: parallel particle tracking engine and benchmark harness"};

  std::string scenario = "tc1";
  std::string mode_name;
  std::int64_t np = 1000;
  int threads = 1;
  std::string schedule_name = "dynamic";
  std::int64_t chunk = 1;
  std::string protocol_name;
  int ts_count = 5;
  double sigma2 = 2.5;
  std::uint64_t seed = 7;
  double scale = 0.2;
  int refine = 1;
  std::string weak_sink_name;
  std::string out_dir = "out";
  std::string bench_file, config_file, emit_flow, flow_in;
  int reps = 0;

  app.add_option("--scenario", scenario, "Test scenario: tc1 or tc2")
      ->check(CLI::IsMember({"tc1", "tc2"}));
  app.add_option("--mode", mode_name, "endpoint, timeseries or pathline")
      ->check(CLI::IsMember({"endpoint", "timeseries", "pathline"}));
  app.add_option("--np", np, "Number of particles")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "Tracking workers")
      ->check(CLI::PositiveNumber);
  app.add_option("--schedule", schedule_name, "static or dynamic")
      ->check(CLI::IsMember({"static", "dynamic"}));
  app.add_option("--chunk", chunk, "Dynamic schedule chunk size")
      ->check(CLI::PositiveNumber);
  app.add_option("--protocol", protocol_name,
                 "Timeseries output protocol: critical, consolidated or parallel")
      ->check(CLI::IsMember({"critical", "consolidated", "parallel"}));
  app.add_option("--ts-count", ts_count, "Timeseries output times (tc2)")
      ->check(CLI::PositiveNumber);
  app.add_option("--sigma2", sigma2, "Log-conductivity variance (tc1)");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--scale", scale, "Domain scale factor in (0, 1]");
  app.add_option("--refine", refine, "Uniform grid refinement factor (tc2)")
      ->check(CLI::Range(1, 2));
  app.add_option("--weak-sink", weak_sink_name,
                 "Weak sink policy: pass_through or stop")
      ->check(CLI::IsMember({"pass", "pass_through", "stop"}));
  app.add_option("--out-dir", out_dir, "Output directory");
  app.add_option("--bench", bench_file, "Run a benchmark matrix file");
  app.add_option("--reps", reps, "Override matrix repetitions")
      ->check(CLI::PositiveNumber);
  app.add_option("--emit-flow", emit_flow,
                 "Solve the scenario, save the flow snapshot here and exit");
  app.add_option("--flow-in", flow_in,
                 "Reuse a saved flow snapshot instead of solving");
  app.add_option("--config", config_file, "key = value config file; flags win");

  try {
    app.parse(argc, argv);

    if (!config_file.empty()) {
      auto kv = read_config_file(config_file);
      auto take = [&](const char* key, const char* flag, auto& target) {
        auto it = kv.find(key);
        if (it == kv.end() || app.count(flag) > 0) return;
        std::istringstream is(it->second);
        is >> target;
        if (is.fail())
          throw CLI::ValidationError(flag, "bad config value '" + it->second + "'");
      };
      take("scenario", "--scenario", scenario);
      take("mode", "--mode", mode_name);
      take("np", "--np", np);
      take("threads", "--threads", threads);
      take("schedule", "--schedule", schedule_name);
      take("chunk", "--chunk", chunk);
      take("protocol", "--protocol", protocol_name);
      take("ts_count", "--ts-count", ts_count);
      take("sigma2", "--sigma2", sigma2);
      take("seed", "--seed", seed);
      take("scale", "--scale", scale);
      take("refine", "--refine", refine);
      take("weak_sink", "--weak-sink", weak_sink_name);
      take("out_dir", "--out-dir", out_dir);
      if (threads < 1)
        throw CLI::ValidationError("--threads", "must be >= 1");
    }

    if (!bench_file.empty()) {
      ptrace::BenchMatrix matrix = ptrace::load_bench_matrix(bench_file);
      if (reps > 0) matrix.reps = reps;
      std::filesystem::path dir = out_dir;
      std::filesystem::path csv = dir / "bench.csv";
      ptrace::run_bench(matrix, csv, dir / "bench_runs");
      ptrace::emit_speedup_report(csv, dir / "speedup_report.md");
      std::printf("wrote %s\nwrote %s\n", csv.string().c_str(),
                  (dir / "speedup_report.md").string().c_str());
      return 0;
    }

    ptrace::ScenarioSpec spec =
        scenario == "tc1"
            ? ptrace::make_tc1_spec(sigma2, np, seed, scale)
            : ptrace::make_tc2_spec(np, ts_count, refine, scale);

    ptrace::FlowSnapshot snapshot =
        flow_in.empty() ? ptrace::solve_scenario(spec)
                        : ptrace::load_snapshot(flow_in);

    if (!emit_flow.empty()) {
      ptrace::save_snapshot(snapshot, emit_flow);
      std::printf("wrote %s\n", emit_flow.c_str());
      return 0;
    }

    ptrace::SimulationConfig config = spec.default_config;
    if (!mode_name.empty())
      config.mode = ptrace::sim_mode_from_string(mode_name);
    if (!protocol_name.empty()) {
      if (config.mode == ptrace::SimMode::endpoint)
        throw CLI::ValidationError(
            "--protocol", "endpoint mode writes no timeseries records");
      config.protocol = ptrace::protocol_from_string(protocol_name);
    }
    if (config.mode == ptrace::SimMode::pathline) {
      if (!protocol_name.empty() &&
          config.protocol != ptrace::OutputProtocolKind::parallel_exclusive)
        throw CLI::ValidationError(
            "--protocol", "pathline mode supports only the parallel protocol");
      config.protocol = ptrace::OutputProtocolKind::parallel_exclusive;
    }
    config.workers = threads;
    config.schedule.kind = ptrace::schedule_from_string(schedule_name);
    config.schedule.chunk = chunk;
    if (!weak_sink_name.empty())
      config.weak_sink_policy = weak_sink_from_string(weak_sink_name);
    if (app.count("--ts-count") > 0) config.timeseries.count = ts_count;
    config.seed = seed;
    config.out_dir = out_dir;

    std::vector<ptrace::FlowSnapshot> snaps;
    snaps.push_back(std::move(snapshot));
    ptrace::FlowStore store(std::move(snaps));
    ptrace::SimulationSummary summary = ptrace::run_simulation(config, store);
    print_summary(summary);
    return 0;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
