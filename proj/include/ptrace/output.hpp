#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ptrace/tracking.hpp"

namespace ptrace {

struct TimeseriesRecord {
  std::int64_t time_index = 0;  // >= 1
  double time = 0.0;
  std::int64_t particle_id = 0;
  std::int32_t group = 0;
  CellId cell = 0;
  std::int32_t layer = 0;
  double x = 0.0, y = 0.0, z = 0.0;
  double xloc = 0.0, yloc = 0.0, zloc = 0.0;

  bool operator==(const TimeseriesRecord&) const = default;
};

struct EndpointRecord {
  std::int64_t particle_id = 0;
  std::int32_t group = 0;
  ParticleStatus status = ParticleStatus::done;
  double initial_time = 0.0;
  CellId initial_cell = 0;
  double ix = 0.0, iy = 0.0, iz = 0.0;
  double final_time = 0.0;
  CellId final_cell = 0;
  double fx = 0.0, fy = 0.0, fz = 0.0;

  bool operator==(const EndpointRecord&) const = default;
};

enum class OutputProtocolKind : std::uint8_t {
  critical_single,     // one shared text unit behind a mutual-exclusion region
  consolidated,        // per-worker binary units merged each timeseries step
  parallel_exclusive,  // per-worker text units, never merged
};

const char* to_string(OutputProtocolKind kind);
OutputProtocolKind protocol_from_string(const std::string& name);

std::string encode_timeseries_line(const TimeseriesRecord& rec);

// Timeseries writer implementing the three concurrency protocols. Layout
// under `dir`: timeseries.dat (critical_single, consolidated) or
// timeseries.w<k>.dat (parallel_exclusive); worker binary intermediates
// are <dir>/timeseries.ts.w<k>.
class TimeseriesWriter {
 public:
  TimeseriesWriter(OutputProtocolKind kind, const std::filesystem::path& dir,
                   int n_workers, const std::string& config_digest);
  ~TimeseriesWriter();

  OutputProtocolKind kind() const { return kind_; }

  // Safe for concurrent calls from distinct workers; each worker only ever
  // passes its own id.
  void write_record(int worker_id, const TimeseriesRecord& rec);

  // Serial section only: merge worker binary units for one timeseries step
  // into the consolidated text file, then reset the units. Returns the
  // number of records merged. No-op for the other protocols.
  std::size_t consolidate_step(std::int64_t time_index);

  // Flush all units at a timeseries step boundary.
  void flush_step();

  void close();

  std::vector<std::filesystem::path> text_output_files() const;

 private:
  OutputProtocolKind kind_;
  std::filesystem::path dir_;
  int n_workers_;
  std::mutex critical_mutex_;
  std::ofstream single_;                       // critical_single + consolidated target
  std::vector<std::ofstream> worker_units_;    // text or binary per protocol
  std::vector<std::filesystem::path> worker_paths_;
};

// Pathline records go to per-worker text units only (parallel_exclusive);
// the schema adds a per-particle segment counter column.
class PathlineWriter {
 public:
  PathlineWriter(const std::filesystem::path& dir, int n_workers,
                 const std::string& config_digest);
  void write_point(int worker_id, const Particle& p, std::int64_t segment);
  void close();
  std::vector<std::filesystem::path> files() const { return paths_; }

 private:
  std::vector<std::ofstream> units_;
  std::vector<std::filesystem::path> paths_;
};

void write_endpoint_file(const std::vector<EndpointRecord>& records,
                         const std::filesystem::path& path,
                         const std::string& config_digest);

std::vector<TimeseriesRecord> decode_timeseries(const std::filesystem::path& path);
std::vector<TimeseriesRecord> decode_timeseries(
    const std::vector<std::filesystem::path>& paths);
std::vector<EndpointRecord> decode_endpoint(const std::filesystem::path& path);

// FNV-1a over a canonical config string; stamped into output headers.
std::string config_digest(const std::string& canonical);

}  // namespace ptrace
