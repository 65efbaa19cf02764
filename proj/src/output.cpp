#include "ptrace/output.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace ptrace {

namespace {

constexpr char kTsHeader[] = "# ptrace-timeseries v1";
constexpr char kEpHeader[] = "# ptrace-endpoint v1";
constexpr char kPlHeader[] = "# ptrace-pathline v1";
constexpr char kBinMagic[8] = {'P', 'T', 'R', 'C', 'B', 'I', 'N', '1'};
constexpr std::size_t kBinRecordSize = 12 * 8;

void fmt_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void fmt_int(std::string& out, std::int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%" PRId64, v);
  out += buf;
}

// Little-endian fixed-width encoding, 8 bytes per field.
void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.append(b, 8);
}

void put_f64(std::string& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(out, u);
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

double get_f64(const char* p) {
  std::uint64_t u = get_u64(p);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

std::string encode_binary(const TimeseriesRecord& r) {
  std::string out;
  out.reserve(kBinRecordSize);
  put_u64(out, static_cast<std::uint64_t>(r.time_index));
  put_f64(out, r.time);
  put_u64(out, static_cast<std::uint64_t>(r.particle_id));
  put_u64(out, static_cast<std::uint64_t>(r.group));
  put_u64(out, static_cast<std::uint64_t>(r.cell));
  put_u64(out, static_cast<std::uint64_t>(r.layer));
  put_f64(out, r.x);
  put_f64(out, r.y);
  put_f64(out, r.z);
  put_f64(out, r.xloc);
  put_f64(out, r.yloc);
  put_f64(out, r.zloc);
  return out;
}

TimeseriesRecord decode_binary(const char* p) {
  TimeseriesRecord r;
  r.time_index = static_cast<std::int64_t>(get_u64(p + 0));
  r.time = get_f64(p + 8);
  r.particle_id = static_cast<std::int64_t>(get_u64(p + 16));
  r.group = static_cast<std::int32_t>(get_u64(p + 24));
  r.cell = static_cast<CellId>(get_u64(p + 32));
  r.layer = static_cast<std::int32_t>(get_u64(p + 40));
  r.x = get_f64(p + 48);
  r.y = get_f64(p + 56);
  r.z = get_f64(p + 64);
  r.xloc = get_f64(p + 72);
  r.yloc = get_f64(p + 80);
  r.zloc = get_f64(p + 88);
  return r;
}

}  // namespace

const char* to_string(OutputProtocolKind kind) {
  switch (kind) {
    case OutputProtocolKind::critical_single: return "critical";
    case OutputProtocolKind::consolidated: return "consolidated";
    case OutputProtocolKind::parallel_exclusive: return "parallel";
  }
  return "?";
}

OutputProtocolKind protocol_from_string(const std::string& name) {
  if (name == "critical") return OutputProtocolKind::critical_single;
  if (name == "consolidated") return OutputProtocolKind::consolidated;
  if (name == "parallel") return OutputProtocolKind::parallel_exclusive;
  throw std::invalid_argument("unknown output protocol '" + name + "'");
}

std::string encode_timeseries_line(const TimeseriesRecord& r) {
  std::string out;
  out.reserve(160);
  fmt_int(out, r.time_index);
  out += ' ';
  fmt_double(out, r.time);
  out += ' ';
  fmt_int(out, r.particle_id);
  out += ' ';
  fmt_int(out, r.group);
  out += ' ';
  fmt_int(out, r.cell);
  out += ' ';
  fmt_int(out, r.layer);
  for (double v : {r.x, r.y, r.z, r.xloc, r.yloc, r.zloc}) {
    out += ' ';
    fmt_double(out, v);
  }
  out += '\n';
  return out;
}

TimeseriesWriter::TimeseriesWriter(OutputProtocolKind kind,
                                   const std::filesystem::path& dir, int n_workers,
                                   const std::string& digest)
    : kind_(kind), dir_(dir), n_workers_(n_workers) {
  std::filesystem::create_directories(dir);
  auto open_or_throw = [](std::ofstream& f, const std::filesystem::path& p,
                          std::ios::openmode mode) {
    f.open(p, mode);
    if (!f) throw std::runtime_error("output: cannot open " + p.string());
  };
  if (kind == OutputProtocolKind::critical_single ||
      kind == OutputProtocolKind::consolidated) {
    open_or_throw(single_, dir / "timeseries.dat", std::ios::out | std::ios::trunc);
    single_ << kTsHeader << '\n' << "# config " << digest << '\n';
  }
  if (kind == OutputProtocolKind::consolidated) {
    worker_units_.resize(n_workers);
    for (int w = 0; w < n_workers; ++w) {
      auto p = dir / ("timeseries.ts.w" + std::to_string(w));
      worker_paths_.push_back(p);
      open_or_throw(worker_units_[w], p,
                    std::ios::out | std::ios::trunc | std::ios::binary);
      worker_units_[w].write(kBinMagic, sizeof kBinMagic);
    }
  }
  if (kind == OutputProtocolKind::parallel_exclusive) {
    worker_units_.resize(n_workers);
    for (int w = 0; w < n_workers; ++w) {
      auto p = dir / ("timeseries.w" + std::to_string(w) + ".dat");
      worker_paths_.push_back(p);
      open_or_throw(worker_units_[w], p, std::ios::out | std::ios::trunc);
      worker_units_[w] << kTsHeader << '\n' << "# config " << digest << '\n';
    }
  }
}

TimeseriesWriter::~TimeseriesWriter() { close(); }

void TimeseriesWriter::write_record(int worker_id, const TimeseriesRecord& rec) {
  switch (kind_) {
    case OutputProtocolKind::critical_single: {
      std::string line = encode_timeseries_line(rec);
      // Exclusion region spans exactly one record's append.
      std::lock_guard<std::mutex> lock(critical_mutex_);
      single_ << line;
      if (!single_) throw std::runtime_error("output: write failed on timeseries.dat");
      break;
    }
    case OutputProtocolKind::consolidated: {
      std::string bytes = encode_binary(rec);
      auto& unit = worker_units_[worker_id];
      unit.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!unit)
        throw std::runtime_error("output: write failed on worker binary unit " +
                                 std::to_string(worker_id));
      break;
    }
    case OutputProtocolKind::parallel_exclusive: {
      auto& unit = worker_units_[worker_id];
      unit << encode_timeseries_line(rec);
      if (!unit)
        throw std::runtime_error("output: write failed on worker unit " +
                                 std::to_string(worker_id));
      break;
    }
  }
}

std::size_t TimeseriesWriter::consolidate_step(std::int64_t time_index) {
  if (kind_ != OutputProtocolKind::consolidated) return 0;
  std::size_t merged = 0;
  for (int w = 0; w < n_workers_; ++w) {
    worker_units_[w].flush();
    std::ifstream in(worker_paths_[w], std::ios::binary);
    if (!in)
      throw std::runtime_error("output: cannot reopen worker unit " +
                               worker_paths_[w].string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kBinMagic, 8) != 0)
      throw std::runtime_error("output: bad magic in worker unit " +
                               worker_paths_[w].string());
    char buf[kBinRecordSize];
    std::size_t offset = 8;
    while (in.read(buf, kBinRecordSize)) {
      TimeseriesRecord r = decode_binary(buf);
      if (r.time_index != time_index)
        throw std::runtime_error("output: undecodable or out-of-step record in worker " +
                                 std::to_string(w) + " at offset " + std::to_string(offset));
      single_ << encode_timeseries_line(r);
      ++merged;
      offset += kBinRecordSize;
    }
    if (in.gcount() != 0)
      throw std::runtime_error("output: truncated binary record in worker " +
                               std::to_string(w) + " at offset " + std::to_string(offset));
    // Reset the unit by truncation for the next step.
    worker_units_[w].close();
    worker_units_[w].open(worker_paths_[w],
                          std::ios::out | std::ios::trunc | std::ios::binary);
    worker_units_[w].write(kBinMagic, sizeof kBinMagic);
  }
  single_.flush();
  return merged;
}

void TimeseriesWriter::flush_step() {
  if (single_.is_open()) single_.flush();
  for (auto& u : worker_units_)
    if (u.is_open()) u.flush();
}

void TimeseriesWriter::close() {
  if (single_.is_open()) single_.close();
  for (auto& u : worker_units_)
    if (u.is_open()) u.close();
  if (kind_ == OutputProtocolKind::consolidated)
    for (auto& p : worker_paths_) std::filesystem::remove(p);
}

std::vector<std::filesystem::path> TimeseriesWriter::text_output_files() const {
  if (kind_ == OutputProtocolKind::parallel_exclusive) return worker_paths_;
  return {dir_ / "timeseries.dat"};
}

PathlineWriter::PathlineWriter(const std::filesystem::path& dir, int n_workers,
                               const std::string& digest) {
  std::filesystem::create_directories(dir);
  units_.resize(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    auto p = dir / ("pathline.w" + std::to_string(w) + ".dat");
    paths_.push_back(p);
    units_[w].open(p, std::ios::out | std::ios::trunc);
    if (!units_[w]) throw std::runtime_error("output: cannot open " + p.string());
    units_[w] << kPlHeader << '\n' << "# config " << digest << '\n';
  }
}

void PathlineWriter::write_point(int worker_id, const Particle& p, std::int64_t segment) {
  std::string out;
  fmt_int(out, p.id);
  out += ' ';
  fmt_int(out, p.group);
  out += ' ';
  fmt_int(out, segment);
  out += ' ';
  fmt_double(out, p.time);
  out += ' ';
  fmt_int(out, p.cell);
  for (double v : {p.position[0], p.position[1], p.position[2], p.local[0], p.local[1],
                   p.local[2]}) {
    out += ' ';
    fmt_double(out, v);
  }
  out += '\n';
  auto& unit = units_[worker_id];
  unit << out;
  if (!unit)
    throw std::runtime_error("output: pathline write failed on worker " +
                             std::to_string(worker_id));
}

void PathlineWriter::close() {
  for (auto& u : units_)
    if (u.is_open()) u.close();
}

void write_endpoint_file(const std::vector<EndpointRecord>& records,
                         const std::filesystem::path& path, const std::string& digest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("output: cannot open " + path.string());
  out << kEpHeader << '\n' << "# config " << digest << '\n';
  std::string line;
  for (const auto& r : records) {
    line.clear();
    fmt_int(line, r.particle_id);
    line += ' ';
    fmt_int(line, r.group);
    line += ' ';
    line += to_string(r.status);
    line += ' ';
    fmt_double(line, r.initial_time);
    line += ' ';
    fmt_int(line, r.initial_cell);
    for (double v : {r.ix, r.iy, r.iz}) {
      line += ' ';
      fmt_double(line, v);
    }
    line += ' ';
    fmt_double(line, r.final_time);
    line += ' ';
    fmt_int(line, r.final_cell);
    for (double v : {r.fx, r.fy, r.fz}) {
      line += ' ';
      fmt_double(line, v);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw std::runtime_error("output: write failed for " + path.string());
}

std::vector<TimeseriesRecord> decode_timeseries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("output: cannot open " + path.string());
  std::vector<TimeseriesRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TimeseriesRecord r;
    ss >> r.time_index >> r.time >> r.particle_id >> r.group >> r.cell >> r.layer >>
        r.x >> r.y >> r.z >> r.xloc >> r.yloc >> r.zloc;
    if (ss.fail())
      throw std::runtime_error("output: malformed record at " + path.string() + ":" +
                               std::to_string(lineno));
    out.push_back(r);
  }
  return out;
}

std::vector<TimeseriesRecord> decode_timeseries(
    const std::vector<std::filesystem::path>& paths) {
  std::vector<TimeseriesRecord> out;
  for (const auto& p : paths) {
    auto part = decode_timeseries(p);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<EndpointRecord> decode_endpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("output: cannot open " + path.string());
  std::vector<EndpointRecord> out;
  std::string line, status;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    EndpointRecord r;
    ss >> r.particle_id >> r.group >> status >> r.initial_time >> r.initial_cell >>
        r.ix >> r.iy >> r.iz >> r.final_time >> r.final_cell >> r.fx >> r.fy >> r.fz;
    if (ss.fail())
      throw std::runtime_error("output: malformed record at " + path.string() + ":" +
                               std::to_string(lineno));
    bool known = false;
    for (auto s : {ParticleStatus::pending, ParticleStatus::active,
                   ParticleStatus::reached_boundary, ParticleStatus::reached_stop_time,
                   ParticleStatus::strong_sink_stop, ParticleStatus::stagnant,
                   ParticleStatus::done}) {
      if (status == to_string(s)) {
        r.status = s;
        known = true;
        break;
      }
    }
    if (!known)
      throw std::runtime_error("output: unknown status '" + status + "' at " +
                               path.string() + ":" + std::to_string(lineno));
    out.push_back(r);
  }
  return out;
}

std::string config_digest(const std::string& canonical) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace ptrace
