// Python bindings for the core operations: scenario construction, flow
// solving, simulation runs and output decoding.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "ptrace/driver.hpp"
#include "ptrace/geostat.hpp"
#include "ptrace/output.hpp"
#include "ptrace/scenarios.hpp"
#include "ptrace/scheduler.hpp"

namespace py = pybind11;
using namespace ptrace;

namespace {

// A solved scenario bundled with its reusable flow store.
struct ScenarioHandle {
  ScenarioSpec spec;
  std::shared_ptr<FlowStore> store;
};

ScenarioHandle make_handle(Scenario sc) {
  std::vector<FlowSnapshot> snaps;
  snaps.push_back(std::move(sc.snapshot));
  return {std::move(sc.spec), std::make_shared<FlowStore>(std::move(snaps))};
}

py::dict summary_to_dict(const SimulationSummary& s) {
  py::dict out;
  out["elapsed_loop_s"] = s.elapsed_loop_s;
  out["flow_update_s"] = s.flow_update_s;
  out["particle_loop_s"] = s.particle_loop_s;
  out["consolidation_s"] = s.consolidation_s;
  out["n_particles"] = s.n_particles;
  out["records_written"] = s.totals.records_written;
  out["weak_sink_passes"] = s.totals.weak_sink_passes;
  out["output_times"] = s.output_times;
  py::dict hist;
  for (std::size_t i = 0; i < s.status_histogram.size(); ++i)
    hist[to_string(static_cast<ParticleStatus>(i))] = s.status_histogram[i];
  out["status_histogram"] = hist;
  return out;
}

py::dict run_scenario(const ScenarioHandle& handle, const std::string& mode,
                      std::int64_t np, int workers, const std::string& schedule,
                      std::int64_t chunk, const std::string& protocol,
                      const std::string& weak_sink, int ts_count,
                      const std::string& out_dir, bool write_outputs) {
  SimulationConfig cfg = handle.spec.default_config;
  if (!mode.empty()) cfg.mode = sim_mode_from_string(mode);
  if (np > 0) cfg.release_plan = redistribute_release_plan(handle.spec.release_plan, np);
  cfg.workers = workers;
  if (!schedule.empty()) cfg.schedule.kind = schedule_from_string(schedule);
  cfg.schedule.chunk = chunk;
  if (!protocol.empty()) cfg.protocol = protocol_from_string(protocol);
  if (weak_sink == "stop") cfg.weak_sink_policy = WeakSinkPolicy::stop;
  else if (weak_sink == "pass_through") cfg.weak_sink_policy = WeakSinkPolicy::pass_through;
  else if (!weak_sink.empty())
    throw std::invalid_argument("weak_sink must be 'pass_through' or 'stop'");
  if (ts_count > 0) cfg.timeseries.count = ts_count;
  cfg.out_dir = out_dir;
  cfg.write_outputs = write_outputs;
  SimulationSummary summary;
  {
    // The tracking loops never touch python objects; release the GIL so
    // other interpreter threads keep running.
    py::gil_scoped_release release;
    summary = run_simulation(cfg, *handle.store);
  }
  return summary_to_dict(summary);
}

py::dict record_to_dict(const TimeseriesRecord& r) {
  py::dict d;
  d["time_index"] = r.time_index;
  d["time"] = r.time;
  d["particle_id"] = r.particle_id;
  d["group"] = r.group;
  d["cell"] = r.cell;
  d["layer"] = r.layer;
  d["x"] = r.x;
  d["y"] = r.y;
  d["z"] = r.z;
  d["xloc"] = r.xloc;
  d["yloc"] = r.yloc;
  d["zloc"] = r.zloc;
  return d;
}

py::dict endpoint_to_dict(const EndpointRecord& r) {
  py::dict d;
  d["particle_id"] = r.particle_id;
  d["group"] = r.group;
  d["status"] = to_string(r.status);
  d["initial_time"] = r.initial_time;
  d["initial_cell"] = r.initial_cell;
  d["ix"] = r.ix;
  d["iy"] = r.iy;
  d["iz"] = r.iz;
  d["final_time"] = r.final_time;
  d["final_cell"] = r.final_cell;
  d["fx"] = r.fx;
  d["fy"] = r.fy;
  d["fz"] = r.fz;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ptrace, m) {
  m.doc() = "Parallel particle tracking engine";

  py::class_<ScenarioHandle>(m, "Scenario")
      .def_property_readonly("name",
                             [](const ScenarioHandle& h) { return h.spec.name; })
      .def_property_readonly("cell_count",
                             [](const ScenarioHandle& h) {
                               return h.spec.grid.cell_count();
                             })
      .def_property_readonly("shape",
                             [](const ScenarioHandle& h) {
                               return py::make_tuple(h.spec.grid.nx(),
                                                     h.spec.grid.ny(),
                                                     h.spec.grid.nz());
                             })
      .def("heads",
           [](const ScenarioHandle& h) {
             return h.store->snapshot_at(0.0).heads;
           })
      .def("run", &run_scenario, py::arg("mode") = "", py::arg("np") = 0,
           py::arg("workers") = 1, py::arg("schedule") = "", py::arg("chunk") = 1,
           py::arg("protocol") = "", py::arg("weak_sink") = "",
           py::arg("ts_count") = 0, py::arg("out_dir") = "out",
           py::arg("write_outputs") = true);

  m.def(
      "build_tc1",
      [](double sigma2, std::int64_t np, std::uint64_t seed, double scale) {
        return make_handle(build_tc1(sigma2, np, seed, scale));
      },
      py::arg("sigma2"), py::arg("np"), py::arg("seed") = 7,
      py::arg("scale") = 1.0, py::call_guard<py::gil_scoped_release>());
  m.def(
      "build_tc2",
      [](std::int64_t np, int ts_count, int refine, double scale) {
        return make_handle(build_tc2(np, ts_count, refine, scale));
      },
      py::arg("np"), py::arg("ts_count") = 5, py::arg("refine") = 1,
      py::arg("scale") = 1.0, py::call_guard<py::gil_scoped_release>());

  m.def(
      "generate_field",
      [](int nx, int ny, double dx, double dy, double corr_len,
         std::uint64_t seed) {
        GaussianField f = generate_field(nx, ny, dx, dy, corr_len, seed);
        return py::make_tuple(f.values, f.nx, f.ny);
      },
      py::arg("nx"), py::arg("ny"), py::arg("dx") = 1.0, py::arg("dy") = 1.0,
      py::arg("corr_len") = 10.0, py::arg("seed") = 1);

  m.def("decode_timeseries", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : decode_timeseries(path)) out.append(record_to_dict(r));
    return out;
  });
  m.def("decode_endpoint", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : decode_endpoint(path)) out.append(endpoint_to_dict(r));
    return out;
  });

  m.def("config_digest", &config_digest, py::arg("canonical"));
  m.def("hardware_workers", &hardware_workers);
}
