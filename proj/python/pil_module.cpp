#include "pil/error.hpp"
#include "pil/runner.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pil;
using namespace pil::scenario;

namespace {

py::dict columns_of(const std::vector<TimeSeriesRow>& rows) {
  const auto& names = TimeSeriesRow::columns();
  std::vector<py::array_t<double>> cols;
  for (std::size_t j = 0; j < names.size(); ++j) cols.emplace_back(py::ssize_t(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto v = rows[i].values();
    for (std::size_t j = 0; j < names.size(); ++j) cols[j].mutable_at(i) = v[j];
  }
  py::dict out;
  for (std::size_t j = 0; j < names.size(); ++j) out[py::str(names[j])] = cols[j];
  return out;
}

py::dict summary(const ScenarioConfig& cfg, const RunResult& r) {
  py::dict d;
  d["config_hash"] = cfg.hash_hex();
  d["filter"] = cfg.filter_state();
  d["preset"] = cfg.physics.preset;
  d["t"] = r.final_state.t;
  d["step"] = r.final_state.step;
  d["series"] = r.series_path;
  d["checkpoints"] = r.checkpoints;
  d["stopped_at_checkpoint"] = r.stopped_at_checkpoint;
  d["high_mode_fraction"] = r.high_mode_fraction;
  d["high_mode_growth"] = r.high_mode_growth;
  d["upsilon_floor_held"] = r.upsilon_floor_held;
  d["wall_gap_held"] = r.wall_gap_held;
  d["rows"] = columns_of(r.rows);
  return d;
}

RunOptions options(const std::string& out_dir, int threads, int cadence, bool stop_at_checkpoint) {
  RunOptions o;
  o.out_dir = out_dir;
  o.threads = threads;
  o.cadence = cadence;
  o.stop_at_checkpoint = stop_at_checkpoint;
  return o;
}

}  // namespace

PYBIND11_MODULE(_pil, m) {
  m.doc() = "Plasma-vacuum interface solver";

  static py::exception<Error> pil_error(m, "PilError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = pil_error;
      py::object inst = exc(e.to_json());
      inst.attr("kind") = kind_name(e.kind());
      inst.attr("path") = e.path();
      PyErr_SetObject(pil_error.ptr(), inst.ptr());
    }
  });

  m.def("preset_names", &preset_names);

  m.def(
      "resolve_config",
      [](const std::string& text) {
        const ScenarioConfig cfg = parse_config_text(text);
        py::dict d;
        d["hash"] = cfg.hash_hex();
        d["filter"] = cfg.filter_state();
        d["total_steps"] = cfg.total_steps();
        d["resolved"] = cfg.resolved.dump();
        return d;
      },
      py::arg("text"), "Validate a JSON config and return its resolved form and hash.");

  m.def(
      "run",
      [](const std::string& text, const std::string& out_dir, int threads, int cadence, bool stop) {
        const ScenarioConfig cfg = parse_config_text(text);
        RunResult r;
        {
          py::gil_scoped_release release;
          Runner runner(cfg, options(out_dir, threads, cadence, stop));
          r = runner.run();
        }
        return summary(cfg, r);
      },
      py::arg("text"), py::arg("out_dir") = "", py::arg("threads") = 1, py::arg("cadence") = 0,
      py::arg("stop_at_checkpoint") = false);

  m.def(
      "restore",
      [](const std::string& checkpoint, const std::string& out_dir, int threads) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = restore_run(checkpoint, options(out_dir, threads, 0, false));
        }
        return summary(parse_config(read_checkpoint(checkpoint).config), r);
      },
      py::arg("checkpoint"), py::arg("out_dir") = "", py::arg("threads") = 1);

  m.def(
      "verify_identities",
      [](const std::string& text, int threads) {
        py::list out;
        for (const auto& c : verify_identities(parse_config_text(text), threads))
          out.append(py::make_tuple(c.name, c.value, c.tolerance, c.pass()));
        return out;
      },
      py::arg("text"), py::arg("threads") = 1);

  m.def(
      "sweep_alpha",
      [](const std::string& text, const std::vector<double>& alphas, const std::string& out_dir, int threads) {
        const ScenarioConfig cfg = parse_config_text(text);
        SweepResult res;
        {
          py::gil_scoped_release release;
          res = sweep_alpha(cfg, alphas, options(out_dir, threads, 0, false));
        }
        py::dict d;
        d["distances"] = res.distances;
        d["monotone_decreasing"] = res.monotone_decreasing;
        return d;
      },
      py::arg("text"), py::arg("alphas"), py::arg("out_dir") = "", py::arg("threads") = 1);

  m.def(
      "read_series",
      [](const std::string& path) {
        const SeriesFile f = read_series(path);
        return columns_of(f.rows);
      },
      py::arg("path"));

  m.def(
      "flat_dn_eigenvalues",
      [](int n, double z0, int levels, bool plus) {
        auto ref = surface::ReferenceSurface::flat(std::make_shared<Fourier2>(n, n), z0, 0.5, 0.1);
        const auto geom = surface::build_geometry(ref, surface::HeightField(Field::Zero(ref->grid().points())));
        const auto grid =
            harmonic::harmonic_coordinates(geom, plus ? harmonic::Side::Plus : harmonic::Side::Minus, levels);
        const auto dn = harmonic::dn_assemble(grid, geom);
        return std::vector<double>(dn.eigenvalues().data(), dn.eigenvalues().data() + dn.eigenvalues().size());
      },
      py::arg("n"), py::arg("z0") = 0.0, py::arg("levels") = 12, py::arg("plus") = true,
      "Generalised eigenvalues of the Dirichlet-Neumann operator below or above a flat interface.");
}
