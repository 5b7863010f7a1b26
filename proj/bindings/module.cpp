#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "krf/presets.hpp"

namespace py = pybind11;
using namespace krf;

PYBIND11_MODULE(_core, m) {
  m.doc() = "radial Kahler-Ricci flow laboratory on P^1";

  py::class_<SGrid>(m, "SGrid")
      .def_static("uniform", &SGrid::uniform, py::arg("s_min"), py::arg("s_max"),
                  py::arg("n_points"))
      .def_readonly("s_min", &SGrid::s_min)
      .def_readonly("s_max", &SGrid::s_max)
      .def_readonly("n_points", &SGrid::n_points)
      .def("spacing", &SGrid::spacing)
      .def("node", &SGrid::node);

  py::class_<RadialProfile>(m, "RadialProfile")
      .def_static("from_function", &RadialProfile::from_function)
      .def_static("zero", &RadialProfile::zero)
      .def_static("constant", &RadialProfile::constant)
      .def_readwrite("values", &RadialProfile::values)
      .def_readonly("grid", &RadialProfile::grid)
      .def_readwrite("slope_minus", &RadialProfile::slope_minus)
      .def_readwrite("slope_plus", &RadialProfile::slope_plus);

  m.def("d2", &d2, "ghost-slope second differences");

  py::class_<BackgroundGeometry>(m, "BackgroundGeometry")
      .def_readonly("g0", &BackgroundGeometry::g0)
      .def_readonly("ricci_hat", &BackgroundGeometry::ricci_hat)
      .def_readonly("g0_density", &BackgroundGeometry::g0_density)
      .def("mass_omega", &BackgroundGeometry::mass_omega)
      .def("mass_c1", &BackgroundGeometry::mass_c1)
      .def("integrate", &BackgroundGeometry::integrate);

  m.def("make_fubini_study", &make_fubini_study, py::arg("V"), py::arg("grid"));
  m.def("ricci_potential", &ricci_potential);
  m.def("compute_tmax", &compute_tmax);

  py::class_<ClassPath>(m, "ClassPath")
      .def_readonly("t_max", &ClassPath::t_max)
      .def("theta_potential", &ClassPath::theta_potential);

  py::class_<FlowConfig>(m, "FlowConfig")
      .def(py::init<>())
      .def_readwrite("dt_init", &FlowConfig::dt_init)
      .def_readwrite("newton_tol", &FlowConfig::newton_tol)
      .def_readwrite("t_end", &FlowConfig::t_end);

  py::class_<FlowState>(m, "FlowState")
      .def_readonly("t", &FlowState::t)
      .def_readonly("u", &FlowState::u);

  py::class_<FlowTrajectory>(m, "FlowTrajectory")
      .def_readonly("states", &FlowTrajectory::states)
      .def_readonly("total_steps", &FlowTrajectory::total_steps)
      .def("at_time", &FlowTrajectory::at_time, py::arg("t"), py::arg("tol") = 1e-9,
           py::return_value_policy::reference_internal);

  m.def("exact_example_solution", &exact_example_solution, py::arg("j"), py::arg("t"),
        py::arg("grid"));

  m.def(
      "run_flow",
      [](const RadialProfile& u0, const std::vector<double>& times, const FlowConfig& cfg,
         const BackgroundGeometry& bg) {
        auto path = make_class_path(bg);
        return run_flow(u0, times, cfg, bg, path);
      },
      py::arg("u0"), py::arg("output_times"), py::arg("config"), py::arg("background"));

  m.def(
      "lelong_number",
      [](const RadialProfile& p, double lo, double hi) {
        auto r = lelong_number(p, lo, hi);
        return py::make_tuple(r.nu, r.sensitivity, r.confident);
      },
      py::arg("profile"), py::arg("window_lo"), py::arg("window_hi"));

  m.def(
      "skoda_check",
      [](const RadialProfile& p, double lam, const BackgroundGeometry& bg) {
        auto c = skoda_check(p, lam, bg);
        py::dict d;
        d["lambda"] = c.lambda;
        d["value"] = c.value;
        d["divergent"] = c.divergent;
        d["boundary_case"] = c.boundary_case;
        return d;
      },
      py::arg("profile"), py::arg("lam"), py::arg("background"));

  m.def("solve_ma_radial", &solve_ma_radial, py::arg("f"), py::arg("background"),
        py::arg("compat_tol") = 5e-3);

  m.def(
      "cap_psi",
      [](const BackgroundGeometry& bg, const RadialProfile& psi, const std::vector<int>& E) {
        CapProblem p;
        p.bg = &bg;
        p.psi = psi;
        p.E = E;
        return cap_psi(p).value;
      },
      py::arg("background"), py::arg("psi"), py::arg("E"));

  m.def("list_presets", &list_presets);
  m.def(
      "run_preset",
      [](const std::string& name, const std::string& out_dir, unsigned long seed) {
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.seed = seed;
        auto r = run_preset(name, opts);
        py::dict d;
        d["name"] = r.name;
        d["ok"] = r.ok();
        py::list verdicts;
        for (const auto& v : r.verdicts) {
          py::dict vd;
          vd["id"] = v.id;
          vd["pass"] = v.pass;
          vd["detail"] = v.detail;
          verdicts.append(vd);
        }
        d["verdicts"] = verdicts;
        return d;
      },
      py::arg("name"), py::arg("out_dir") = "out", py::arg("seed") = 20240801ul);
}
