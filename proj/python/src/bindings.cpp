#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "phaseopt/commands.hpp"
#include "phaseopt/config.hpp"
#include "phaseopt/errors.hpp"
#include "phaseopt/grid.hpp"
#include "phaseopt/optimizer.hpp"
#include "phaseopt/potential.hpp"
#include "phaseopt/sensitivity.hpp"
#include "phaseopt/state_solver.hpp"
#include "phaseopt/verify.hpp"

namespace py = pybind11;
using namespace phaseopt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Trajectories cross the boundary as (levels, cells) arrays.
Array to_array(const Trajectory& t) {
  Array out({t.levels(), t.cells()});
  auto v = out.mutable_unchecked<2>();
  for (int k = 0; k < t.levels(); ++k) {
    for (int c = 0; c < t.cells(); ++c) v(k, c) = t[k][c];
  }
  return out;
}

Trajectory from_array(const Array& a) {
  if (a.ndim() != 2) throw ShapeMismatch("expected a (levels, cells) array");
  auto v = a.unchecked<2>();
  Trajectory t(static_cast<int>(v.shape(0)), static_cast<int>(v.shape(1)));
  for (py::ssize_t k = 0; k < v.shape(0); ++k) {
    for (py::ssize_t c = 0; c < v.shape(1); ++c) t[static_cast<int>(k)][static_cast<int>(c)] = v(k, c);
  }
  return t;
}

StateTrajectory state_from(const Array& rho, const Array& mu) { return {from_array(rho), from_array(mu), {}}; }

py::dict diagnostics_dict(const Diagnostics& d) {
  py::dict out;
  out["rho_min"] = d.rho_min;
  out["rho_max"] = d.rho_max;
  out["mu_min"] = d.mu_min;
  out["mu_max"] = d.mu_max;
  out["bound_tol"] = d.bound_tol;
  out["min_mu_coefficient"] = d.min_mu_coefficient;
  out["newton_iters"] = d.newton_iters;
  out["rho_interior"] = d.rho_interior;
  out["mu_nonnegative"] = d.mu_nonnegative;
  out["m_matrix"] = d.m_matrix;
  return out;
}

std::vector<std::pair<double, double>> ladder_pairs(const std::vector<LadderPoint>& ladder) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : ladder) out.emplace_back(p.lambda, p.error);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Discretized state, sensitivity and optimal control solvers for the phase-field system.";

  auto base = py::register_exception<Error>(m, "PhaseoptError", PyExc_RuntimeError);
  py::register_exception<UnsupportedDimension>(m, "UnsupportedDimension", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());
  py::register_exception<DomainViolation>(m, "DomainViolation", base.ptr());
  py::register_exception<InfeasibleControl>(m, "InfeasibleControl", base.ptr());
  auto solver = py::register_exception<SolverError>(m, "SolverError", base.ptr());
  py::register_exception<NewtonDivergence>(m, "NewtonDivergence", solver.ptr());
  py::register_exception<LinearSolveFailure>(m, "LinearSolveFailure", solver.ptr());
  py::register_exception<NonpositiveCoefficient>(m, "NonpositiveCoefficient", solver.ptr());
  auto config = py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<MissingKey>(m, "MissingKey", config.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", config.ptr());
  py::register_exception<ParseError>(m, "ParseError", config.ptr());

  py::class_<Grid>(m, "Grid")
      .def(py::init(&make_grid), py::arg("dim"), py::arg("n"), py::arg("length"))
      .def_property_readonly("dim", &Grid::dim)
      .def_property_readonly("cells", &Grid::cells)
      .def("n", &Grid::n, py::arg("axis"))
      .def("length", &Grid::length, py::arg("axis"))
      .def("spacing", &Grid::spacing, py::arg("axis"))
      .def("centers",
           [](const Grid& g) {
             Array out({g.cells(), g.dim()});
             auto v = out.mutable_unchecked<2>();
             for (int c = 0; c < g.cells(); ++c) {
               const auto x = g.center(c);
               for (int a = 0; a < g.dim(); ++a) v(c, a) = x[static_cast<std::size_t>(a)];
             }
             return out;
           })
      .def("laplacian", [](const Grid& g, const Field& v) { return laplacian_apply(g, v); }, py::arg("v"))
      .def("inner", [](const Grid& g, const Field& a, const Field& b, bool h1) {
             return inner_product(g, h1 ? InnerKind::H1 : InnerKind::L2, a, b);
           },
           py::arg("a"), py::arg("b"), py::arg("h1") = false);

  py::class_<TimeGrid>(m, "TimeGrid")
      .def(py::init<double, int>(), py::arg("T"), py::arg("N"))
      .def_property_readonly("T", &TimeGrid::final_time)
      .def_property_readonly("N", &TimeGrid::steps)
      .def_property_readonly("tau", &TimeGrid::tau)
      .def_property_readonly("levels", &TimeGrid::levels)
      .def("time", &TimeGrid::time, py::arg("level"));

  py::class_<Potential>(m, "Potential")
      .def(py::init([](double c_log, double c_quad) { return Potential{c_log, c_quad}; }), py::arg("c_log") = 0.5,
           py::arg("c_quad") = 2.0)
      .def_readwrite("c_log", &Potential::c_log)
      .def_readwrite("c_quad", &Potential::c_quad)
      .def("__call__", &potential_eval, py::arg("r"), py::arg("order") = 0);

  py::enum_<AdjointMode>(m, "AdjointMode").value("Discrete", AdjointMode::Discrete).value("Pde", AdjointMode::Pde);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("newton_tol", &SolverConfig::newton_tol)
      .def_readwrite("newton_max", &SolverConfig::newton_max)
      .def_readwrite("boundary_margin", &SolverConfig::boundary_margin)
      .def_readwrite("coupling_iters", &SolverConfig::coupling_iters)
      .def_readwrite("linear_tol", &SolverConfig::linear_tol)
      .def_readwrite("bound_tol", &SolverConfig::bound_tol);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("armijo_c", &OptimizerConfig::armijo_c)
      .def_readwrite("armijo_shrink", &OptimizerConfig::armijo_shrink)
      .def_readwrite("step0", &OptimizerConfig::step0)
      .def_readwrite("stat_tol", &OptimizerConfig::stat_tol)
      .def_readwrite("min_step", &OptimizerConfig::min_step)
      .def_readwrite("adjoint_mode", &OptimizerConfig::adjoint_mode);

  py::class_<ProblemData>(m, "ProblemData")
      .def(py::init<>())
      .def_readwrite("epsilon", &ProblemData::epsilon)
      .def_readwrite("delta", &ProblemData::delta)
      .def_readwrite("beta1", &ProblemData::beta1)
      .def_readwrite("beta2", &ProblemData::beta2)
      .def_readwrite("rho0", &ProblemData::rho0)
      .def_readwrite("mu0", &ProblemData::mu0)
      .def_readwrite("rho_T", &ProblemData::rho_T)
      .def_property(
          "mu_T", [](const ProblemData& d) { return to_array(d.mu_T); },
          [](ProblemData& d, const Array& a) { d.mu_T = from_array(a); })
      .def_property(
          "U", [](const ProblemData& d) { return to_array(d.U_bound); },
          [](ProblemData& d, const Array& a) { d.U_bound = from_array(a); })
      .def("validate", &ProblemData::validate, py::arg("grid"), py::arg("tgrid"));

  py::class_<RunConfig>(m, "RunConfig")
      .def_readonly("grid", &RunConfig::grid)
      .def_readonly("tgrid", &RunConfig::tgrid)
      .def_readonly("data", &RunConfig::data)
      .def_readonly("pot", &RunConfig::pot)
      .def_readonly("solver", &RunConfig::solver)
      .def_readonly("optimizer", &RunConfig::optimizer)
      .def_property_readonly("u_init", [](const RunConfig& c) { return to_array(c.u_init); });

  m.def("parse_config", &parse_config, py::arg("path"), "Read and validate a JSON run configuration.");

  m.def(
      "solve_state",
      [](const ProblemData& data, const Array& u, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
         const SolverConfig& cfg) {
        const auto sol = solve_state(data, from_array(u), grid, tgrid, pot, cfg);
        return py::make_tuple(to_array(sol.state.rho), to_array(sol.state.mu), diagnostics_dict(sol.diagnostics));
      },
      py::arg("data"), py::arg("u"), py::arg("grid"), py::arg("tgrid"), py::arg("pot") = Potential{},
      py::arg("cfg") = SolverConfig{}, "Returns (rho, mu, diagnostics).");

  m.def(
      "solve_tangent",
      [](const Array& rho, const Array& mu, const Array& h, const ProblemData& data, const Grid& grid,
         const TimeGrid& tgrid, const Potential& pot, const SolverConfig& cfg) {
        const auto t = solve_tangent(state_from(rho, mu), from_array(h), data, grid, tgrid, pot, cfg);
        return py::make_tuple(to_array(t.xi), to_array(t.eta));
      },
      py::arg("rho"), py::arg("mu"), py::arg("h"), py::arg("data"), py::arg("grid"), py::arg("tgrid"),
      py::arg("pot") = Potential{}, py::arg("cfg") = SolverConfig{}, "Returns (xi, eta).");

  m.def(
      "solve_adjoint",
      [](const Array& rho, const Array& mu, const ProblemData& data, const Grid& grid, const TimeGrid& tgrid,
         const Potential& pot, const SolverConfig& cfg, AdjointMode mode) {
        const auto a = solve_adjoint(state_from(rho, mu), data, grid, tgrid, pot, cfg, mode);
        return py::make_tuple(to_array(a.p), to_array(a.q));
      },
      py::arg("rho"), py::arg("mu"), py::arg("data"), py::arg("grid"), py::arg("tgrid"), py::arg("pot") = Potential{},
      py::arg("cfg") = SolverConfig{}, py::arg("mode") = AdjointMode::Discrete, "Returns (p, q).");

  m.def(
      "cost",
      [](const Array& rho, const Array& mu, const Array& u, const ProblemData& data, const Grid& grid,
         const TimeGrid& tgrid) { return cost(state_from(rho, mu), from_array(u), data, grid, tgrid); },
      py::arg("rho"), py::arg("mu"), py::arg("u"), py::arg("data"), py::arg("grid"), py::arg("tgrid"));

  m.def(
      "reduced_gradient",
      [](const Array& u, const Array& q, double beta2) {
        return to_array(reduced_gradient(from_array(u), from_array(q), beta2));
      },
      py::arg("u"), py::arg("q"), py::arg("beta2"));

  m.def(
      "project_control",
      [](const Array& u, const Array& U) { return to_array(project_control(from_array(u), from_array(U))); },
      py::arg("u"), py::arg("U"));

  m.def(
      "kkt_residual",
      [](const Grid& grid, const TimeGrid& tgrid, const Array& u, const Array& g, const Array& U) {
        return kkt_residual(grid, tgrid, from_array(u), from_array(g), from_array(U));
      },
      py::arg("grid"), py::arg("tgrid"), py::arg("u"), py::arg("g"), py::arg("U"));

  m.def(
      "optimize",
      [](const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
         const SolverConfig& scfg, const OptimizerConfig& ocfg, const Array& u_init) {
        const auto r = projected_gradient_descent(data, grid, tgrid, pot, scfg, ocfg, from_array(u_init));
        py::dict out;
        out["u"] = to_array(r.u_opt);
        out["rho"] = to_array(r.state.rho);
        out["mu"] = to_array(r.state.mu);
        out["q"] = to_array(r.adjoint.q);
        out["J_history"] = r.J_history;
        out["kkt_history"] = r.kkt_history;
        out["step_history"] = r.step_history;
        out["termination"] = to_string(r.termination);
        out["iterations"] = r.iterations;
        return out;
      },
      py::arg("data"), py::arg("grid"), py::arg("tgrid"), py::arg("pot") = Potential{},
      py::arg("solver") = SolverConfig{}, py::arg("optimizer") = OptimizerConfig{}, py::arg("u_init"),
      "Projected gradient descent; returns a dict with the control, state, adjoint q and histories.");

  m.def(
      "random_control",
      [](const Grid& grid, const TimeGrid& tgrid, double lo, double hi, std::uint64_t seed) {
        return to_array(random_control(grid, tgrid, lo, hi, seed));
      },
      py::arg("grid"), py::arg("tgrid"), py::arg("lo"), py::arg("hi"), py::arg("seed"));

  m.def(
      "fd_gradient_check",
      [](const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
         const SolverConfig& cfg, const Array& u, const Array& h, const std::vector<double>& lambdas) {
        const auto r = fd_gradient_check(data, grid, tgrid, pot, cfg, from_array(u), from_array(h), lambdas);
        return py::make_tuple(ladder_pairs(r.ladder), r.slope, r.adjoint_derivative);
      },
      py::arg("data"), py::arg("grid"), py::arg("tgrid"), py::arg("pot"), py::arg("cfg"), py::arg("u"), py::arg("h"),
      py::arg("lambdas"), "Returns (ladder, slope, adjoint_derivative).");

  m.def(
      "tangent_remainder_check",
      [](const ProblemData& data, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
         const SolverConfig& cfg, const Array& u, const Array& h, const std::vector<double>& lambdas) {
        const auto r = tangent_remainder_check(data, grid, tgrid, pot, cfg, from_array(u), from_array(h), lambdas);
        return py::make_tuple(ladder_pairs(r.ladder), r.slope);
      },
      py::arg("data"), py::arg("grid"), py::arg("tgrid"), py::arg("pot"), py::arg("cfg"), py::arg("u"), py::arg("h"),
      py::arg("lambdas"), "Returns (ladder, slope).");

  m.def(
      "ode_oracle_check",
      [](const ProblemData& data, const Array& u, const Grid& grid, const TimeGrid& tgrid, const Potential& pot,
         const SolverConfig& cfg) { return ode_oracle_check(data, from_array(u), grid, tgrid, pot, cfg).max_error; },
      py::arg("data"), py::arg("u"), py::arg("grid"), py::arg("tgrid"), py::arg("pot") = Potential{},
      py::arg("cfg") = SolverConfig{}, "Max deviation from the reduced ODE for spatially uniform data.");

  m.def(
      "run_command",
      [](const std::string& command, const std::filesystem::path& config, const std::string& check,
         std::optional<std::filesystem::path> out, std::optional<std::uint64_t> seed, std::optional<int> snapshots) {
        CommandRequest req{command, check, config, std::move(out), seed, snapshots, std::nullopt};
        std::ostringstream o, e;
        const int code = run_command(req, o, e);
        return py::make_tuple(code, o.str(), e.str());
      },
      py::arg("command"), py::arg("config"), py::arg("check") = "", py::arg("out") = py::none(),
      py::arg("seed") = py::none(), py::arg("snapshots") = py::none(),
      "Runs a phasectl command in-process; returns (exit_code, stdout, stderr).");
}
