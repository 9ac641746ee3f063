#include "phaseopt/config.hpp"

#include "phaseopt/errors.hpp"
#include "phaseopt/field_io.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

namespace phaseopt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// One JSON object plus its dotted key path, for error messages.
class Section {
 public:
  Section(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {}

  bool has(const char* key) const { return obj_ != nullptr && obj_->contains(key); }
  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& at(const char* key) const { return obj_->at(key); }

  Section sub(const char* key) const {
    if (!has(key)) return {nullptr, key_path(key)};
    const json& v = at(key);
    if (!v.is_object()) throw ValidationError(key_path(key) + ": expected an object");
    return {&v, key_path(key)};
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    if (obj_ == nullptr) return;
    for (const auto& item : obj_->items()) {
      bool known = false;
      for (const char* k : keys) known = known || item.key() == k;
      if (!known) throw ValidationError("unknown key '" + key_path(item.key().c_str()) + "'");
    }
  }

  double number(const char* key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (!fallback) throw MissingKey("missing mandatory key '" + key_path(key) + "'");
      return *fallback;
    }
    const json& v = at(key);
    if (!v.is_number()) throw ValidationError(key_path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(key_path(key) + ": must be finite");
    return d;
  }

  long long integer(const char* key, std::optional<long long> fallback = std::nullopt) const {
    if (!has(key)) {
      if (!fallback) throw MissingKey("missing mandatory key '" + key_path(key) + "'");
      return *fallback;
    }
    const json& v = at(key);
    if (!v.is_number_integer()) throw ValidationError(key_path(key) + ": expected an integer");
    return v.get<long long>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw ValidationError(key_path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ValidationError(key_path(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_array() || v.empty()) throw ValidationError(key_path(key) + ": expected a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError(key_path(key) + ": expected a nonempty array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

 private:
  const json* obj_;
  std::string path_;
};

struct Context {
  const Grid& grid;
  const TimeGrid& tgrid;
  fs::path base_dir;
};

fs::path resolve(const Context& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.base_dir / path;
}

Field read_csv_value(const Context& ctx, const std::string& key, const fs::path& path) {
  try {
    return read_field_csv(path, ctx.grid);
  } catch (const ParseError& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

/// {"mean", "amplitude", "wavenumber", "axis", "time_frequency"}:
/// mean + amplitude cos(k pi x_axis / L_axis) [* sin(w pi t / T)].
double profile_value(const Section& s, const Context& ctx, int cell, double t, bool time_dependent) {
  const double mean = s.number("mean");
  const double amp = s.number("amplitude", 0.0);
  const double k = s.number("wavenumber", 1.0);
  const long long axis = s.integer("axis", 0);
  if (axis < 0 || axis >= ctx.grid.dim()) throw ValidationError(s.key_path("axis") + ": no such axis");
  const auto x = ctx.grid.center(cell);
  const int a = static_cast<int>(axis);
  double v = amp * std::cos(k * std::numbers::pi * x[static_cast<std::size_t>(a)] / ctx.grid.length(a));
  if (s.has("time_frequency")) {
    if (!time_dependent) throw ValidationError(s.key_path("time_frequency") + ": only allowed for space-time data");
    v *= std::sin(s.number("time_frequency") * std::numbers::pi * t / ctx.tgrid.final_time());
  }
  return mean + v;
}

Field read_field_value(const Section& parent, const char* key, const Context& ctx, double fallback) {
  const std::string path = parent.key_path(key);
  if (!parent.has(key)) return Field::Constant(ctx.grid.cells(), fallback);
  const json& v = parent.at(key);
  if (v.is_number()) return Field::Constant(ctx.grid.cells(), v.get<double>());
  if (v.is_string()) return read_csv_value(ctx, path, resolve(ctx, v.get<std::string>()));
  if (v.is_object()) {
    const Section s(&v, path);
    s.allow_only({"mean", "amplitude", "wavenumber", "axis"});
    Field out(ctx.grid.cells());
    for (int c = 0; c < ctx.grid.cells(); ++c) out[c] = profile_value(s, ctx, c, 0.0, false);
    return out;
  }
  throw ValidationError(path + ": expected a number, a CSV path or a profile object");
}

/// Like read_field_value; a path containing "####" is expanded to one CSV per level.
Trajectory read_trajectory_value(const Section& parent, const char* key, const Context& ctx, double fallback) {
  const std::string path = parent.key_path(key);
  const int levels = ctx.tgrid.levels();
  if (parent.has(key)) {
    const json& v = parent.at(key);
    if (v.is_string() && v.get<std::string>().find("####") != std::string::npos) {
      const std::string pattern = v.get<std::string>();
      Trajectory out(levels, ctx.grid.cells());
      for (int k = 0; k < levels; ++k) {
        char idx[16];
        std::snprintf(idx, sizeof(idx), "%04d", k);
        std::string name = pattern;
        name.replace(name.find("####"), 4, idx);
        out[k] = read_csv_value(ctx, path, resolve(ctx, name));
      }
      return out;
    }
    if (v.is_object()) {
      const Section s(&v, path);
      s.allow_only({"mean", "amplitude", "wavenumber", "axis", "time_frequency"});
      Trajectory out(levels, ctx.grid.cells());
      for (int k = 0; k < levels; ++k) {
        for (int c = 0; c < ctx.grid.cells(); ++c) out[k][c] = profile_value(s, ctx, c, ctx.tgrid.time(k), true);
      }
      return out;
    }
  }
  return Trajectory(levels, read_field_value(parent, key, ctx, fallback));
}

Grid parse_domain(const Section& domain) {
  domain.allow_only({"dim", "n", "length"});
  const long long dim = domain.integer("dim");
  if (dim != 1 && dim != 2) {
    throw UnsupportedDimension("domain.dim = " + std::to_string(dim) + " is not supported (dim must be 1 or 2)");
  }
  auto per_axis = [&](const char* key) {
    if (!domain.has(key)) throw MissingKey("missing mandatory key '" + domain.key_path(key) + "'");
    const json& v = domain.at(key);
    std::vector<json> items;
    if (v.is_array()) {
      items.assign(v.begin(), v.end());
    } else {
      items.assign(static_cast<std::size_t>(dim), v);
    }
    if (items.size() != static_cast<std::size_t>(dim)) {
      throw ValidationError(domain.key_path(key) + ": expected " + std::to_string(dim) + " entries");
    }
    return items;
  };
  std::vector<int> n;
  for (const json& x : per_axis("n")) {
    if (!x.is_number_integer() || x.get<long long>() < 1) {
      throw ValidationError(domain.key_path("n") + ": cell counts must be positive integers");
    }
    n.push_back(x.get<int>());
  }
  std::vector<double> length;
  for (const json& x : per_axis("length")) {
    if (!x.is_number() || !(x.get<double>() > 0.0)) {
      throw ValidationError(domain.key_path("length") + ": lengths must be positive");
    }
    length.push_back(x.get<double>());
  }
  return make_grid(static_cast<int>(dim), n, length);
}

AdjointMode parse_mode(const Section& s) {
  const std::string mode = s.string("adjoint_mode", "discrete");
  if (mode == "discrete") return AdjointMode::Discrete;
  if (mode == "pde") return AdjointMode::Pde;
  throw ValidationError(s.key_path("adjoint_mode") + ": expected \"discrete\" or \"pde\"");
}

template <class F>
void downstream(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const InvalidArgument& e) {
    throw ValidationError(section + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const fs::path& base_dir, const std::string& origin) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ParseError(origin + ": top level must be an object");
  const Section top(&root, "");
  top.allow_only({"domain", "time", "params", "potential", "init", "targets", "control", "solver", "optimizer", "output",
                  "check"});

  RunConfig cfg;
  cfg.source_text = text;

  cfg.grid = parse_domain(top.sub("domain"));

  const Section time = top.sub("time");
  time.allow_only({"T", "N"});
  const double T = time.number("T");
  const long long N = time.integer("N");
  if (!(T > 0.0)) throw ValidationError("time.T: must be positive");
  if (N < 1) throw ValidationError("time.N: must be at least 1");
  cfg.tgrid = TimeGrid(T, static_cast<int>(N));

  const Section params = top.sub("params");
  params.allow_only({"epsilon", "delta", "beta1", "beta2"});
  ProblemData& d = cfg.data;
  d.epsilon = params.number("epsilon");
  d.delta = params.number("delta");
  d.beta1 = params.number("beta1", 1.0);
  d.beta2 = params.number("beta2", 1e-4);
  if (!(d.epsilon > 0.0)) throw ValidationError("params.epsilon: violates ε > 0");
  if (!(d.delta > 0.0)) throw ValidationError("params.delta: violates δ > 0");
  if (d.beta1 < 0.0) throw ValidationError("params.beta1: violates β₁ ≥ 0");
  if (d.beta2 < 0.0) throw ValidationError("params.beta2: violates β₂ ≥ 0");

  const Section potential = top.sub("potential");
  potential.allow_only({"c_log", "c_quad"});
  cfg.pot.c_log = potential.number("c_log", 0.5);
  cfg.pot.c_quad = potential.number("c_quad", 2.0);
  if (!(cfg.pot.c_log > 0.0)) throw ValidationError("potential.c_log: violates c_log > 0");
  if (cfg.pot.c_quad < 0.0) throw ValidationError("potential.c_quad: violates c_quad ≥ 0");

  const Context ctx{cfg.grid, cfg.tgrid, base_dir};

  const Section init = top.sub("init");
  init.allow_only({"rho0", "mu0"});
  d.rho0 = read_field_value(init, "rho0", ctx, 0.5);
  d.mu0 = read_field_value(init, "mu0", ctx, 0.0);
  if (!(d.rho0.minCoeff() > 0.0)) throw ValidationError("init.rho0: violates inf ρ₀ > 0 (min " + format_number(d.rho0.minCoeff()) + ")");
  if (!(d.rho0.maxCoeff() < 1.0)) throw ValidationError("init.rho0: violates sup ρ₀ < 1 (max " + format_number(d.rho0.maxCoeff()) + ")");
  if (!(d.mu0.minCoeff() >= 0.0)) throw ValidationError("init.mu0: violates μ₀ ≥ 0 (min " + format_number(d.mu0.minCoeff()) + ")");

  const Section control = top.sub("control");
  control.allow_only({"U", "u_init"});
  d.U_bound = read_trajectory_value(control, "U", ctx, 1.0);
  if (!(d.U_bound.min() >= 0.0)) throw ValidationError("control.U: violates U ≥ 0");
  cfg.u_init = read_trajectory_value(control, "u_init", ctx, 0.0);

  const Section solver = top.sub("solver");
  solver.allow_only({"newton_tol", "newton_max", "boundary_margin", "coupling_iters", "linear_tol", "bound_tol",
                     "adjoint_mode"});
  SolverConfig& sc = cfg.solver;
  sc.newton_tol = solver.number("newton_tol", sc.newton_tol);
  sc.newton_max = static_cast<int>(solver.integer("newton_max", sc.newton_max));
  sc.boundary_margin = solver.number("boundary_margin", sc.boundary_margin);
  sc.coupling_iters = static_cast<int>(solver.integer("coupling_iters", sc.coupling_iters));
  sc.linear_tol = solver.number("linear_tol", sc.linear_tol);
  sc.bound_tol = solver.number("bound_tol", sc.bound_tol);
  cfg.optimizer.adjoint_mode = parse_mode(solver);
  downstream("solver", [&] { sc.validate(); });

  const Section opt = top.sub("optimizer");
  opt.allow_only({"max_iters", "armijo_c", "armijo_shrink", "step0", "stat_tol", "min_step"});
  OptimizerConfig& oc = cfg.optimizer;
  oc.max_iters = static_cast<int>(opt.integer("max_iters", oc.max_iters));
  oc.armijo_c = opt.number("armijo_c", oc.armijo_c);
  oc.armijo_shrink = opt.number("armijo_shrink", oc.armijo_shrink);
  oc.step0 = opt.number("step0", oc.step0);
  oc.stat_tol = opt.number("stat_tol", oc.stat_tol);
  oc.min_step = opt.number("min_step", oc.min_step);
  downstream("optimizer", [&] { oc.validate(); });

  const Section targets = top.sub("targets");
  targets.allow_only({"mode", "rho_T", "mu_T", "control"});
  const std::string mode = targets.string("mode", "explicit");
  if (mode == "from_state") {
    if (targets.has("rho_T") || targets.has("mu_T")) {
      throw ValidationError("targets: rho_T and mu_T must be omitted in mode \"from_state\"");
    }
    if (!targets.has("control")) throw MissingKey("missing mandatory key 'targets.control' for mode \"from_state\"");
    const Trajectory dagger = read_trajectory_value(targets, "control", ctx, 0.0);
    d.rho_T = d.rho0;
    d.mu_T = Trajectory(cfg.tgrid.levels(), cfg.grid.cells());
    try {
      require_feasible(dagger, d.U_bound, sc.bound_tol, "targets.control");
    } catch (const InfeasibleControl& e) {
      throw ValidationError(e.what());
    }
    const auto sol = solve_state(d, dagger, cfg.grid, cfg.tgrid, cfg.pot, sc);
    d.rho_T = sol.state.rho[cfg.tgrid.steps()];
    d.mu_T = sol.state.mu;
  } else if (mode == "explicit") {
    if (targets.has("control")) throw ValidationError("targets.control: only used in mode \"from_state\"");
    d.rho_T = read_field_value(targets, "rho_T", ctx, 0.5);
    d.mu_T = read_trajectory_value(targets, "mu_T", ctx, 0.0);
  } else {
    throw ValidationError("targets.mode: expected \"explicit\" or \"from_state\"");
  }
  downstream("data", [&] { d.validate(cfg.grid, cfg.tgrid); });

  const Section output = top.sub("output");
  output.allow_only({"directory", "snapshots", "seed", "sensitivity_fields", "control_iterates"});
  cfg.output.directory = resolve(ctx, output.string("directory", "out"));
  const long long stride = output.integer("snapshots", 1);
  if (stride < 1) throw ValidationError("output.snapshots: must be at least 1");
  cfg.output.snapshots = static_cast<int>(stride);
  const long long seed = output.integer("seed", 0);
  if (seed < 0) throw ValidationError("output.seed: must be nonnegative");
  cfg.output.seed = static_cast<std::uint64_t>(seed);
  cfg.output.sensitivity_fields = output.boolean("sensitivity_fields", false);
  cfg.output.control_iterates = output.boolean("control_iterates", false);

  const Section check = top.sub("check");
  check.allow_only({"fd_lambdas", "remainder_lambdas", "directions", "pairs", "refine_pairs", "samples"});
  CheckConfig& cc = cfg.check;
  cc.fd_lambdas = check.numbers("fd_lambdas", cc.fd_lambdas);
  cc.remainder_lambdas = check.numbers("remainder_lambdas", cc.remainder_lambdas);
  for (double l : cc.fd_lambdas) {
    if (!(l > 0.0)) throw ValidationError("check.fd_lambdas: entries must be positive");
  }
  for (double l : cc.remainder_lambdas) {
    if (!(l > 0.0)) throw ValidationError("check.remainder_lambdas: entries must be positive");
  }
  cc.directions = static_cast<int>(check.integer("directions", cc.directions));
  cc.pairs = static_cast<int>(check.integer("pairs", cc.pairs));
  cc.refine_pairs = static_cast<int>(check.integer("refine_pairs", cc.refine_pairs));
  cc.samples = static_cast<int>(check.integer("samples", cc.samples));
  if (cc.directions < 1 || cc.pairs < 1 || cc.samples < 1 || cc.refine_pairs < 0) {
    throw ValidationError("check: directions, pairs and samples must be positive, refine_pairs nonnegative");
  }
  return cfg;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse_config_text(buf.str(), path.parent_path(), path.string());
  cfg.source_path = path;
  return cfg;
}

}  // namespace phaseopt
