#include "run_config.hpp"

#include <filesystem>
#include <fstream>

#include "lphom/error.hpp"

namespace lph::cli {

namespace {

using nlohmann::json;

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok |= key == k;
    if (!ok) throw InputError(where + ": unknown key '" + key + "'");
  }
}

Point point(const json& j, int dim, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw InputError(where + ": expected " + std::to_string(dim) + " numbers");
  Point p{0, 0, 0};
  for (int i = 0; i < dim; ++i) p[i] = j.at(i).get<double>();
  return p;
}

std::array<int, 3> counts(const json& j, int dim, const std::string& where, int min) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) throw InputError(where + ": expected " + std::to_string(dim) + " integers");
  std::array<int, 3> c{1, 1, 1};
  for (int i = 0; i < dim; ++i) {
    c[i] = j.at(i).get<int>();
    if (c[i] < min) throw InputError(where + ": entries must be >= " + std::to_string(min));
  }
  return c;
}

Phase parse_phase(const json& j, int dim, std::size_t index) {
  const std::string where = "material.phases[" + std::to_string(index) + "]";
  allow(j, where, {"name", "lambda", "mu", "voigt"});
  const std::string name = j.value("name", "phase" + std::to_string(index));
  if (j.contains("voigt")) {
    if (j.contains("lambda") || j.contains("mu")) throw InputError(where + ": give either voigt or lambda/mu");
    const auto rows = j.at("voigt").get<std::vector<std::vector<double>>>();
    const int m = sym_size(dim);
    if (static_cast<int>(rows.size()) != m) throw InputError(where + ": voigt must be " + std::to_string(m) + "x" + std::to_string(m));
    Eigen::MatrixXd v(m, m);
    for (int a = 0; a < m; ++a) {
      if (static_cast<int>(rows[a].size()) != m) throw InputError(where + ": voigt rows must have " + std::to_string(m) + " entries");
      for (int b = 0; b < m; ++b) v(a, b) = rows[a][b];
    }
    return make_phase(name, Tensor4::from_voigt(v, dim));
  }
  if (!j.contains("lambda") || !j.contains("mu")) throw InputError(where + ": lambda and mu required");
  return make_phase(name, make_isotropic(j.at("lambda").get<double>(), j.at("mu").get<double>(), dim));
}

std::shared_ptr<const CellMaterial> parse_material(const json& j, int dim, const std::string& base_dir) {
  allow(j, "material", {"resolution", "geometry", "phases"});
  const int m = j.value("resolution", 32);
  if (m < 2) throw InputError("material.resolution: must be >= 2");
  if (!j.contains("geometry")) throw InputError("material: geometry required");
  if (!j.contains("phases") || !j.at("phases").is_array()) throw InputError("material: phases list required");
  std::vector<Phase> phases;
  for (std::size_t i = 0; i < j.at("phases").size(); ++i) phases.push_back(parse_phase(j.at("phases")[i], dim, i));
  return assign_phases(build_cell_mesh(dim, m), geometry_from_json(j.at("geometry"), dim, base_dir), std::move(phases));
}

AnchorOptions parse_anchors(const json& j, int dim) {
  allow(j, "micro.anchors", {"rule", "offset", "L"});
  AnchorOptions a;
  const std::string rule = j.value("rule", std::string("center"));
  if (rule == "center") {
    a.rule = AnchorRule::Center;
  } else if (rule == "offset") {
    a.rule = AnchorRule::Offset;
    if (j.contains("offset")) a.offset = point(j.at("offset"), dim, "micro.anchors.offset");
  } else if (rule == "lattice_aligned") {
    a.rule = AnchorRule::LatticeAligned;
    if (!j.contains("L")) throw InputError("micro.anchors: lattice_aligned needs an L field");
    a.L = field_from_json(j.at("L"), dim);
  } else {
    throw InputError("micro.anchors.rule: unknown rule '" + rule + "' (center, offset, lattice_aligned)");
  }
  if (rule != "offset" && j.contains("offset")) throw InputError("micro.anchors.offset: only valid with rule offset");
  if (rule != "lattice_aligned" && j.contains("L")) throw InputError("micro.anchors.L: only valid with rule lattice_aligned");
  return a;
}

void open_interval(double v, const std::string& where) {
  if (!(v > 0 && v < 1)) throw InputError(where + ": must lie in (0,1), got " + std::to_string(v));
}

RunConfig parse(const json& j, const std::string& base_dir) {
  allow(j, "config", {"dim", "seed", "jobs", "output_dir", "material", "H", "K", "solver", "cell", "law", "macro", "micro",
                      "converge", "verify"});
  RunConfig c;
  c.source = j;
  c.base_dir = base_dir;
  c.dim = j.value("dim", 2);
  if (c.dim != 2 && c.dim != 3) throw InputError("dim: must be 2 or 3");
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", 0);
  c.output_dir = j.value("output_dir", c.output_dir);
  const int n = c.dim;

  if (j.contains("material")) c.material = parse_material(j.at("material"), n, base_dir);
  c.K = j.contains("K") ? field_from_json(j.at("K"), n) : constant_field(Tensor2::identity(n));
  c.H = j.contains("H") ? field_from_json(j.at("H"), n) : c.K;

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    allow(s, "solver", {"tolerance", "max_iterations"});
    c.solver.tolerance = s.value("tolerance", c.solver.tolerance);
    c.solver.max_iterations = s.value("max_iterations", c.solver.max_iterations);
    if (!(c.solver.tolerance > 0 && c.solver.tolerance < 1)) throw InputError("solver.tolerance: must lie in (0,1)");
    if (c.solver.max_iterations < 1) throw InputError("solver.max_iterations: must be positive");
  }

  c.macro.domain = unit_box(n);
  c.macro.cells = {32, 32, n == 3 ? 32 : 1};
  c.macro.body_force["value"] = n == 3 ? json::array({1.0, 0.0, 0.0}) : json::array({1.0, 0.0});
  if (j.contains("macro")) {
    const json& s = j.at("macro");
    allow(s, "macro", {"domain", "cells", "boundary", "body_force", "include_residual"});
    if (s.contains("domain")) {
      c.macro.domain = box_from_json(s.at("domain"));
      if (c.macro.domain.dim != n) throw InputError("macro.domain: dimension differs from dim");
    }
    if (s.contains("cells")) c.macro.cells = counts(s.at("cells"), n, "macro.cells", 1);
    if (s.contains("boundary")) c.macro.boundary = s.at("boundary");
    if (s.contains("body_force")) c.macro.body_force = s.at("body_force");
    c.macro.include_residual = s.value("include_residual", true);
  }
  // validate the vector functions now rather than at solve time
  vector_function_from_json(c.macro.boundary, n);
  vector_function_from_json(c.macro.body_force, n);

  if (j.contains("cell")) {
    const json& s = j.at("cell");
    allow(s, "cell", {"x", "E", "dump_correctors", "strain_csv"});
    if (s.contains("x")) c.cell.x = point(s.at("x"), n, "cell.x");
    if (s.contains("E")) c.cell.E = Tensor2::from_rows(s.at("E").get<std::vector<std::vector<double>>>());
    if (c.cell.E && c.cell.E->dim() != n) throw InputError("cell.E: dimension differs from dim");
    c.cell.dump_correctors = s.value("dump_correctors", true);
    c.cell.strain_csv = s.value("strain_csv", false);
  }

  if (j.contains("law")) {
    const json& s = j.at("law");
    allow(s, "law", {"strategy", "x0", "counts", "path"});
    c.law.strategy = s.value("strategy", c.law.strategy);
    if (c.law.strategy != "fast_path" && c.law.strategy != "pointwise" && c.law.strategy != "table" && c.law.strategy != "file")
      throw InputError("law.strategy: unknown strategy '" + c.law.strategy + "' (fast_path, pointwise, table, file)");
    if (s.contains("x0")) c.law.x0 = point(s.at("x0"), n, "law.x0");
    if (s.contains("counts")) c.law.counts = counts(s.at("counts"), n, "law.counts", 2);
    if (s.contains("path")) {
      const std::filesystem::path p = s.at("path").get<std::string>();
      c.law.path = (p.is_absolute() ? p : std::filesystem::path(base_dir) / p).string();
    }
    if (c.law.strategy == "file" && c.law.path.empty()) throw InputError("law: strategy file needs a path");
  }

  if (j.contains("micro")) {
    const json& s = j.at("micro");
    allow(s, "micro", {"eps", "r", "anchors", "min_elements_per_period", "points_per_axis"});
    c.micro.eps = s.value("eps", c.micro.eps);
    c.micro.r = s.value("r", c.micro.r);
    if (s.contains("anchors")) {
      c.micro.anchors_json = s.at("anchors");
      c.micro.anchors = parse_anchors(s.at("anchors"), n);
    }
    c.micro.min_elements_per_period = s.value("min_elements_per_period", 8);
    c.micro.points_per_axis = s.value("points_per_axis", 2);
    if (c.micro.min_elements_per_period < 1) throw InputError("micro.min_elements_per_period: must be positive");
    if (c.micro.points_per_axis < 1 || c.micro.points_per_axis > 3) throw InputError("micro.points_per_axis: must be 1, 2 or 3");
  }
  open_interval(c.micro.eps, "micro.eps");
  open_interval(c.micro.r, "micro.r");

  if (j.contains("converge")) {
    const json& s = j.at("converge");
    allow(s, "converge", {"eps", "elements_per_period", "homogenized_cells", "budget_seconds"});
    if (s.contains("eps")) c.converge.eps = s.at("eps").get<std::vector<double>>();
    c.converge.elements_per_period = s.value("elements_per_period", 8);
    c.converge.homogenized_cells = s.value("homogenized_cells", 0);
    c.converge.budget_seconds = s.value("budget_seconds", 0.0);
    if (c.converge.eps.empty()) throw InputError("converge.eps: empty ladder");
    for (double e : c.converge.eps) open_interval(e, "converge.eps");
    for (std::size_t i = 1; i < c.converge.eps.size(); ++i)
      if (!(c.converge.eps[i] < c.converge.eps[i - 1])) throw InputError("converge.eps: must be strictly decreasing");
    if (c.converge.elements_per_period < 1) throw InputError("converge.elements_per_period: must be positive");
    if (c.converge.homogenized_cells < 0) throw InputError("converge.homogenized_cells: must be >= 0");
    if (c.converge.budget_seconds < 0) throw InputError("converge.budget_seconds: must be >= 0");
  }

  if (j.contains("verify")) {
    const json& s = j.at("verify");
    allow(s, "verify", {"suites", "include_convergence", "tolerance", "major_perturbation"});
    if (s.contains("suites")) c.verify.suites = s.at("suites").get<std::vector<std::string>>();
    for (const auto& name : c.verify.suites)
      if (name != "laminate" && name != "invariants" && name != "acceptance")
        throw InputError("verify.suites: unknown suite '" + name + "' (laminate, invariants, acceptance)");
    c.verify.include_convergence = s.value("include_convergence", true);
    c.verify.tolerance = s.value("tolerance", 0.0);
    c.verify.major_perturbation = s.value("major_perturbation", 0.0);
    if (c.verify.tolerance < 0) throw InputError("verify.tolerance: must be >= 0");
  }
  return c;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir) {
  try {
    if (j.is_object() && j.contains("manifest_version")) {
      if (!j.contains("config")) throw InputError("manifest: no recorded config");
      return parse(j.at("config"), j.value("config_dir", base_dir));
    }
    return parse(j, base_dir);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  const auto dir = std::filesystem::absolute(path).parent_path().string();
  return parse_run_config(j, dir);
}

}  // namespace lph::cli
