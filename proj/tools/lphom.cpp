// lphom: cell solves, effective laws, macro and direct solves, convergence
// studies and the verification suites, driven by one JSON config.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "lphom/error.hpp"
#include "lphom/fem_macro.hpp"
#include "lphom/verify.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lph;
using lph::cli::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitAcceptance = 4;

int verbosity = 1;

void log(int level, const std::string& msg) {
  if (level <= verbosity) std::cerr << "lphom: " << msg << '\n';
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 || EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Output directory plus the list of files that go into the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, const std::string& content) {
    fs::create_directories(path(name).parent_path());
    std::ofstream out(path(name), std::ios::binary);
    out << content;
    if (!out) throw Error("cannot write " + path(name).string());
    add(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  void add(const std::string& name) { files_.push_back(name); }

  json listing() const {
    json list = json::array();
    for (const auto& f : files_) {
      const std::string bytes = read_file(path(f));
      list.push_back({{"path", f}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    return list;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<std::vector<double>> rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> r(m.rows(), std::vector<double>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

std::vector<std::vector<double>> rows(const Tensor2& t) {
  std::vector<std::vector<double>> r(t.dim(), std::vector<double>(t.dim()));
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j) r[i][j] = t(i, j);
  return r;
}

std::vector<double> coords(const Point& x, int n) { return std::vector<double>(x.begin(), x.begin() + n); }

const CellMaterial& need_material(const RunConfig& c) {
  if (!c.material) throw InputError("config: this command needs a material section");
  return *c.material;
}

std::shared_ptr<const CellSolver> make_solver(const RunConfig& c, int jobs) {
  need_material(c);
  SolverOptions o;
  o.tolerance = c.solver.tolerance;
  o.max_iterations = c.solver.max_iterations;
  o.jobs = jobs;
  return std::make_shared<const CellSolver>(c.material, o);
}

MacroProblem make_problem(const RunConfig& c, int jobs) {
  MacroProblem p;
  p.domain = c.macro.domain;
  p.cells = c.macro.cells;
  p.boundary = vector_function_from_json(c.macro.boundary, c.dim);
  p.body_force = vector_function_from_json(c.macro.body_force, c.dim);
  p.include_residual = c.macro.include_residual;
  p.jobs = jobs;
  return p;
}

LawPtr make_law(const RunConfig& c, int jobs) {
  if (c.law.strategy == "file") return read_law(c.law.path);
  auto solver = make_solver(c, jobs);
  const Box& box = c.macro.domain;
  if (c.law.strategy == "pointwise") return build_pointwise_law(solver, c.H, c.K);
  if (c.law.strategy == "table") return build_law_table(solver, c.H, c.K, box, c.law.counts);
  return build_fast_path(solver, c.K, c.law.x0.value_or(box.center()), box, c.H);
}

json solution_summary(const DisplacementField& u) {
  const ErrorNorms n = field_norms(u);
  return {{"nodes", u.mesh->num_nodes()},
          {"free_dofs", u.stats.free_dofs},
          {"relative_residual", u.stats.residual},
          {"energy", u.stats.energy},
          {"l2_norm", n.l2},
          {"h1_seminorm", n.h1_semi}};
}

// --- commands ------------------------------------------------------------------------

int cmd_cell(const RunConfig& c, Outputs& out, int jobs, json& timing) {
  const int n = c.dim;
  auto solver = make_solver(c, jobs);
  const Point x = c.cell.x.value_or(c.macro.domain.center());
  const Tensor2 H = (*c.H)(x), K = (*c.K)(x);
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor4 C = effective_elasticity_at(*solver, H, K);
  const ResidualBreakdown S = effective_residual_breakdown(*solver, H, K);
  timing["cell_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const SymmetryReport sym = check_symmetries(C, 1e-10);
  json coercivity = nullptr;
  if (sym.minor && sym.major) coercivity = coercivity_constant(C);
  json e{{"x", coords(x, n)},
         {"H", rows(H)},
         {"K", rows(K)},
         {"elasticity_voigt", rows(C.voigt())},
         {"elasticity_mandel", rows(C.mandel())},
         {"residual", rows(S.total)},
         {"residual_average", rows(S.average)},
         {"residual_corrector_term", rows(S.corrector)},
         {"symmetry_violation", sym.max_violation},
         {"coercivity_constant", coercivity},
         {"volume_fractions", c.material->volume_fractions()},
         {"cell_resolution", c.material->mesh().resolution()}};
  out.json_file("effective.json", e);
  out.text("effective_voigt.csv", voigt_csv(C));
  log(1, "C_hom (Voigt) written to " + out.path("effective.json").string());

  fs::create_directories(out.path("correctors"));
  if (c.cell.dump_correctors) {
    const auto basis = sym_basis(n);
    for (std::size_t a = 0; a < basis.size(); ++a) {
      const auto [i, j] = mandel_pair(n, static_cast<int>(a));
      const std::string name = "correctors/w_E" + std::to_string(i + 1) + std::to_string(j + 1);
      write_corrector(solver->solve_corrector_E(H, K, basis[a]), out.path(name).string());
      out.add(name + ".json");
      out.add(name + ".bin");
    }
    write_corrector(solver->solve_corrector_residual(H, K), out.path("correctors/w_residual").string());
    out.add("correctors/w_residual.json");
    out.add("correctors/w_residual.bin");
  }
  if (c.cell.E) {
    const CorrectorField w = solver->solve_corrector_E(H, K, *c.cell.E);
    write_corrector(w, out.path("correctors/w_E").string());
    out.add("correctors/w_E.json");
    out.add("correctors/w_E.bin");
    if (c.cell.strain_csv) {
      write_strain_csv(w, *solver->cell_operator(H, K), out.path("strain_E.csv").string());
      out.add("strain_E.csv");
    }
  } else if (c.cell.strain_csv) {
    throw InputError("cell.strain_csv: needs cell.E");
  }
  return 0;
}

int cmd_homogenize(const RunConfig& c, Outputs& out, int jobs, json& timing) {
  const auto t0 = std::chrono::steady_clock::now();
  const LawPtr law = make_law(c, jobs);
  const MacroProblem p = make_problem(c, jobs);
  const DisplacementField u = solve_homogenized(p, *law, jobs);
  timing["solve_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<Point> centroids;
  for (int e = 0; e < u.mesh->num_elements(); ++e) centroids.push_back(u.mesh->element_centroid(e));
  write_law(*law, out.path("law.json").string(), centroids, jobs);
  out.add("law.json");
  write_displacement(u, out.path("u_hom").string());
  out.add("u_hom.json");
  out.add("u_hom.bin");
  json s = solution_summary(u);
  s["law_strategy"] = to_string(law->strategy());
  out.json_file("solution.json", s);
  log(1, "homogenized solve: energy " + std::to_string(u.stats.energy));
  return 0;
}

int cmd_direct(const RunConfig& c, Outputs& out, int jobs, json& timing) {
  const MacroProblem p = make_problem(c, jobs);
  check_resolution(p, c.micro.eps, c.micro.min_elements_per_period);
  need_material(c);
  const auto t0 = std::chrono::steady_clock::now();
  const auto dec = decompose(c.macro.domain, c.micro.eps, c.micro.r, c.H, c.micro.anchors);
  const MicroField field(c.material, c.K, dec);
  DirectOptions o;
  o.min_elements_per_period = c.micro.min_elements_per_period;
  o.points_per_axis = c.micro.points_per_axis;
  const DisplacementField u = solve_direct(p, field, o);
  timing["solve_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_displacement(u, out.path("u_direct").string());
  out.add("u_direct.json");
  out.add("u_direct.bin");
  json s = solution_summary(u);
  s["eps"] = c.micro.eps;
  s["patches"] = dec->patches().size();
  out.json_file("solution.json", s);
  log(1, "direct solve: " + std::to_string(dec->patches().size()) + " patches, energy " + std::to_string(u.stats.energy));
  return 0;
}

int cmd_converge(const RunConfig& c, Outputs& out, int jobs, json& timing) {
  ConvergenceSetup s;
  s.material = c.material;
  need_material(c);
  s.law = make_law(c, jobs);
  s.H = c.H;
  s.K = c.K;
  s.domain = c.macro.domain;
  s.r = c.micro.r;
  s.anchors = c.micro.anchors;
  s.boundary = vector_function_from_json(c.macro.boundary, c.dim);
  s.body_force = vector_function_from_json(c.macro.body_force, c.dim);
  s.elements_per_period = c.converge.elements_per_period;
  s.homogenized_cells = c.converge.homogenized_cells;
  s.direct.min_elements_per_period = c.micro.min_elements_per_period;
  s.direct.points_per_axis = c.micro.points_per_axis;
  s.budget_seconds = c.converge.budget_seconds;
  s.jobs = jobs;
  const ConvergenceReport rep = convergence_study(s, c.converge.eps);
  timing["homogenized_seconds"] = rep.homogenized_seconds;
  out.text("convergence.csv", convergence_csv(rep));
  // timings live outside the manifest listing so reruns hash identically
  {
    std::ofstream t(out.path("convergence_timing.csv"));
    t << convergence_timing_csv(rep);
  }
  out.json_file("convergence.json", {{"monotone", rep.monotone},
                                     {"budget_exceeded", rep.budget_exceeded},
                                     {"final_ratio", rep.final_ratio},
                                     {"h1_band", rep.h1_band}});
  for (const auto& r : rep.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "eps %-10.6g cells %-5d L2 error %.6e  H1 error %.6e%s", r.eps, r.cells, r.l2_error,
                  r.h1_error, r.completed ? "" : "  (not run, budget)");
    log(1, buf);
  }
  if (rep.budget_exceeded) log(0, "warning: time budget exceeded, table is partial");
  return 0;
}

int cmd_verify(const RunConfig& c, Outputs& out, int jobs, json& timing) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<CheckReport> reports;
  for (const auto& suite : c.verify.suites) {
    std::vector<CheckReport> r;
    if (suite == "laminate") {
      LaminateOracleConfig o;
      o.jobs = jobs;
      r = run_laminate_oracle(o);
    } else if (suite == "invariants") {
      InvariantOptions o;
      o.seed = c.seed;
      o.tolerance = c.verify.tolerance;
      o.major_perturbation = c.verify.major_perturbation;
      o.jobs = jobs;
      r = run_invariant_suite(o);
    } else {
      AcceptanceOptions o;
      o.seed = c.seed;
      o.jobs = jobs;
      o.include_convergence = c.verify.include_convergence;
      r = run_acceptance_suite(o);
    }
    reports.insert(reports.end(), r.begin(), r.end());
  }
  timing["verify_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.text("verify.csv", reports_csv(reports));
  out.text("traceability.csv", traceability_csv(reports));
  {
    std::ofstream x(out.path("verify_junit.xml"));
    x << reports_junit(reports, "lphom.verify");
  }
  int failed = 0;
  for (const auto& r : reports) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-12s %-45s %.3e %s %.1e", to_string(r.status).c_str(), r.id.c_str(), r.measured,
                  r.relation.c_str(), r.tolerance);
    log(r.status == CheckStatus::Pass ? 2 : 0, buf);
    failed += r.status != CheckStatus::Pass;
  }
  log(0, std::to_string(reports.size() - failed) + "/" + std::to_string(reports.size()) + " checks passed");
  return failed ? kExitAcceptance : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally periodic homogenization: cell problems, effective laws, macro and direct solves"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  int jobs = -1;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&, Outputs&, int, json&);
  };
  const std::vector<Command> commands{
      {"cell", "Correctors and effective tensors at one point", cmd_cell},
      {"homogenize", "Effective law and homogenized macro solve", cmd_homogenize},
      {"direct", "Direct solve on the synthesized locally periodic microstructure", cmd_direct},
      {"converge", "Direct-vs-homogenized error along an eps ladder", cmd_converge},
      {"verify", "Oracle, invariant and acceptance checks", cmd_verify},
  };
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("-c,--config", config_path, "JSON config, or a manifest from an earlier run")->required();
    sub->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("-j,--jobs", jobs, "Worker threads, 0 = all cores (overrides jobs)");
    sub->add_flag_function("-v,--verbose", [](std::int64_t k) { verbosity += static_cast<int>(k); }, "More log output");
    sub->add_flag_function("-q,--quiet", [](std::int64_t) { verbosity = 0; }, "Errors and summaries only");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const Command* chosen = nullptr;
  for (const auto& cmd : commands)
    if (app.got_subcommand(cmd.name)) chosen = &cmd;

  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    const RunConfig config = lph::cli::load_run_config(config_path);
    int j = jobs >= 0 ? jobs : config.jobs;
    if (j <= 0) j = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    Outputs out(out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir));
    json timing = json::object();
    code = chosen->run(config, out, j, timing);
    timing["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest{{"manifest_version", 1},
                  {"tool", "lphom"},
                  {"command", chosen->name},
                  {"rerun", std::string("lphom ") + chosen->name + " --config " + (out.dir() / "manifest.json").string()},
                  {"config", config.source},
                  {"config_dir", config.base_dir},
                  {"config_sha256", sha256_hex(config.source.dump())},
                  {"seed", config.seed},
                  {"jobs", j},
                  {"exit_code", code},
                  {"outputs", out.listing()},
                  {"timing", timing}};
    std::ofstream(out.path("manifest.json")) << manifest.dump(2) << '\n';
    log(1, "manifest: " + out.path("manifest.json").string());
  } catch (const InputError& e) {
    log(0, std::string("config error: ") + e.what());
    return kExitConfig;
  } catch (const SolverError& e) {
    log(0, std::string("solver failure: ") + e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    log(0, std::string("failure: ") + e.what());
    return kExitSolver;
  }
  return code;
}
