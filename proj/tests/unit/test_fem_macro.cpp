#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lphom/error.hpp"
#include "lphom/fem_macro.hpp"

using namespace lph;

namespace {

EffectiveRecord uniform_record(const Tensor4& c, const Tensor2& s) {
  EffectiveRecord r;
  r.H = r.K = Tensor2::identity(c.dim());
  r.elasticity = c;
  r.residual = s;
  return r;
}

MacroProblem unit_problem(int cells) {
  MacroProblem p;
  p.domain = unit_box(2);
  p.cells = {cells, cells, 1};
  return p;
}

DisplacementField interpolate(const MacroProblem& p, const VectorFunction& f) {
  DisplacementField u;
  u.mesh = std::make_shared<const MacroMesh>(p.domain, p.cells);
  u.values.resize(u.mesh->num_dofs());
  for (int node = 0; node < u.mesh->num_nodes(); ++node) {
    const Point v = f(u.mesh->node_coord(node));
    for (int i = 0; i < 2; ++i) u.values(node * 2 + i) = v[i];
  }
  return u;
}

std::shared_ptr<const CellMaterial> laminate_material() {
  return assign_phases(build_cell_mesh(2, 8), Laminate{},
                       {make_phase("stiff", make_isotropic(2, 2, 2)), make_phase("soft", make_isotropic(1, 1, 2))});
}

}  // namespace

TEST_CASE("mesh indexing") {
  const MacroMesh m({2, {0.0, 1.0, 0}, {2.0, 2.0, 0}}, {4, 2, 1});
  CHECK(m.num_elements() == 8);
  CHECK(m.num_nodes() == 15);
  CHECK(m.element_node(5, 3) == 12);
  CHECK(m.node_coord(14)[0] == 2.0);
  CHECK(m.node_coord(14)[1] == 2.0);
  CHECK(m.is_boundary(0));
  CHECK_FALSE(m.is_boundary(6));
  Point local;
  CHECK(m.locate({1.25, 1.75, 0}, local) == 6);
  CHECK(local[0] == doctest::Approx(0.5));
  CHECK(local[1] == doctest::Approx(0.5));
}

TEST_CASE("linear boundary data is reproduced exactly") {
  const Tensor2 E = Tensor2::from_rows({{0.01, 0.02}, {-0.005, 0.03}});
  auto law = constant_law(uniform_record(make_isotropic(1.5, 1.0, 2), Tensor2(2)));
  MacroProblem p = unit_problem(6);
  p.boundary = linear_vector_function(E);
  const DisplacementField u = solve_homogenized(p, *law);
  const auto err = error_norms(u, linear_vector_function(E), [&](const Point&) { return E; });
  CHECK(err.l2 < 1e-14);
  CHECK(err.h1_semi < 1e-13);
  CHECK(u.stats.residual < 1e-12);
}

TEST_CASE("a constant effective residual stress plays no role") {
  const Tensor4 c = make_isotropic(1.5, 1.0, 2);
  MacroProblem p = unit_problem(12);
  p.body_force = constant_vector_function({1.0, -0.5, 0});
  const auto u0 = solve_homogenized(p, *constant_law(uniform_record(c, Tensor2(2))));
  const auto u1 = solve_homogenized(p, *constant_law(uniform_record(c, Tensor2::from_rows({{0.3, 0.1}, {0.1, -0.2}}))));
  CHECK(error_norms(u0, u1).l2 < 1e-10 * field_norms(u0).l2);
}

TEST_CASE("a rotating law changes the solution") {
  auto mat = laminate_material();
  auto solver = std::make_shared<const CellSolver>(mat);
  auto K = rotation_field(2, {2.0, 1.0, 0}, 0.0);
  auto fast = build_fast_path(solver, K, {0.5, 0.5, 0}, unit_box(2), K);
  MacroProblem p = unit_problem(16);
  p.body_force = constant_vector_function({1.0, 1.0, 0});
  const auto ur = solve_homogenized(p, *fast);
  const auto uc = solve_homogenized(p, *constant_law(fast->evaluate({0.5, 0.5, 0})));
  CHECK(error_norms(ur, uc).l2 > 1e-3 * field_norms(uc).l2);
}

TEST_CASE("exported law gives a bit-identical homogenized solution") {
  auto mat = laminate_material();
  auto solver = std::make_shared<const CellSolver>(mat);
  auto K = rotation_field(2, {0.5, 0.3, 0}, 0.0, 1.05);
  auto fast = build_fast_path(solver, K, {0.5, 0.5, 0}, unit_box(2), K);
  MacroProblem p = unit_problem(8);
  p.body_force = constant_vector_function({1.0, 0.0, 0});
  const MacroMesh mesh(p.domain, p.cells);
  std::vector<Point> centroids;
  for (int e = 0; e < mesh.num_elements(); ++e) centroids.push_back(mesh.element_centroid(e));
  const auto imported = law_from_json(nlohmann::json::parse(law_to_json(*fast, centroids).dump()));
  const auto a = solve_homogenized(p, *fast);
  const auto b = solve_homogenized(p, *imported);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-phase direct solve equals the homogenized solve") {
  const Tensor4 c = make_isotropic(1.2, 0.8, 2);
  auto mat = assign_phases(build_cell_mesh(2, 4), Laminate{}, {make_phase("a", c), make_phase("b", c)});
  auto I = constant_field(Tensor2::identity(2));
  MacroProblem p = unit_problem(64);
  p.body_force = constant_vector_function({1.0, 2.0, 0});
  const MicroField field(mat, I, decompose(unit_box(2), 1.0 / 8, 0.6, I));
  const auto ud = solve_direct(p, field);
  const auto uh = solve_homogenized(p, *constant_law(uniform_record(c, Tensor2(2))));
  CHECK(error_norms(ud, uh).l2 < 1e-12 * field_norms(uh).l2);
}

TEST_CASE("orthogonal K: residual term switched on or off changes nothing") {
  auto mat = laminate_material();
  auto K = rotation_field(2, {0.5, 0.5, 0}, 0.0);
  const MicroField field(mat, K, decompose(unit_box(2), 1.0 / 8, 0.6, K));
  MacroProblem p = unit_problem(64);
  p.body_force = constant_vector_function({1.0, 0.0, 0});
  const auto a = solve_direct(p, field);
  p.include_residual = false;
  const auto b = solve_direct(p, field);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("under-resolved direct mesh is rejected naming the rule") {
  auto mat = laminate_material();
  auto I = constant_field(Tensor2::identity(2));
  const MicroField field(mat, I, decompose(unit_box(2), 1.0 / 8, 0.6, I));
  MacroProblem p = unit_problem(32);
  try {
    solve_direct(p, field);
    FAIL("expected rejection");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("resolution rule") != std::string::npos);
  }
}

TEST_CASE("error norms") {
  MacroProblem p = unit_problem(64);
  const auto a = interpolate(p, [](const Point& x) { return Point{std::sin(M_PI * x[0]), x[1], 0}; });
  CHECK(error_norms(a, a).l2 == 0.0);
  const auto b = interpolate(p, [](const Point& x) { return Point{std::sin(M_PI * x[0]) + 0.3, x[1] - 0.4, 0}; });
  const auto shift = error_norms(a, b);
  CHECK(shift.l2 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(shift.h1_semi < 1e-12);
  // difference sin(pi x1): L2 norm sqrt(1/2), H1 seminorm pi sqrt(1/2)
  const auto c = interpolate(p, [](const Point& x) { return Point{0.0, x[1], 0}; });
  const auto s = error_norms(a, c);
  CHECK(s.l2 == doctest::Approx(std::sqrt(0.5)).epsilon(1e-3));
  CHECK(s.h1_semi == doctest::Approx(M_PI * std::sqrt(0.5)).epsilon(1e-3));
  // a coarse field is interpolated onto the finer mesh
  MacroProblem q = unit_problem(16);
  const auto coarse = interpolate(q, [](const Point& x) { return Point{0.0, x[1], 0}; });
  CHECK(error_norms(a, coarse).l2 == doctest::Approx(s.l2).epsilon(1e-12));
  MacroProblem other = unit_problem(16);
  other.domain.hi = {2, 1, 0};
  CHECK_THROWS_AS(error_norms(a, interpolate(other, zero_vector_function())), InputError);
}

TEST_CASE("single-phase convergence study sits at the solver floor") {
  const Tensor4 c = make_isotropic(1.2, 0.8, 2);
  ConvergenceSetup s;
  s.material = assign_phases(build_cell_mesh(2, 4), Laminate{}, {make_phase("a", c), make_phase("b", c)});
  s.H = s.K = constant_field(Tensor2::identity(2));
  s.law = constant_law(uniform_record(c, Tensor2(2)));
  s.domain = unit_box(2);
  s.body_force = constant_vector_function({1.0, 1.0, 0});
  const auto rep = convergence_study(s, {1.0 / 4, 1.0 / 8});
  REQUIRE(rep.rows.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(r.completed);
    CHECK(r.l2_error < 1e-12);
  }
  CHECK(rep.h1_band < 1.01);
  CHECK(convergence_csv(rep).rfind("eps,cells,completed,l2_error,h1_error,h1_norm\n", 0) == 0);
}

TEST_CASE("laminate convergence study with a tiny budget is partial") {
  ConvergenceSetup s;
  s.material = laminate_material();
  s.H = s.K = constant_field(Tensor2::identity(2));
  auto solver = std::make_shared<const CellSolver>(s.material);
  s.law = build_fast_path(solver, s.K, {0.5, 0.5, 0}, unit_box(2));
  s.domain = unit_box(2);
  s.budget_seconds = 1e-9;
  const auto rep = convergence_study(s, {1.0 / 4, 1.0 / 8});
  CHECK(rep.budget_exceeded);
  CHECK_FALSE(rep.rows.back().completed);
  CHECK_FALSE(rep.monotone);
}

TEST_CASE("laminate with H = K = 1: L2 error decreases and H1 norms stay bounded") {
  ConvergenceSetup s;
  s.material = laminate_material();
  s.H = s.K = constant_field(Tensor2::identity(2));
  auto solver = std::make_shared<const CellSolver>(s.material);
  s.law = build_fast_path(solver, s.K, {0.5, 0.5, 0}, unit_box(2));
  s.domain = unit_box(2);
  s.body_force = constant_vector_function({1.0, 1.0, 0});
  const auto rep = convergence_study(s, {1.0 / 4, 1.0 / 8, 1.0 / 16});
  CHECK(rep.monotone);
  CHECK(rep.h1_band <= 1.5);
}

TEST_CASE("displacement dump round-trip") {
  MacroProblem p = unit_problem(5);
  const auto a = interpolate(p, [](const Point& x) { return Point{x[0] * x[1], -x[0], 0}; });
  const auto dir = std::filesystem::temp_directory_path() / "lphom_disp_test";
  std::filesystem::create_directories(dir);
  write_displacement(a, (dir / "u").string());
  const auto b = read_displacement((dir / "u").string());
  CHECK(b.mesh->num_nodes() == a.mesh->num_nodes());
  CHECK((a.values - b.values).norm() == 0.0);
  std::filesystem::remove_all(dir);
}
