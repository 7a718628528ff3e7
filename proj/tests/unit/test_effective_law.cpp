#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "lphom/effective_law.hpp"
#include "lphom/error.hpp"
#include "lphom/laminate.hpp"
#include "test_util.hpp"

using namespace lph;

namespace {

std::shared_ptr<const CellSolver> laminate_solver(int n, int m, double contrast = 10.0) {
  auto mesh = build_cell_mesh(n, m);
  auto mat = assign_phases(mesh, Laminate{},
                           {make_phase("stiff", make_isotropic(contrast, contrast, n)), make_phase("soft", make_isotropic(1, 1, n))});
  SolverOptions o;
  o.tolerance = 1e-12;
  return std::make_shared<const CellSolver>(mat, o);
}

std::shared_ptr<const CellSolver> uniform_solver(const Tensor4& c, int m) {
  auto mesh = build_cell_mesh(c.dim(), m);
  auto mat = assign_phases(mesh, Laminate{}, {make_phase("a", c), make_phase("b", c)});
  return std::make_shared<const CellSolver>(mat);
}

// Layers for the closed-form cell solution with phases transformed by K.
std::vector<LaminateLayer> transformed_layers(const CellMaterial& mat, const Tensor2& K) {
  std::vector<LaminateLayer> layers;
  const auto& f = mat.volume_fractions();
  for (int p = 0; p < mat.num_phases(); ++p)
    layers.push_back({apply_transform_elasticity(mat.phase(p).elasticity, K), residual_pushforward(mat.phase(p).residual, K), f[p]});
  return layers;
}

}  // namespace

TEST_CASE("uniform material: C_hom is the transformed phase tensor") {
  std::mt19937_64 rng(31);
  const Tensor4 c = test::random_elasticity(2, rng);
  auto solver = uniform_solver(c, 8);
  const Tensor2 I = Tensor2::identity(2);
  const Tensor2 H = test::random_invertible(2, rng);
  const Tensor2 K = test::random_invertible(2, rng);
  CHECK(relative_difference(effective_elasticity_at(*solver, H, I), c) < 1e-10);
  CHECK(relative_difference(effective_elasticity_at(*solver, H, K), apply_transform_elasticity(c, K)) < 1e-10);
  // constant C and S_r: the corrector term is zero and S_r,hom is the plain average
  const auto b = effective_residual_breakdown(*solver, H, K);
  CHECK(b.corrector.norm() < 1e-10);
  CHECK(approx_equal(b.total, residual_pushforward(st_venant_generator(c), K), 1e-10));
}

TEST_CASE("laminate C1111 matches the closed form") {
  auto solver = laminate_solver(2, 16);
  const Tensor2 I = Tensor2::identity(2);
  const Tensor4 c = effective_elasticity_at(*solver, I, I);
  CHECK(c(0, 0, 0, 0) == doctest::Approx(60.0 / 11.0).epsilon(1e-9));
  const Tensor4 oracle = laminate_elasticity(transformed_layers(solver->material(), I), {1, 0, 0});
  CHECK(relative_difference(c, oracle) < 1e-9);
  const auto sym = check_symmetries(c, 1e-10);
  CHECK(sym.minor);
  CHECK(sym.major);
  CHECK(coercivity_constant(c) > 0);
}

TEST_CASE("orthogonal K gives zero effective residual stress") {
  auto solver = laminate_solver(2, 8);
  const Tensor2 Q = Tensor2::rotation(2, 0.7);
  CHECK(effective_residual_at(*solver, Tensor2::identity(2), Q).norm() <= 1e-10);
  CHECK(effective_residual_at(*solver, Q, Q).norm() <= 1e-10);
}

TEST_CASE("laminate with K = diag(1.1, 1): corrector term is not negligible") {
  auto solver = laminate_solver(2, 16);
  const Tensor2 K = Tensor2::diag({1.1, 1.0});
  const auto b = effective_residual_breakdown(*solver, Tensor2::identity(2), K);
  CHECK(b.corrector.norm() > 1e-6);
  CHECK((b.total - b.average).norm() > 1e-6);
  const Tensor2 oracle = laminate_residual(transformed_layers(solver->material(), K), {1, 0, 0});
  CHECK(approx_equal(b.total, oracle, 1e-9 * oracle.norm()));
}

TEST_CASE("pushforward trivial cases") {
  std::mt19937_64 rng(32);
  const Tensor4 c = test::random_elasticity(3, rng);
  CHECK(approx_equal(pushforward_effective(c, Tensor2::identity(3)), c, 1e-14));
  const Tensor4 iso = make_isotropic(2.0, 1.5, 3);
  CHECK(approx_equal(pushforward_effective(iso, Tensor2::rotation_about({1, 2, 3}, 0.4)), iso, 1e-13));
  CHECK_THROWS_AS(pushforward_effective(c, Tensor2::diag({1, 0, 1})), InputError);
}

TEST_CASE("fast path: constant K is classical homogenization of the transformed cell") {
  auto solver = laminate_solver(2, 16);
  const Tensor2 K = Tensor2::from_rows({{1.1, 0.2}, {-0.1, 0.95}});
  auto law = build_fast_path(solver, constant_field(K), {0.5, 0.5, 0}, unit_box(2));
  const auto r1 = law->evaluate({0.1, 0.2, 0}), r2 = law->evaluate({0.9, 0.7, 0});
  CHECK(approx_equal(r1.elasticity, r2.elasticity, 0.0));
  CHECK(relative_difference(r1.elasticity, effective_elasticity_at(*solver, K, K)) < 1e-9);
  CHECK(approx_equal(r1.residual, effective_residual_at(*solver, K, K), 1e-10));
  CHECK(law->canonical_solves() == 3);
}

TEST_CASE("fast path agrees with pointwise solves for a rotation field") {
  auto solver = laminate_solver(2, 16);
  auto K = rotation_field(2, {0.6, 0.3, 0}, 0.1);
  auto law = build_fast_path(solver, K, {0.5, 0.5, 0}, unit_box(2), K);
  const Tensor4 base = law->base();
  for (const Point& x : {Point{0.1, 0.2, 0}, Point{0.5, 0.9, 0}, Point{0.95, 0.05, 0}}) {
    const Tensor2 Kx = (*K)(x);
    const Tensor4 direct = effective_elasticity_at(*solver, Kx, Kx);
    const auto rec = law->evaluate(x);
    CHECK(relative_difference(rec.elasticity, direct) < 1e-8);
    // base tensor rotated by theta(x) - theta(x0)
    const double dth = 0.6 * (x[0] - 0.5) + 0.3 * (x[1] - 0.5);
    CHECK(relative_difference(rec.elasticity, apply_transform_elasticity(base, Tensor2::rotation(2, dth))) < 1e-12);
  }
}

TEST_CASE("fast path in 3D performs six canonical solves") {
  auto solver = laminate_solver(3, 8);
  auto K = rotation_field(3, {0.2, 0.1, 0.3}, 0.0, 1.0, {0, 0, 1});
  auto law = build_fast_path(solver, K, {0.5, 0.5, 0.5}, unit_box(3), K);
  CHECK(law->canonical_solves() == 6);
  CHECK(solver->canonical_solves() == 6);
  law->evaluate({0.2, 0.3, 0.4});
  CHECK(solver->canonical_solves() == 6);
}

TEST_CASE("fast path rejects H different from K") {
  auto solver = laminate_solver(2, 8);
  auto K = rotation_field(2, {0.5, 0, 0}, 0.0);
  CHECK_THROWS_AS(build_fast_path(solver, K, {0.5, 0.5, 0}, unit_box(2), constant_field(Tensor2::identity(2))), InputError);
  CHECK_THROWS_AS(build_fast_path(solver, K, {1.5, 0.5, 0}, unit_box(2)), InputError);
}

TEST_CASE("material uniformity between points under H = K") {
  auto solver = laminate_solver(2, 16);
  // K^T K is constant, so the residual parts are transported as well
  auto K = rotation_field(2, {0.8, -0.4, 0}, 0.2, 1.1);
  auto law = build_pointwise_law(solver, K, K);
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 3; ++t) {
    const Point x1{u(rng), u(rng), 0}, x2{u(rng), u(rng), 0};
    const auto r1 = law->evaluate(x1), r2 = law->evaluate(x2);
    const Tensor2 M = uniformity_map(r2.K, r1.K);
    const Tensor2 E = test::random_symmetric(2, rng);
    const Tensor2 lhs = effective_stress(r1, E);
    const Tensor2 rhs = M * effective_stress(r2, M.transpose() * E * M) * M.transpose();
    CHECK(approx_equal(lhs, rhs, 1e-8 * lhs.norm()));
  }
}

TEST_CASE("table law: exact with constant fields, exact at samples, refines") {
  auto solver = laminate_solver(2, 8, 3.0);
  const Box box = unit_box(2);
  const Tensor2 K = Tensor2::diag({1.05, 0.97});
  auto flat = build_law_table(solver, constant_field(K), constant_field(K), box, {3, 3, 1});
  const auto ref = effective_elasticity_at(*solver, K, K);
  CHECK(relative_difference(flat->evaluate({0.3, 0.7, 0}).elasticity, ref) < 1e-12);
  CHECK(flat->probe_elasticity_error() < 1e-12);

  auto rot = rotation_field(2, {1.0, 0.5, 0}, 0.0);
  auto coarse = build_law_table(solver, rot, rot, box, {5, 5, 1});
  auto fine = build_law_table(solver, rot, rot, box, {9, 9, 1});
  CHECK(fine->probe_elasticity_error() < coarse->probe_elasticity_error());
  const auto stored = coarse->stored_records();
  const auto hit = coarse->evaluate(stored[7].x);
  CHECK(approx_equal(hit.elasticity, stored[7].elasticity, 0.0));
  CHECK(approx_equal(hit.residual, stored[7].residual, 0.0));
  coarse->evaluate({1.5, 0.5, 0});
  CHECK(coarse->clamped_queries() == 1);
}

TEST_CASE("C_hom lies between harmonic and arithmetic phase means") {
  auto solver = laminate_solver(2, 16);
  std::mt19937_64 rng(34);
  for (int t = 0; t < 3; ++t) {
    const Tensor2 H = test::random_invertible(2, rng), K = test::random_invertible(2, rng);
    const Tensor4 c = effective_elasticity_at(*solver, H, K);
    const MeanBounds b = phase_mean_bounds(solver->material(), K);
    const double scale = b.arithmetic.norm();
    CHECK(min_sym_eigenvalue_of_difference(b.arithmetic, c) >= -1e-10 * scale);
    CHECK(min_sym_eigenvalue_of_difference(c, b.harmonic) >= -1e-10 * scale);
  }
}

TEST_CASE("law export and import preserve records exactly") {
  auto solver = laminate_solver(2, 8);
  auto K = rotation_field(2, {0.4, 0.2, 0}, 0.0, 1.05);
  auto law = build_fast_path(solver, K, {0.5, 0.5, 0}, unit_box(2), K);
  const std::vector<Point> pts{{0.25, 0.25, 0}, {0.75, 0.25, 0}, {0.5, 0.8, 0}};
  const auto dir = std::filesystem::temp_directory_path() / "lphom_law_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "law.json").string();
  write_law(*law, path, pts);
  auto back = read_law(path);
  CHECK(back->strategy() == LawStrategy::Sampled);
  for (const auto& x : pts) {
    const auto a = law->evaluate(x), b = back->evaluate(x);
    CHECK(approx_equal(Tensor4::from_voigt(a.elasticity.voigt(), 2), b.elasticity, 0.0));
    CHECK((a.residual.voigt() - b.residual.voigt()).norm() == 0.0);
  }
  CHECK_THROWS_AS(back->evaluate({0.1, 0.1, 0}), InputError);

  auto table = build_law_table(solver, K, K, unit_box(2), {3, 3, 1}, 2);
  write_law(*table, path);
  auto tback = read_law(path);
  CHECK(tback->strategy() == LawStrategy::Table);
  const Point q{0.3, 0.6, 0};
  CHECK(relative_difference(tback->evaluate(q).elasticity, table->evaluate(q).elasticity) < 1e-15);
  std::filesystem::remove_all(dir);
}
