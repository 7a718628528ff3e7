#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "lphom/error.hpp"
#include "lphom/micro_synth.hpp"
#include "test_util.hpp"

using namespace lph;

namespace {

const FieldPtr& identity2() {
  static const FieldPtr f = constant_field(Tensor2::identity(2));
  return f;
}

std::shared_ptr<const CellMaterial> two_phase(int n, const Tensor4& a, const Tensor4& b) {
  return assign_phases(build_cell_mesh(n, 8), Laminate{}, {make_phase("a", a), make_phase("b", b)});
}

AnchorOptions lattice_anchors(FieldPtr L) {
  AnchorOptions o;
  o.rule = AnchorRule::LatticeAligned;
  o.L = std::move(L);
  return o;
}

}  // namespace

TEST_CASE("patch counts and edges") {
  const auto a = decompose(unit_box(2), 1.0 / 16, 0.5, identity2());
  CHECK(a->patch_size() == doctest::Approx(0.25));
  CHECK(a->patches().size() == 16);
  CHECK(a->k_min() == std::array<int, 3>{0, 0, 0});
  CHECK(a->k_max()[0] == 3);
  CHECK(a->k_max()[1] == 3);

  const auto b = decompose(unit_box(2), 0.25, 0.5, identity2());
  CHECK(b->patches().size() == 4);
  CHECK(b->patch_size() / b->eps() == doctest::Approx(2.0));
}

TEST_CASE("shifted domain: every patch meets the domain and together they cover it") {
  const Box box{2, {0.1, 0.1, 0}, {1.1, 1.1, 0}};
  const auto d = decompose(box, 1.0 / 16, 0.5, identity2());
  // patches k = 0..4 per axis: [0, 0.25) ... [1.0, 1.25) are all needed
  CHECK(d->patches().size() == 25);
  for (const Patch& p : d->patches())
    for (int k = 0; k < 2; ++k) {
      CHECK(p.hi[k] > box.lo[k]);
      CHECK(p.lo[k] < box.hi[k]);
    }
  for (const Point& x : box_grid_points(box, 17)) {
    const Patch& p = d->patch_at(x);
    CHECK(x[0] >= p.lo[0] - 1e-12);
    CHECK(x[0] <= p.hi[0] + 1e-12);
  }
  CHECK_THROWS_AS(d->patch_index({1.3, 0.5, 0}), InputError);
}

TEST_CASE("invalid scale parameters are rejected") {
  CHECK_THROWS_AS(decompose(unit_box(2), 1.5, 0.5, identity2()), InputError);
  CHECK_THROWS_AS(decompose(unit_box(2), 0.1, 1.0, identity2()), InputError);
  CHECK_THROWS_AS(decompose(unit_box(2), 0.1, 0.0, identity2()), InputError);
  AnchorOptions o;
  o.rule = AnchorRule::Custom;
  o.custom = [](const Patch& p) { return std::make_pair(Point{p.hi[0] + 1.0, p.lo[1], 0}, p.lo); };
  CHECK_THROWS_AS(decompose(unit_box(2), 0.1, 0.5, identity2(), o), InputError);
}

TEST_CASE("approximation operators") {
  const auto d = decompose(unit_box(2), 1.0 / 16, 0.5, identity2(), lattice_anchors(identity2()));
  std::function<double(const Point&, const Point&)> slow = [](const Point& x, const Point&) { return x[0] + 2 * x[1]; };
  const auto full = approx_field(slow, d, ApproxVariant::Full);
  const auto frozen = approx_field(slow, d, ApproxVariant::Frozen);
  const Point x{0.33, 0.71, 0};
  CHECK(full(x) == doctest::Approx(x[0] + 2 * x[1]).epsilon(1e-15));
  const Point xk = d->patch_at(x).anchor;
  CHECK(frozen(x) == doctest::Approx(xk[0] + 2 * xk[1]).epsilon(1e-15));

  // H = 1 with lattice-aligned shifts: the cell variable is x / eps mod 1
  std::function<double(const Point&, const Point&)> osc = [](const Point&, const Point& y) {
    return std::sin(2 * M_PI * y[0]) * std::cos(2 * M_PI * y[1]);
  };
  const auto f0 = approx_field(osc, d, ApproxVariant::Frozen);
  for (const Point& p : box_grid_points(unit_box(2), 13)) {
    const double expect = std::sin(2 * M_PI * p[0] * 16) * std::cos(2 * M_PI * p[1] * 16);
    CHECK(f0(p) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("integral of the frozen approximation approaches the integral of the cell mean") {
  // psi(x, y) = (1 + x1^2)(1 + 0.5 sin(2 pi y1)); the cell mean integrates to 4/3
  std::function<double(const Point&, const Point&)> psi = [](const Point& x, const Point& y) {
    return (1 + x[0] * x[0]) * (1 + 0.5 * std::sin(2 * M_PI * y[0]));
  };
  auto K = rotation_field(2, {0.3, 0.2, 0}, 0.1);
  double last = 1e9;
  for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const auto d = decompose(unit_box(2), eps, 0.6, K);
    const auto f = approx_field(psi, d, ApproxVariant::Frozen);
    const int N = 1024;
    double s = 0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) s += f({(i + 0.5) / N, (j + 0.5) / N, 0});
    const double gap = std::abs(s / (N * N) - 4.0 / 3.0);
    CHECK(gap < last);
    last = gap;
  }
}

TEST_CASE("classical case: H = K = 1 with lattice shifts is globally periodic") {
  auto mat = two_phase(2, make_isotropic(10, 10, 2), make_isotropic(1, 1, 2));
  const double eps = 1.0 / 16;
  auto d = decompose(unit_box(2), eps, 0.6, identity2(), lattice_anchors(identity2()));
  const MicroField f(mat, identity2(), d);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0 - 3 * eps);
  for (int t = 0; t < 50; ++t) {
    const Point x{u(rng), u(rng), 0};
    const Point y{x[0] + 3 * eps, x[1] + eps, 0};
    CHECK(f.sample(x).phase == f.sample(y).phase);
  }
  // K = 1 and the St. Venant generator: no residual stress
  CHECK(f.residual({0.3, 0.4, 0}).norm() == 0.0);
}

TEST_CASE("orthogonal K gives zero residual stress everywhere") {
  auto mat = two_phase(2, make_isotropic(10, 10, 2), make_isotropic(1, 1, 2));
  auto K = rotation_field(2, {0.7, 0.3, 0}, 0.2);
  const MicroField f(mat, K, decompose(unit_box(2), 1.0 / 16, 0.6, K));
  for (const Point& x : box_grid_points(unit_box(2), 11)) CHECK(f.residual(x).max_abs() < 1e-14);
}

TEST_CASE("rotation field: anchors in different patches differ by the relative rotation") {
  std::mt19937_64 rng(42);
  auto mat = two_phase(2, test::random_elasticity(2, rng), test::random_elasticity(2, rng));
  auto K = rotation_field(2, {0.9, -0.5, 0}, 0.1);
  auto d = decompose(unit_box(2), 1.0 / 16, 0.6, K);
  const MicroField f(mat, K, d);
  const Patch& p = d->patches().front();
  const Patch& q = d->patches().back();
  // at a center anchor y = 0, i.e. the same phase in both patches
  const Tensor4 cp = f.elasticity(p.anchor), cq = f.elasticity(q.anchor);
  const Tensor2 R = (*K)(q.anchor) * (*K)(p.anchor).transpose();
  CHECK(approx_equal(cq, apply_transform_elasticity(cp, R), 1e-12 * cp.norm()));
}

TEST_CASE("within a patch the field repeats with period eps H_k") {
  auto mat = two_phase(2, make_isotropic(10, 10, 2), make_isotropic(1, 1, 2));
  auto H = rotation_field(2, {0.4, 0.4, 0}, 0.3, 1.1);
  const double eps = 1.0 / 32;
  auto d = decompose(unit_box(2), eps, 0.6, H);
  const MicroField f(mat, H, d);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  for (int t = 0; t < 2000; ++t) {
    const Point x{u(rng), u(rng), 0};
    const Patch& p = d->patch_at(x);
    const Point step = p.H.apply({eps * 1, eps * 2, 0});
    const Point x2{x[0] + step[0], x[1] + step[1], 0};
    if (x2[0] < p.lo[0] || x2[0] >= p.hi[0] || x2[1] < p.lo[1] || x2[1] >= p.hi[1]) continue;
    const MicroSample a = f.sample(x), b = f.sample(x2);
    // points within roundoff of a layer interface may legitimately switch phase
    const double s = std::fmod(a.y[0], 1.0);
    if (std::abs(s - 0.5) < 1e-9 || s < 1e-9 || s > 1 - 1e-9) continue;
    CHECK(approx_equal(a.elasticity, b.elasticity, 1e-14));
    ++compared;
  }
  CHECK(compared > 50);
}

TEST_CASE("derive_H_from_L") {
  const Tensor2 L = Tensor2::from_rows({{1.3, 0.2}, {-0.1, 0.8}});
  CHECK(approx_equal(derive_H_from_L(*constant_field(L), {0.3, 0.6, 0}), L, 1e-9));

  // L_x = (1 + a x1) 1: grad g = 1/(1 + a x1) 1 - a x (x) e1 / (1 + a x1)^2
  const double a = 0.2;
  const auto Lf = isotropic_linear_field(2, 1.0, {a, 0, 0});
  for (const Point& x : box_grid_points(unit_box(2), 5)) {
    const double s = 1 + a * x[0];
    Tensor2 J = Tensor2::identity(2) / s;
    J(0, 0) -= a * x[0] / (s * s);
    J(1, 0) -= a * x[1] / (s * s);
    const Tensor2 expect = J.inverse();
    CHECK(approx_equal(derive_H_from_L(*Lf, x), expect, 1e-8));
    const LGradient dL = [a](const Point&, int k) { return k == 0 ? a * Tensor2::identity(2) : Tensor2(2); };
    CHECK(approx_equal(derive_H_from_L(*Lf, dL, x), expect, 1e-12));
  }
}

TEST_CASE("lattice condition grows with the rotation rate") {
  double last = 0;
  for (double c : {0.5, 1.0, 2.0, 4.0}) {
    const auto L = rotation_field(2, {c, 0, 0}, 0.0);
    double worst = 0;
    for (const Point& x : box_grid_points(unit_box(2), 21)) worst = std::max(worst, lattice_jacobian_condition(*L, x));
    CHECK(worst > last);
    last = worst;
  }
  CHECK(last > 10);
}

TEST_CASE("field difference against a nonperiodic reference") {
  auto mat = two_phase(2, make_isotropic(10, 10, 2), make_isotropic(1, 1, 2));
  const NonperiodicField np(mat, identity2(), identity2(), 1.0 / 16);
  auto d = decompose(unit_box(2), 1.0 / 16, 0.6, identity2(), lattice_anchors(identity2()));
  const MicroField f(mat, identity2(), d);
  const FieldDifference diff = field_l2_difference(f, np, unit_box(2), 64);
  CHECK(diff.mismatch_fraction == 0.0);
  CHECK(diff.elasticity_l2 == 0.0);
}

TEST_CASE("voxel export writes header and payload") {
  auto mat = two_phase(2, make_isotropic(10, 10, 2), make_isotropic(1, 1, 2));
  auto d = decompose(unit_box(2), 0.25, 0.5, identity2());
  const MicroField f(mat, identity2(), d);
  const auto dir = std::filesystem::temp_directory_path() / "lphom_voxel_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "field").string();
  write_micro_voxels(f, unit_box(2), {4, 3, 1}, prefix);
  CHECK(std::filesystem::exists(prefix + ".json"));
  CHECK(std::filesystem::file_size(prefix + ".bin") == 12 * (9 + 3) * sizeof(double));
  std::filesystem::remove_all(dir);
}
