#include <doctest.h>

#include <cmath>

#include "lphom/error.hpp"
#include "lphom/fields.hpp"

using namespace lph;

TEST_CASE("rotation field evaluates scale * Q(a.x + b)") {
  const auto f = rotation_field(2, {0.5, -0.25, 0}, 0.1, 2.0);
  const Point x{0.4, 0.8, 0};
  const double th = 0.5 * 0.4 - 0.25 * 0.8 + 0.1;
  CHECK(approx_equal((*f)(x), 2.0 * Tensor2::rotation(2, th), 1e-15));
}

TEST_CASE("fields round-trip through their JSON description") {
  const Box box = unit_box(2);
  std::vector<FieldPtr> fields{
      constant_field(Tensor2::diag({1.1, 0.9})),
      rotation_field(2, {0.3, 0.2, 0}, -0.1, 1.5),
      shear_field(2, 0.1, {0.2, 0, 0}, 0, 1),
      isotropic_linear_field(2, 1.0, {0.2, 0, 0}),
      grid_field(box, {2, 2, 1},
                 {Tensor2::identity(2), Tensor2::diag({2, 1}), Tensor2::diag({1, 2}), Tensor2::diag({2, 2})}),
  };
  for (const auto& f : fields) {
    const auto g = field_from_json(f->spec(), 2);
    CHECK(max_field_mismatch(*f, *g, box) == 0.0);
  }
}

TEST_CASE("field parser rejects unknown keys and kinds") {
  CHECK_THROWS_AS(field_from_json({{"kind", "rotation"}, {"speed", 1}}, 2), InputError);
  CHECK_THROWS_AS(field_from_json({{"kind", "spiral"}}, 2), InputError);
  CHECK_THROWS_AS(field_from_json({{"kind", "constant"}, {"value", {{1, 0, 0}, {0, 1, 0}}}}, 2), InputError);
}

TEST_CASE("grid field interpolates multilinearly") {
  const Box box = unit_box(2);
  const auto f = grid_field(box, {2, 2, 1},
                            {Tensor2::identity(2), Tensor2::diag({3, 1}), Tensor2::diag({1, 3}), Tensor2::diag({3, 3})});
  // componentwise the data is 1 + 2 x1 (first entry) and 1 + 2 x2 (second)
  const Tensor2 v = (*f)({0.25, 0.75, 0});
  CHECK(v(0, 0) == doctest::Approx(1.5));
  CHECK(v(1, 1) == doctest::Approx(2.5));
  // clamped outside
  CHECK(approx_equal((*f)({2.0, -1.0, 0}), Tensor2::diag({3, 1}), 1e-15));
}

TEST_CASE("derived_from_L of a constant lattice returns the lattice") {
  const Tensor2 L = Tensor2::from_rows({{1.2, 0.1}, {0.0, 0.9}});
  const auto H = derived_from_L_field(constant_field(L));
  CHECK(max_field_mismatch(*H, *constant_field(L), unit_box(2)) < 1e-9);
}

TEST_CASE("box grid points include the faces") {
  Box b{2, {0.1, 0.2, 0}, {1.1, 0.7, 0}};
  const auto pts = box_grid_points(b, 3);
  REQUIRE(pts.size() == 9);
  CHECK(pts.front()[0] == doctest::Approx(0.1));
  CHECK(pts.back()[1] == doctest::Approx(0.7));
  CHECK(b.volume() == doctest::Approx(0.5));
  const Box c = box_from_json(box_to_json(b));
  CHECK(c.lo == b.lo);
  CHECK(c.hi == b.hi);
}
