#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "lphom/cell_domain.hpp"
#include "lphom/error.hpp"

using namespace lph;

TEST_CASE("cell mesh counts") {
  auto m24 = build_cell_mesh(2, 4);
  CHECK(m24->num_elements() == 16);
  CHECK(m24->num_nodes() == 16);
  CHECK(m24->num_dofs() == 32);
  auto m32 = build_cell_mesh(3, 2);
  CHECK(m32->num_elements() == 8);
  CHECK(m32->num_nodes() == 8);
  CHECK(m32->nodes_per_element() == 8);
  CHECK_THROWS_AS(build_cell_mesh(2, 1), InputError);
  CHECK_THROWS_AS(build_cell_mesh(4, 4), InputError);
}

TEST_CASE("element volumes sum to one") {
  auto m = build_cell_mesh(2, 64);
  double s = 0;
  for (int e = 0; e < m->num_elements(); ++e) s += m->element_volume();
  CHECK(std::abs(s - 1.0) < 1e-12);
  auto m3 = build_cell_mesh(3, 7);
  s = 0;
  for (int e = 0; e < m3->num_elements(); ++e) s += m3->element_volume();
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("periodic identification") {
  for (int n : {2, 3}) {
    auto m = build_cell_mesh(n, 3);
    std::set<int> canon;
    for (int f = 0; f < m->full_grid_size(); ++f) {
      const int c = m->periodic_map(f);
      canon.insert(c);
      // The map lands on canonical nodes, and a second application is stable.
      CHECK(m->periodic_map(m->canonical_full_node(c)) == c);
    }
    CHECK(static_cast<int>(canon.size()) == m->num_nodes());
    // Opposite faces share DOFs.
    CHECK(m->node_index({3, 1, 0}) == m->node_index({0, 1, 0}));
    CHECK(m->node_index({-1, 0, 0}) == m->node_index({2, 0, 0}));
  }
}

TEST_CASE("element connectivity wraps") {
  auto m = build_cell_mesh(2, 4);
  const int last = m->node_index({3, 3, 0});
  // Top-right corner of the last element is node (0,0).
  CHECK(m->element_node(last, 3) == 0);
  const Point c = m->element_centroid(last);
  CHECK(c[0] == doctest::Approx(0.875));
  CHECK(c[1] == doctest::Approx(0.875));
}

static std::vector<Phase> two_phases(int n) {
  return {make_phase("a", make_isotropic(1, 1, n)), make_phase("b", make_isotropic(2, 3, n))};
}

TEST_CASE("phase assignment and volume fractions") {
  SUBCASE("laminate") {
    auto mat = assign_phases(build_cell_mesh(2, 16), Laminate{}, two_phases(2));
    CHECK(mat->volume_fractions()[0] == 0.5);
    CHECK(mat->volume_fractions()[1] == 0.5);
    CHECK(mat->phase_at({0.25, 0.3, 0}) == 0);
    CHECK(mat->phase_at({0.75, 0.3, 0}) == 1);
  }
  SUBCASE("inclusion fraction converges to pi/16") {
    const int m = 64;
    auto mat = assign_phases(build_cell_mesh(2, m), Inclusion{}, two_phases(2));
    CHECK(std::abs(mat->volume_fractions()[1] - M_PI / 16) <= 2.0 / m);
    double prev = 1;
    for (int r : {16, 64, 256}) {
      auto mr = assign_phases(build_cell_mesh(2, r), Inclusion{}, two_phases(2));
      const double err = std::abs(mr->volume_fractions()[1] - M_PI / 16);
      CHECK(err <= 2.0 / r);
      CHECK(err <= prev);
      prev = err;
    }
  }
  SUBCASE("checkerboard") {
    auto mat = assign_phases(build_cell_mesh(2, 8), Checkerboard{2}, two_phases(2));
    CHECK(mat->volume_fractions()[0] == 0.5);
    CHECK(mat->volume_fractions()[1] == 0.5);
    auto m3 = assign_phases(build_cell_mesh(3, 4), Checkerboard{2}, two_phases(3));
    CHECK(m3->volume_fractions()[1] == 0.5);
  }
  SUBCASE("empty phase rejected") {
    CHECK_THROWS_AS(assign_phases(build_cell_mesh(2, 2), Inclusion{{0.5, 0.5, 0.5}, 0.05}, two_phases(2)), InputError);
  }
  SUBCASE("geometry must stay in the cell") {
    CHECK_THROWS_AS(assign_phases(build_cell_mesh(2, 8), Inclusion{{0.1, 0.5, 0.5}, 0.25}, two_phases(2)), InputError);
  }
  SUBCASE("bad phase tensor rejected") {
    auto phases = two_phases(2);
    phases[1].elasticity(0, 0, 1, 1) += 0.1;
    CHECK_THROWS_AS(assign_phases(build_cell_mesh(2, 8), Laminate{}, phases), InputError);
  }
}

TEST_CASE("material field is periodic") {
  for (const Geometry& g : {Geometry{Laminate{{1, 1, 0}, 0.2, 0.4}}, Geometry{Inclusion{}}, Geometry{Checkerboard{3}}}) {
    for (double x : {0.05, 0.33, 0.71})
      for (double y : {0.12, 0.5, 0.93}) {
        const int p = geometry_phase_at(g, {x, y, 0}, 2);
        CHECK(geometry_phase_at(g, {x + 1, y, 0}, 2) == p);
        CHECK(geometry_phase_at(g, {x, y - 1, 0}, 2) == p);
        CHECK(geometry_phase_at(g, {x + 3, y + 2, 0}, 2) == p);
      }
  }
}

TEST_CASE("geometry JSON") {
  const Geometry g = geometry_from_json({{"kind", "laminate"}, {"axis", 1}, {"width", 0.3}}, 2);
  const auto& lam = std::get<Laminate>(g);
  CHECK(lam.normal[1] == 1);
  CHECK(lam.normal[0] == 0);
  CHECK(lam.width == 0.3);
  const auto back = geometry_from_json(geometry_to_json(g, 2), 2);
  CHECK(std::get<Laminate>(back).width == 0.3);
  CHECK_THROWS_AS(geometry_from_json({{"kind", "laminate"}, {"thickness", 0.3}}, 2), InputError);
  CHECK_THROWS_AS(geometry_from_json({{"kind", "spiral"}}, 2), InputError);
}

TEST_CASE("voxel round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lphom_voxel_test";
  std::filesystem::create_directories(dir);
  VoxelGrid v;
  v.dims = {4, 2, 1};
  v.phase_count = 2;
  v.phases = {0, 1, 1, 0, 0, 0, 1, 1};
  write_voxel_grid(v, (dir / "grid.json").string(), 2);
  const VoxelGrid r = read_voxel_grid((dir / "grid.json").string());
  CHECK(r.dims[0] == 4);
  CHECK(r.dims[1] == 2);
  CHECK(r.phases == v.phases);
  // Voxel (i0,i1) covers [i0/4,(i0+1)/4) x [i1/2,(i1+1)/2), row-major.
  CHECK(geometry_phase_at(r, {0.1, 0.7, 0}, 2) == 1);
  CHECK(geometry_phase_at(r, {0.6, 0.2, 0}, 2) == 0);
  CHECK(geometry_phase_at(r, {0.9, 0.9, 0}, 2) == 1);
  const Geometry g = geometry_from_json({{"kind", "voxel"}, {"header", "grid.json"}}, 2, dir.string());
  auto mat = assign_phases(build_cell_mesh(2, 8), g, two_phases(2));
  CHECK(mat->volume_fractions()[1] == 0.5);
  std::filesystem::remove_all(dir);
}
