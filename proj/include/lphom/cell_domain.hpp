#pragma once

// The unit cell Y = (0,1)^n, its structured periodic mesh, and piecewise
// constant microscale material data.

#include <array>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lphom/q1.hpp"
#include "lphom/tensor.hpp"

namespace lph {

/// Structured m^n Q1 mesh of Y with periodic node identification. Only the
/// canonical representatives (multi-index components in [0, m)) carry
/// degrees of freedom.
class CellMesh {
 public:
  CellMesh(int dim, int resolution);

  int dim() const { return dim_; }
  int resolution() const { return m_; }
  double spacing() const { return 1.0 / m_; }
  int num_nodes() const { return num_nodes_; }
  int num_elements() const { return num_nodes_; }
  int num_dofs() const { return num_nodes_ * dim_; }
  double element_volume() const { return element_volume_; }

  /// Canonical node of an arbitrary (possibly out-of-range) multi-index.
  int node_index(const std::array<int, 3>& idx) const;
  std::array<int, 3> node_multi_index(int node) const;
  Point node_coord(int node) const;

  /// Periodic identification on the full (m+1)^n boundary-inclusive grid.
  int full_grid_size() const;
  int periodic_map(int full_node) const;
  /// The full-grid node that is the canonical representative of `node`.
  int canonical_full_node(int node) const;

  int element_node(int e, int a) const { return conn_[static_cast<std::size_t>(e) * nodes_per_elem_ + a]; }
  int nodes_per_element() const { return nodes_per_elem_; }
  std::array<int, 3> element_multi_index(int e) const { return node_multi_index(e); }
  Point element_origin(int e) const { return node_coord(e); }
  Point element_centroid(int e) const;

  const Q1Reference& quadrature() const { return q1_reference(dim_, 2); }

 private:
  int dim_;
  int m_;
  int num_nodes_;
  int nodes_per_elem_;
  double element_volume_;
  std::vector<int> conn_;
};

/// Throws InputError for m < 2 or a bad dimension.
std::shared_ptr<const CellMesh> build_cell_mesh(int dim, int resolution);

// --- geometry descriptors -------------------------------------------------

/// Phase 1 where frac(normal . y - start) < width, phase 0 elsewhere.
/// `normal` is an integer lattice vector so the layering is Y-periodic.
struct Laminate {
  std::array<int, 3> normal{1, 0, 0};
  double start = 0.5;
  double width = 0.5;
};

/// Phase 1 inside a disc / ball, phase 0 outside.
struct Inclusion {
  Point center{0.5, 0.5, 0.5};
  double radius = 0.25;
};

/// blocks^n alternating blocks; phase = parity of the block index sum.
struct Checkerboard {
  int blocks = 2;
};

/// Voxel phase map. Voxel (i0,i1,i2) covers [i_d/dims_d, (i_d+1)/dims_d) and
/// is stored row-major: ((i0*dims1) + i1)*dims2 + i2.
struct VoxelGrid {
  std::array<int, 3> dims{1, 1, 1};
  int phase_count = 1;
  std::vector<int> phases;
};

using Geometry = std::variant<Laminate, Inclusion, Checkerboard, VoxelGrid>;

/// Number of phases the descriptor references.
int geometry_phase_count(const Geometry& g);
/// Checks that the descriptor lies within Y for dimension n.
void validate_geometry(const Geometry& g, int n);
/// Phase at a cell point; y is reduced modulo 1 first.
int geometry_phase_at(const Geometry& g, const Point& y, int n);

nlohmann::json geometry_to_json(const Geometry& g, int n);
/// Parses {"kind": "laminate"|"inclusion"|"checkerboard"|"voxel", ...}.
/// Voxel descriptors reference a raw int32 file relative to `base_dir`.
Geometry geometry_from_json(const nlohmann::json& j, int n, const std::string& base_dir = ".");

/// Reads a voxel phase map: JSON header {"dims": [...], "phase_count": k,
/// "data": "file.raw"} with little-endian int32 row-major payload.
VoxelGrid read_voxel_grid(const std::string& header_path);
void write_voxel_grid(const VoxelGrid& grid, const std::string& header_path, int n);

// --- material ------------------------------------------------------------

struct Phase {
  std::string name;
  Tensor4 elasticity;
  ResidualGenerator residual;
};

/// Phase with the St. Venant-Kirchhoff residual generator.
Phase make_phase(std::string name, const Tensor4& elasticity);

class CellMaterial {
 public:
  CellMaterial(std::shared_ptr<const CellMesh> mesh, std::vector<Phase> phases, Geometry geometry);

  const CellMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const CellMesh>& mesh_ptr() const { return mesh_; }
  int dim() const { return mesh_->dim(); }

  const std::vector<Phase>& phases() const { return phases_; }
  const Phase& phase(int p) const { return phases_.at(p); }
  int num_phases() const { return static_cast<int>(phases_.size()); }
  int element_phase(int e) const { return phase_ids_[e]; }
  const std::vector<int>& phase_ids() const { return phase_ids_; }
  const std::vector<double>& volume_fractions() const { return fractions_; }
  const Geometry& geometry() const { return geometry_; }

  /// Phase of the exact (unmeshed) geometry at y, reduced modulo 1.
  int phase_at(const Point& y) const { return geometry_phase_at(geometry_, y, dim()); }

 private:
  std::shared_ptr<const CellMesh> mesh_;
  std::vector<Phase> phases_;
  Geometry geometry_;
  std::vector<int> phase_ids_;
  std::vector<double> fractions_;
};

/// Assigns each element the phase at its centroid. Throws InputError when a
/// phase ends up empty, when the geometry leaves Y, or when a phase tensor
/// is not symmetric and coercive.
std::shared_ptr<const CellMaterial> assign_phases(std::shared_ptr<const CellMesh> mesh, const Geometry& geometry,
                                                  std::vector<Phase> phases);

}  // namespace lph
