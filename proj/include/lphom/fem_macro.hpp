#pragma once

// Q1 finite elements on a structured grid of a box: the homogenized problem
//   div(S_r,hom + C_hom grad u) + b = 0,
// the eps-resolved problem
//   div(S_r^eps + C^eps grad u^eps) + b = 0,
// both with u = u_0 on the boundary, and norms of their difference.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "lphom/effective_law.hpp"
#include "lphom/fields.hpp"
#include "lphom/micro_synth.hpp"

namespace lph {

class MacroMesh {
 public:
  MacroMesh(const Box& box, const std::array<int, 3>& cells);

  const Box& box() const { return box_; }
  int dim() const { return box_.dim; }
  const std::array<int, 3>& cells() const { return cells_; }
  int num_elements() const { return num_elements_; }
  int num_nodes() const { return num_nodes_; }
  int num_dofs() const { return num_nodes_ * box_.dim; }
  double spacing(int d) const { return h_[d]; }
  double element_volume() const { return volume_; }

  Point node_coord(int node) const;
  int element_node(int e, int a) const;
  Point element_origin(int e) const;
  Point element_centroid(int e) const;
  bool is_boundary(int node) const;
  /// Element containing x (clamped to the box) and the local coordinate in [0,1]^n.
  int locate(const Point& x, Point& local) const;

 private:
  Box box_;
  std::array<int, 3> cells_{1, 1, 1};
  std::array<double, 3> h_{1, 1, 1};
  int num_elements_ = 1, num_nodes_ = 1;
  double volume_ = 1;
};

using VectorFunction = std::function<Point(const Point&)>;

VectorFunction zero_vector_function();
VectorFunction constant_vector_function(const Point& v);
/// x -> E x.
VectorFunction linear_vector_function(const Tensor2& E);
/// Parses {"kind": "zero"|"constant"|"linear", ...}.
VectorFunction vector_function_from_json(const nlohmann::json& j, int dim);

struct MacroProblem {
  Box domain;
  std::array<int, 3> cells{8, 8, 8};
  VectorFunction boundary = zero_vector_function();
  VectorFunction body_force = zero_vector_function();
  bool include_residual = true;
  int jobs = 1;  // element assembly workers
};

struct SolveStats {
  double residual = 0.0;  // relative residual of the reduced system
  double energy = 0.0;    // 1/2 int grad u . C grad u
  int free_dofs = 0;
  double seconds = 0.0;
};

struct DisplacementField {
  std::shared_ptr<const MacroMesh> mesh;
  Eigen::VectorXd values;  // node-major, dim components per node
  SolveStats stats;

  Point value(int node) const;
  /// Q1 interpolation.
  Point evaluate(const Point& x) const;
  Tensor2 gradient(const Point& x) const;
};

struct ElementMaterial {
  Tensor4 elasticity;
  Tensor2 residual;
};

/// Assembles and solves with per-quadrature-point material; `material(e, q, x)`
/// returns the coefficients at quadrature point q of element e.
DisplacementField solve_macro(const MacroProblem& problem, int points_per_axis,
                              const std::function<ElementMaterial(int e, int q, const Point& x)>& material);

/// One law evaluation per element centroid. The law is consumed through its
/// Voigt components, so an exported and re-imported law gives identical results.
DisplacementField solve_homogenized(const MacroProblem& problem, const EffectiveLaw& law, int jobs = 1);

struct DirectOptions {
  int min_elements_per_period = 8;
  int points_per_axis = 2;
};

/// Throws InputError when fewer than min_elements_per_period elements span one
/// period eps in some direction.
DisplacementField solve_direct(const MacroProblem& problem, const MicroField& field, const DirectOptions& opts = {});
void check_resolution(const MacroProblem& problem, double eps, int min_elements_per_period);

struct ErrorNorms {
  double l2 = 0;
  double h1_semi = 0;
  double energy = 0;  // sqrt(int sym grad e . C sym grad e); C = 2 I_sym unless given
};

using TensorFunction4 = std::function<Tensor4(const Point&)>;

/// Norms of a - b by 3-point Gauss quadrature on the finer of the two meshes.
ErrorNorms error_norms(const DisplacementField& a, const DisplacementField& b, const TensorFunction4& C = nullptr);
/// Norms of a - f for an analytic field with gradient.
ErrorNorms error_norms(const DisplacementField& a, const VectorFunction& f,
                       const std::function<Tensor2(const Point&)>& grad_f, const TensorFunction4& C = nullptr);
/// ||u||_{L2} and |u|_{H1}.
ErrorNorms field_norms(const DisplacementField& u);

struct ConvergenceSetup {
  std::shared_ptr<const CellMaterial> material;
  LawPtr law;         // homogenized law
  FieldPtr H, K;
  Box domain;
  double r = 0.6;
  AnchorOptions anchors;
  VectorFunction boundary = zero_vector_function();
  VectorFunction body_force = constant_vector_function({1, 0, 0});
  int elements_per_period = 8;
  int homogenized_cells = 0;  // 0: homogenized solve on each direct mesh
  DirectOptions direct;
  double budget_seconds = 0;  // 0: unlimited
  int jobs = 1;
};

struct ConvergenceRow {
  double eps = 0;
  int cells = 0;
  double l2_error = 0;
  double h1_error = 0;
  double h1_norm = 0;  // |u^eps|_{H1}, for the boundedness band
  double runtime = 0;
  bool completed = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  bool monotone = false;      // strictly decreasing L2 errors over completed rows
  bool budget_exceeded = false;
  double final_ratio = 0;     // last / first L2 error
  double h1_band = 0;         // max / min direct H1 norm
  double homogenized_seconds = 0;
};

/// Direct solves along the eps ladder against homogenized solves. Rows
/// whose start would exceed the budget are left incomplete and flagged.
ConvergenceReport convergence_study(const ConvergenceSetup& setup, const std::vector<double>& eps_list);
/// Runtime-free table (eps, cells, l2_error, h1_error, h1_norm), full precision.
std::string convergence_csv(const ConvergenceReport& report);
/// eps, runtime in seconds.
std::string convergence_timing_csv(const ConvergenceReport& report);

DisplacementField read_displacement(const std::string& prefix);
void write_displacement(const DisplacementField& u, const std::string& prefix);

}  // namespace lph
