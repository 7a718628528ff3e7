#pragma once

// Unit-cell corrector problems on the periodic quotient space of Y.
//
// For a cell displacement w the effective gradient is
//   G(w) = H^{-T} grad w H^{-1},
// and every corrector problem is: find zero-mean periodic w with
//   a(w, v) = int_Y G(v) . S(C(y), K)[G(w)] dy = -int_Y G(v) . sigma dy
// for an element-wise constant prestress sigma. The problems differ only in
// sigma and in the (H, K) the operator is assembled for.

#include <atomic>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "lphom/cell_domain.hpp"
#include "lphom/tensor.hpp"

namespace lph {

struct SolverOptions {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 50000;
  int jobs = 0;              // <= 0: hardware concurrency
  double cache_quantum = 1e-12;
};

enum class CorrectorKind {
  Strain,     // w^E(H, K)
  Residual,   // w^0(H, K)
  Affine,     // w^0 + w^E
  Canonical,  // tilde w^E, H = K = 1
  ResidualK,  // w^0(K) of the H = K reduction
};

std::string to_string(CorrectorKind k);

struct CorrectorField {
  std::shared_ptr<const CellMesh> mesh;
  CorrectorKind kind = CorrectorKind::Strain;
  Tensor2 H, K, E;
  Eigen::VectorXd values;  // node-major, dim components per node
  int iterations = 0;
  double residual = 0.0;   // final true relative residual

  Point value(int node) const;
  /// int_Y w dy.
  Point mean() const;
  /// L2(Y) norm.
  double norm() const;
  double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
  /// Element average of grad_y w.
  Tensor2 element_gradient(int e) const;
};

/// The assembled bilinear form a(., .) for one (H, K) on the periodic DOFs.
class CellOperator {
 public:
  CellOperator(std::shared_ptr<const CellMaterial> material, const Tensor2& H, const Tensor2& K);

  const CellMaterial& material() const { return *material_; }
  const Tensor2& H() const { return H_; }
  const Tensor2& K() const { return K_; }
  const Eigen::SparseMatrix<double>& matrix() const { return A_; }
  const Eigen::VectorXd& diagonal() const { return diag_; }

  /// S(C_p, K) for phase p.
  const Tensor4& transformed_elasticity(int phase) const { return transformed_[phase]; }
  /// Element average of G(w) = H^{-T} grad w H^{-1}.
  Tensor2 effective_gradient(const Eigen::VectorXd& w, int e) const;
  /// Right-hand side -int G(v) . sigma for element-wise constant sigma.
  Eigen::VectorXd load(const std::vector<Tensor2>& sigma) const;
  /// Magnitude of the load before cancellation; loads far below it are roundoff.
  double load_scale(const std::vector<Tensor2>& sigma) const;
  /// a(w, w).
  double energy(const Eigen::VectorXd& w) const { return w.dot(A_ * w); }

 private:
  std::shared_ptr<const CellMaterial> material_;
  Tensor2 H_, K_, P_;  // P = H^{-T}
  std::vector<Tensor4> transformed_;
  Eigen::MatrixXd mean_b_;  // n^2 x (n * 2^n), element-average G per local DOF
  Eigen::SparseMatrix<double> A_;
  Eigen::VectorXd diag_;
};

/// Throws InputError for singular H or a non-coercive S(C, K).
std::shared_ptr<const CellOperator> assemble_cell_operator(std::shared_ptr<const CellMaterial> material,
                                                           const Tensor2& H, const Tensor2& K);

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;
};

/// Jacobi-preconditioned CG on the quotient space: the translation kernel is
/// projected out of every residual and of the result (zero nodal mean).
/// Throws SolverError when `tolerance` is not reached. A right-hand side whose
/// size is below 1e-13 * reference_scale is treated as zero.
CgResult projected_cg(const CellOperator& op, const Eigen::VectorXd& rhs, double tolerance, int max_iterations,
                      double reference_scale = 0.0);

/// Facade over one material: cached operators per quantized (H, K), the
/// corrector problems, and solve counters. Safe for concurrent use.
class CellSolver {
 public:
  explicit CellSolver(std::shared_ptr<const CellMaterial> material, SolverOptions options = {});

  const CellMaterial& material() const { return *material_; }
  const std::shared_ptr<const CellMaterial>& material_ptr() const { return material_; }
  const SolverOptions& options() const { return options_; }
  int dim() const { return material_->dim(); }

  std::shared_ptr<const CellOperator> cell_operator(const Tensor2& H, const Tensor2& K) const;

  /// div( H^{-1} S(C,K)[E + G(w)] H^{-T} ) = 0.
  CorrectorField solve_corrector_E(const Tensor2& H, const Tensor2& K, const Tensor2& E) const;
  /// div( H^{-1} (S_r(K, .) + S(C,K)[G(w)]) H^{-T} ) = 0.
  CorrectorField solve_corrector_residual(const Tensor2& H, const Tensor2& K) const;
  /// Both forcings at once; equals residual + strain corrector.
  CorrectorField solve_corrector_affine(const Tensor2& H, const Tensor2& K, const Tensor2& E) const;
  /// div( C[E + grad w] ) = 0 with H = K = 1. Counted.
  CorrectorField solve_corrector_canonical(const Tensor2& E) const;
  /// div( S(K^T K, .) + C grad w ) = 0.
  CorrectorField solve_residual_K(const Tensor2& K) const;

  /// Element-wise residual stress S_r(K, y_e).
  std::vector<Tensor2> residual_field(const Tensor2& K) const;

  std::size_t canonical_solves() const { return canonical_solves_.load(); }
  std::size_t total_solves() const { return total_solves_.load(); }
  std::size_t operator_builds() const { return operator_builds_.load(); }

 private:
  using Key = std::vector<long long>;
  Key key(const Tensor2& H, const Tensor2& K) const;
  CorrectorField solve(const CellOperator& op, const std::vector<Tensor2>& sigma, CorrectorKind kind,
                       const Tensor2& E) const;

  std::shared_ptr<const CellMaterial> material_;
  SolverOptions options_;
  mutable std::shared_mutex cache_mutex_;
  mutable std::map<Key, std::shared_ptr<const CellOperator>> cache_;
  mutable std::atomic<std::size_t> canonical_solves_{0};
  mutable std::atomic<std::size_t> total_solves_{0};
  mutable std::atomic<std::size_t> operator_builds_{0};
};

/// The two-scale corrector values H^{-T} w at the cell nodes.
Eigen::VectorXd two_scale_corrector(const CorrectorField& w);

/// JSON header `<prefix>.json` plus little-endian float64 payload `<prefix>.bin`.
void write_corrector(const CorrectorField& w, const std::string& prefix);
CorrectorField read_corrector(const std::string& prefix);

/// Per-element CSV: element, centroid, Voigt components of sym(E + G(w)).
void write_strain_csv(const CorrectorField& w, const CellOperator& op, const std::string& path);

}  // namespace lph
