#pragma once

// Locally periodic coefficient fields at scale eps.
//
// The domain is tiled by patches Omega_k = (0, s)^n + s k with s = eps^r.
// Inside patch k the microstructure is eps H_k(Y)-periodic around the shift
// anchor xt_k, and its anisotropy is that of the slow anchor x_k:
//   y(x)     = H_{x_k}^{-1} (x - xt_k) / eps
//   C^eps(x) = S(C(y(x)), K_{x_k}),   S_r^eps(x) = S_r(K_{x_k}, y(x)).

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lphom/cell_domain.hpp"
#include "lphom/fields.hpp"

namespace lph {

enum class AnchorRule {
  Center,          // x_k = xt_k = patch center
  Offset,          // x_k = xt_k = lo + offset * s, offset in [0,1]^n
  LatticeAligned,  // x_k = center, xt_k snapped to the lattice of x -> L_x^{-1} x / eps
  Custom,
};

struct Patch {
  std::array<int, 3> k{0, 0, 0};
  Point lo{0, 0, 0}, hi{0, 0, 0};
  Point anchor{0, 0, 0};  // x_k
  Point shift{0, 0, 0};   // xt_k
  Tensor2 H, H_inv;       // at x_k
};

struct AnchorOptions {
  AnchorRule rule = AnchorRule::Center;
  Point offset{0.5, 0.5, 0.5};
  FieldPtr L;  // LatticeAligned
  std::function<std::pair<Point, Point>(const Patch&)> custom;  // returns (x_k, xt_k)
};

class PatchDecomposition {
 public:
  PatchDecomposition(const Box& domain, double eps, double r, FieldPtr H, const AnchorOptions& anchors);

  const Box& domain() const { return domain_; }
  int dim() const { return domain_.dim; }
  double eps() const { return eps_; }
  double r() const { return r_; }
  double patch_size() const { return size_; }
  const std::array<int, 3>& k_min() const { return kmin_; }
  const std::array<int, 3>& k_max() const { return kmax_; }
  const std::vector<Patch>& patches() const { return patches_; }
  const FieldPtr& H() const { return H_; }

  /// Patch with lo <= x < hi; points on the upper domain face go to the last
  /// patch. Throws InputError outside every patch.
  int patch_index(const Point& x) const;
  const Patch& patch_at(const Point& x) const { return patches_[patch_index(x)]; }
  /// Cell variable y(x) = H_k^{-1} (x - xt_k) / eps of the patch containing x.
  Point cell_point(const Point& x) const;

 private:
  Box domain_;
  double eps_, r_, size_;
  FieldPtr H_;
  std::array<int, 3> kmin_{0, 0, 0}, kmax_{0, 0, 0};
  std::array<int, 3> counts_{1, 1, 1};
  std::vector<Patch> patches_;
};

/// Throws InputError unless 0 < eps < 1, 0 < r < 1, eps^r > eps and the
/// anchors lie in their patches.
std::shared_ptr<const PatchDecomposition> decompose(const Box& domain, double eps, double r, FieldPtr H,
                                                    const AnchorOptions& anchors = {});

enum class ApproxVariant {
  Full,    // L^eps: psi(x, y(x))
  Frozen,  // L^eps_0: psi(x_k, y(x))
};

/// Locally periodic approximation of psi(x, y), y the canonical cell variable.
template <class T>
std::function<T(const Point&)> approx_field(std::function<T(const Point&, const Point&)> psi,
                                            std::shared_ptr<const PatchDecomposition> dec, ApproxVariant variant) {
  return [psi = std::move(psi), dec = std::move(dec), variant](const Point& x) {
    const Patch& p = dec->patch_at(x);
    const Point y = dec->cell_point(x);
    return psi(variant == ApproxVariant::Full ? x : p.anchor, y);
  };
}

struct MicroSample {
  Tensor4 elasticity;
  Tensor2 residual;
  int phase = 0;
  int patch = 0;
  Point y{0, 0, 0};
};

/// C^eps and S_r^eps of a cell material for given K over a decomposition.
class MicroField {
 public:
  MicroField(std::shared_ptr<const CellMaterial> material, FieldPtr K, std::shared_ptr<const PatchDecomposition> dec);

  int dim() const { return dec_->dim(); }
  double eps() const { return dec_->eps(); }
  const PatchDecomposition& decomposition() const { return *dec_; }
  const CellMaterial& material() const { return *material_; }

  MicroSample sample(const Point& x) const;
  Tensor4 elasticity(const Point& x) const { return sample(x).elasticity; }
  Tensor2 residual(const Point& x) const { return sample(x).residual; }
  /// Largest phase stiffness over all patches.
  double max_stiffness() const { return max_stiffness_; }

 private:
  std::shared_ptr<const CellMaterial> material_;
  FieldPtr K_;
  std::shared_ptr<const PatchDecomposition> dec_;
  // [patch * phases + phase]
  std::vector<Tensor4> elasticity_;
  std::vector<Tensor2> residual_;
  double max_stiffness_ = 0;
};

std::shared_ptr<const MicroField> synth_microstructure(std::shared_ptr<const CellMaterial> material, FieldPtr K,
                                                       std::shared_ptr<const PatchDecomposition> dec);

/// dL/dx_k at x.
using LGradient = std::function<Tensor2(const Point& x, int k)>;

/// H_x = (grad g(x))^{-1} with g(x) = L_x^{-1} x, by central differences with
/// step `step * max(1, |x_k|)`. Throws InputError for a numerically singular
/// Jacobian (condition number above 1e12).
Tensor2 derive_H_from_L(const TransformField& L, const Point& x, double step = 1e-5);
/// Same with an analytic gradient of L.
Tensor2 derive_H_from_L(const TransformField& L, const LGradient& dL, const Point& x);
/// Condition number of grad g(x); large values flag a locally non-invertible lattice map.
double lattice_jacobian_condition(const TransformField& L, const Point& x, double step = 1e-5);

/// Reference microstructure C_np(x) = S(C(L_x^{-1} x / eps), M_x) and
/// S_r,np(x) = S_r(M_x, L_x^{-1} x / eps).
class NonperiodicField {
 public:
  NonperiodicField(std::shared_ptr<const CellMaterial> material, FieldPtr L, FieldPtr M, double eps);
  MicroSample sample(const Point& x) const;
  double eps() const { return eps_; }

 private:
  std::shared_ptr<const CellMaterial> material_;
  FieldPtr L_, M_;
  double eps_;
};

struct FieldDifference {
  double elasticity_l2 = 0;  // ||C^eps - C_np||_{L2}
  double residual_l2 = 0;    // ||S_r^eps - S_r,np||_{L2}
  double mismatch_fraction = 0;  // share of samples in different phases
};

/// Midpoint rule on per_axis^n cells of the box.
FieldDifference field_l2_difference(const MicroField& a, const NonperiodicField& b, const Box& box, int per_axis);

/// Regular voxel samples of C^eps and S_r^eps at cell centers: JSON header
/// plus float64 payload, per voxel the Voigt matrix row-major then the Voigt vector.
void write_micro_voxels(const MicroField& field, const Box& box, const std::array<int, 3>& counts,
                        const std::string& prefix);

}  // namespace lph
