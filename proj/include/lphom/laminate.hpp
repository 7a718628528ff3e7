#pragma once

// Closed-form solution of the cell problem for a layered medium.
//
// In layer p the corrector gradient is d_p (x) n, so the strain is
// E + sym(d_p (x) n) and the stress sigma_p = S_p[E + sym(d_p (x) n)] + tau_p.
// Traction continuity sigma_p n = t for every p together with the
// periodicity constraint sum_p f_p d_p = 0 gives
//   A_p d_p = t - S_p[E] n - tau_p n,   (A_p)_ik = S_p,ijkl n_j n_l,
//   t = <A^{-1}>^{-1} <A^{-1} (S[E] n + tau n)>.
// The method needs no mesh and is used as an oracle for the FEM path.

#include <vector>

#include "lphom/tensor.hpp"

namespace lph {

struct LaminateLayer {
  Tensor4 elasticity;
  Tensor2 residual;  // prestress tau_p, zero for a pure strain problem
  double fraction = 0.0;
};

struct LaminateResponse {
  Tensor2 mean_stress;
  Point traction{0, 0, 0};  // t
  std::vector<Point> jumps;  // d_p
};

/// Response to a macroscopic strain E for layers with normal n (any length;
/// the gradient is d_p (x) n).
LaminateResponse laminate_response(const std::vector<LaminateLayer>& layers, const Point& normal, const Tensor2& E);

/// Effective elasticity of the layered medium.
Tensor4 laminate_elasticity(const std::vector<LaminateLayer>& layers, const Point& normal);
/// Effective residual stress: mean stress at E = 0.
Tensor2 laminate_residual(const std::vector<LaminateLayer>& layers, const Point& normal);

/// Axis-normal modulus <1 / (lambda + 2 mu)>^{-1} of an isotropic laminate.
double isotropic_laminate_normal_modulus(const std::vector<double>& lambda, const std::vector<double>& mu,
                                         const std::vector<double>& fractions);

/// Profile of the periodic corrector along s = n . y for a two-layer cell
/// with layer 1 on [start, start + fraction_1) mod 1: returns u(s) with u = 0
/// at s = start. Slopes are the jumps of laminate_response.
Point two_layer_profile(const LaminateResponse& r, double start, double fraction1, double s);

}  // namespace lph
