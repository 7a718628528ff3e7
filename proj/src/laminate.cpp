#include "lphom/laminate.hpp"

#include <cmath>

#include "lphom/error.hpp"

namespace lph {

namespace {

Eigen::MatrixXd acoustic(const Tensor4& s, const Point& n, int dim) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int k = 0; k < dim; ++k)
      for (int j = 0; j < dim; ++j)
        for (int l = 0; l < dim; ++l) a(i, k) += s(i, j, k, l) * n[j] * n[l];
  return a;
}

Eigen::VectorXd times_normal(const Tensor2& t, const Point& n) {
  const int dim = t.dim();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) v[i] += t(i, j) * n[j];
  return v;
}

}  // namespace

LaminateResponse laminate_response(const std::vector<LaminateLayer>& layers, const Point& normal, const Tensor2& E) {
  if (layers.empty()) throw InputError("laminate: no layers");
  const int dim = E.dim();
  double total = 0;
  for (const auto& l : layers) {
    if (l.elasticity.dim() != dim || l.residual.dim() != dim) throw InputError("laminate: dimension mismatch");
    if (!(l.fraction > 0)) throw InputError("laminate: fractions must be positive");
    total += l.fraction;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("laminate: fractions must sum to one");

  std::vector<Eigen::MatrixXd> inv;
  std::vector<Eigen::VectorXd> b;
  Eigen::MatrixXd mean_inv = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd mean_inv_b = Eigen::VectorXd::Zero(dim);
  for (const auto& l : layers) {
    const Eigen::MatrixXd a = acoustic(l.elasticity, normal, dim);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) throw InputError("laminate: singular acoustic tensor");
    inv.push_back(lu.inverse());
    b.push_back(times_normal(l.elasticity.apply(E) + l.residual, normal));
    mean_inv += l.fraction * inv.back();
    mean_inv_b += l.fraction * inv.back() * b.back();
  }
  const Eigen::VectorXd t = mean_inv.fullPivLu().solve(mean_inv_b);

  LaminateResponse r;
  r.mean_stress = Tensor2(dim);
  for (int i = 0; i < dim; ++i) r.traction[i] = t[i];
  for (std::size_t p = 0; p < layers.size(); ++p) {
    const Eigen::VectorXd d = inv[p] * (t - b[p]);
    Point dp{0, 0, 0};
    for (int i = 0; i < dim; ++i) dp[i] = d[i];
    r.jumps.push_back(dp);
    const Tensor2 strain = E + Tensor2::outer(dim, dp, normal).sym();
    r.mean_stress += layers[p].fraction * (layers[p].elasticity.apply(strain) + layers[p].residual);
  }
  return r;
}

Tensor4 laminate_elasticity(const std::vector<LaminateLayer>& layers, const Point& normal) {
  const int dim = layers.at(0).elasticity.dim();
  std::vector<LaminateLayer> strain_only = layers;
  for (auto& l : strain_only) l.residual = Tensor2::zero(dim);
  Tensor4 c(dim);
  for (int k = 0; k < dim; ++k)
    for (int l = 0; l < dim; ++l) {
      // Response to the symmetric unit strain; columns (k,l) and (l,k) share it.
      const Tensor2 e = Tensor2::unit(dim, k, l).sym();
      const Tensor2 s = laminate_response(strain_only, normal, e).mean_stress;
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) c(i, j, k, l) = s(i, j);
    }
  return c;
}

Tensor2 laminate_residual(const std::vector<LaminateLayer>& layers, const Point& normal) {
  const int dim = layers.at(0).elasticity.dim();
  return laminate_response(layers, normal, Tensor2::zero(dim)).mean_stress;
}

double isotropic_laminate_normal_modulus(const std::vector<double>& lambda, const std::vector<double>& mu,
                                         const std::vector<double>& fractions) {
  if (lambda.size() != mu.size() || mu.size() != fractions.size() || mu.empty())
    throw InputError("laminate: parameter lists differ in length");
  double s = 0;
  for (std::size_t p = 0; p < mu.size(); ++p) s += fractions[p] / (lambda[p] + 2 * mu[p]);
  return 1.0 / s;
}

Point two_layer_profile(const LaminateResponse& r, double start, double fraction1, double s) {
  if (r.jumps.size() != 2) throw InputError("two_layer_profile: exactly two layers required");
  double t = s - start;
  t -= std::floor(t);
  Point u{0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    if (t < fraction1)
      u[i] = r.jumps[1][i] * t;
    else
      u[i] = r.jumps[1][i] * fraction1 + r.jumps[0][i] * (t - fraction1);
  }
  return u;
}

}  // namespace lph
