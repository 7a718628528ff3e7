#pragma once

#include <random>

#include "lphom/tensor.hpp"

namespace lph::test {

inline Tensor2 random_tensor2(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j) = u(rng);
  return t;
}

inline Tensor2 random_symmetric(int n, std::mt19937_64& rng) { return random_tensor2(n, rng).sym(); }

/// Identity plus a random perturbation, redrawn until cond <= max_cond.
inline Tensor2 random_invertible(int n, std::mt19937_64& rng, double max_cond = 10.0, double amp = 0.4) {
  while (true) {
    Tensor2 t = Tensor2::identity(n) + amp * random_tensor2(n, rng);
    if (t.det() > 0.05 && t.condition_number() <= max_cond) return t;
  }
}

/// Random tensor with both minor and major symmetry that is positive definite on Sym.
inline Tensor4 random_elasticity(int n, std::mt19937_64& rng) {
  const int m = sym_size(n);
  Eigen::MatrixXd a(m, m);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = u(rng);
  const Eigen::MatrixXd s = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(m, m);
  return Tensor4::from_mandel(s, n);
}

}  // namespace lph::test
