#include "lphom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lphom/error.hpp"

namespace lph {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

constexpr std::array<std::array<int, 2>, 3> kPairs2{{{0, 0}, {1, 1}, {0, 1}}};
constexpr std::array<std::array<int, 2>, 6> kPairs3{{{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

double mandel_weight(int n, int a) { return a < n ? 1.0 : kSqrt2; }

}  // namespace

void check_dim(int n) {
  if (n != 2 && n != 3) throw InputError("tensor dimension must be 2 or 3, got " + std::to_string(n));
}

std::array<int, 2> mandel_pair(int n, int a) { return n == 2 ? kPairs2[a] : kPairs3[a]; }

// ---------------------------------------------------------------------------
// Tensor2

Tensor2::Tensor2(int n) : n_(n) { check_dim(n); }

Tensor2 Tensor2::identity(int n) {
  Tensor2 t(n);
  for (int i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor2 Tensor2::diag(std::initializer_list<double> d) {
  Tensor2 t(static_cast<int>(d.size()));
  int i = 0;
  for (double v : d) t(i, i) = v, ++i;
  return t;
}

Tensor2 Tensor2::from_rows(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  Tensor2 t(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) throw InputError("Tensor2::from_rows: ragged rows");
    for (int j = 0; j < n; ++j) t(i, j) = rows[i][j];
  }
  return t;
}

Tensor2 Tensor2::outer(int n, const Point& a, const Point& b) {
  Tensor2 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j) = a[i] * b[j];
  return t;
}

Tensor2 Tensor2::unit(int n, int i, int j) {
  Tensor2 t(n);
  t(i, j) = 1.0;
  return t;
}

Tensor2 Tensor2::rotation(int n, double theta) {
  Tensor2 t = identity(n);
  const double c = std::cos(theta), s = std::sin(theta);
  t(0, 0) = c;
  t(0, 1) = -s;
  t(1, 0) = s;
  t(1, 1) = c;
  return t;
}

Tensor2 Tensor2::rotation_about(const Point& axis, double theta) {
  const double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (!(len > 0)) throw InputError("rotation_about: zero axis");
  const Point u{axis[0] / len, axis[1] / len, axis[2] / len};
  const double c = std::cos(theta), s = std::sin(theta);
  Tensor2 w(3);
  w(0, 1) = -u[2], w(0, 2) = u[1];
  w(1, 0) = u[2], w(1, 2) = -u[0];
  w(2, 0) = -u[1], w(2, 1) = u[0];
  return identity(3) * c + w * s + outer(3, u, u) * (1.0 - c);
}

Tensor2 Tensor2::transpose() const {
  Tensor2 t(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) t(i, j) = (*this)(j, i);
  return t;
}

Tensor2 Tensor2::sym() const { return (*this + transpose()) * 0.5; }
Tensor2 Tensor2::skew() const { return (*this - transpose()) * 0.5; }

double Tensor2::trace() const {
  double s = 0;
  for (int i = 0; i < n_; ++i) s += (*this)(i, i);
  return s;
}

double Tensor2::det() const {
  const auto& a = *this;
  if (n_ == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Tensor2 Tensor2::inverse() const {
  if (!is_invertible()) throw InputError("Tensor2::inverse: singular tensor");
  const auto& a = *this;
  const double d = det();
  Tensor2 r(n_);
  if (n_ == 2) {
    r(0, 0) = a(1, 1) / d;
    r(0, 1) = -a(0, 1) / d;
    r(1, 0) = -a(1, 0) / d;
    r(1, 1) = a(0, 0) / d;
    return r;
  }
  r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / d;
  r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / d;
  r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / d;
  r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / d;
  r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / d;
  r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / d;
  r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / d;
  r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / d;
  r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / d;
  return r;
}

double Tensor2::dot(const Tensor2& b) const {
  if (b.n_ != n_) throw InputError("Tensor2::dot: dimension mismatch");
  double s = 0;
  for (int i = 0; i < n_ * n_; ++i) s += c_[i] * b.c_[i];
  return s;
}

double Tensor2::norm() const { return std::sqrt(dot(*this)); }

double Tensor2::max_abs() const {
  double m = 0;
  for (int i = 0; i < n_ * n_; ++i) m = std::max(m, std::abs(c_[i]));
  return m;
}

double Tensor2::condition_number() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix());
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

Point Tensor2::apply(const Point& x) const {
  Point y{0, 0, 0};
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) y[i] += (*this)(i, j) * x[j];
  return y;
}

bool Tensor2::is_symmetric(double tol) const {
  const double scale = std::max(1.0, max_abs());
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol * scale) return false;
  return true;
}

bool Tensor2::is_orthogonal(double tol) const {
  const Tensor2 d = transpose() * (*this) - identity(n_);
  return d.max_abs() <= tol;
}

bool Tensor2::is_invertible(double tol) const {
  if (!is_finite()) return false;
  const double scale = max_abs();
  if (scale == 0.0) return false;
  return std::abs(det()) > tol * std::pow(scale, n_);
}

bool Tensor2::is_finite() const {
  for (int i = 0; i < n_ * n_; ++i)
    if (!std::isfinite(c_[i])) return false;
  return true;
}

Eigen::MatrixXd Tensor2::matrix() const {
  Eigen::MatrixXd m(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

Tensor2 Tensor2::from_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InputError("Tensor2::from_matrix: not square");
  Tensor2 t(static_cast<int>(m.rows()));
  for (int i = 0; i < t.n_; ++i)
    for (int j = 0; j < t.n_; ++j) t(i, j) = m(i, j);
  return t;
}

Eigen::VectorXd Tensor2::mandel() const {
  const int s = sym_size(n_);
  Eigen::VectorXd v(s);
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n_, a);
    v(a) = mandel_weight(n_, a) * 0.5 * ((*this)(i, j) + (*this)(j, i));
  }
  return v;
}

Tensor2 Tensor2::from_mandel(const Eigen::VectorXd& v, int n) {
  Tensor2 t(n);
  if (v.size() != sym_size(n)) throw InputError("Tensor2::from_mandel: size mismatch");
  for (int a = 0; a < v.size(); ++a) {
    const auto [i, j] = mandel_pair(n, a);
    t(i, j) = t(j, i) = v(a) / mandel_weight(n, a);
  }
  return t;
}

Eigen::VectorXd Tensor2::voigt() const {
  const int s = sym_size(n_);
  Eigen::VectorXd v(s);
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n_, a);
    v(a) = (*this)(i, j);
  }
  return v;
}

Tensor2& Tensor2::operator+=(const Tensor2& b) {
  if (b.n_ != n_) throw InputError("Tensor2: dimension mismatch");
  for (int i = 0; i < n_ * n_; ++i) c_[i] += b.c_[i];
  return *this;
}

Tensor2& Tensor2::operator-=(const Tensor2& b) {
  if (b.n_ != n_) throw InputError("Tensor2: dimension mismatch");
  for (int i = 0; i < n_ * n_; ++i) c_[i] -= b.c_[i];
  return *this;
}

Tensor2& Tensor2::operator*=(double s) {
  for (int i = 0; i < n_ * n_; ++i) c_[i] *= s;
  return *this;
}

Tensor2 operator+(Tensor2 a, const Tensor2& b) { return a += b; }
Tensor2 operator-(Tensor2 a, const Tensor2& b) { return a -= b; }
Tensor2 operator-(Tensor2 a) { return a *= -1.0; }
Tensor2 operator*(Tensor2 a, double s) { return a *= s; }
Tensor2 operator*(double s, Tensor2 a) { return a *= s; }
Tensor2 operator/(Tensor2 a, double s) { return a *= 1.0 / s; }

Tensor2 operator*(const Tensor2& a, const Tensor2& b) {
  const int n = a.dim();
  if (b.dim() != n) throw InputError("Tensor2 product: dimension mismatch");
  Tensor2 r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

std::vector<Tensor2> sym_basis(int n) {
  check_dim(n);
  std::vector<Tensor2> basis;
  for (int a = 0; a < sym_size(n); ++a) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(sym_size(n));
    v(a) = 1.0;
    basis.push_back(Tensor2::from_mandel(v, n));
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Tensor4

Tensor4::Tensor4(int n) : n_(n) { check_dim(n); }

Tensor4 Tensor4::identity(int n) {
  Tensor4 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(i, j, i, j) = 1.0;
  return t;
}

Tensor4 Tensor4::symmetrizer(int n) {
  Tensor4 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t(i, j, i, j) += 0.5;
      t(i, j, j, i) += 0.5;
    }
  return t;
}

Tensor2 Tensor4::apply(const Tensor2& e) const {
  if (e.dim() != n_) throw InputError("Tensor4::apply: dimension mismatch");
  Tensor2 r(n_);
  const int nn = n_ * n_;
  const double* ed = e.data();
  for (int ij = 0; ij < nn; ++ij) {
    double s = 0;
    for (int kl = 0; kl < nn; ++kl) s += c_[ij * nn + kl] * ed[kl];
    r(ij / n_, ij % n_) = s;
  }
  return r;
}

double Tensor4::norm() const {
  double s = 0;
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i) s += c_[i] * c_[i];
  return std::sqrt(s);
}

double Tensor4::max_abs() const {
  double m = 0;
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i) m = std::max(m, std::abs(c_[i]));
  return m;
}

bool Tensor4::is_finite() const {
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i)
    if (!std::isfinite(c_[i])) return false;
  return true;
}

bool Tensor4::has_minor_symmetry(double tol) const { return check_symmetries(*this, tol).minor; }
bool Tensor4::has_major_symmetry(double tol) const { return check_symmetries(*this, tol).major; }

Eigen::MatrixXd Tensor4::lin_matrix() const {
  const int nn = n_ * n_;
  Eigen::MatrixXd m(nn, nn);
  for (int a = 0; a < nn; ++a)
    for (int b = 0; b < nn; ++b) m(a, b) = c_[a * nn + b];
  return m;
}

Eigen::MatrixXd Tensor4::mandel() const {
  const int s = sym_size(n_);
  Eigen::MatrixXd m(s, s);
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n_, a);
    for (int b = 0; b < s; ++b) {
      const auto [k, l] = mandel_pair(n_, b);
      const double avg =
          0.25 * ((*this)(i, j, k, l) + (*this)(j, i, k, l) + (*this)(i, j, l, k) + (*this)(j, i, l, k));
      m(a, b) = mandel_weight(n_, a) * mandel_weight(n_, b) * avg;
    }
  }
  return m;
}

Tensor4 Tensor4::from_mandel(const Eigen::MatrixXd& m, int n) {
  Tensor4 t(n);
  const int s = sym_size(n);
  if (m.rows() != s || m.cols() != s) throw InputError("Tensor4::from_mandel: size mismatch");
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n, a);
    for (int b = 0; b < s; ++b) {
      const auto [k, l] = mandel_pair(n, b);
      const double v = m(a, b) / (mandel_weight(n, a) * mandel_weight(n, b));
      t(i, j, k, l) = t(j, i, k, l) = t(i, j, l, k) = t(j, i, l, k) = v;
    }
  }
  return t;
}

Eigen::MatrixXd Tensor4::voigt() const {
  const int s = sym_size(n_);
  Eigen::MatrixXd m(s, s);
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n_, a);
    for (int b = 0; b < s; ++b) {
      const auto [k, l] = mandel_pair(n_, b);
      m(a, b) = (*this)(i, j, k, l);
    }
  }
  return m;
}

Tensor4 Tensor4::from_voigt(const Eigen::MatrixXd& m, int n) {
  Tensor4 t(n);
  const int s = sym_size(n);
  if (m.rows() != s || m.cols() != s) throw InputError("Tensor4::from_voigt: size mismatch");
  for (int a = 0; a < s; ++a) {
    const auto [i, j] = mandel_pair(n, a);
    for (int b = 0; b < s; ++b) {
      const auto [k, l] = mandel_pair(n, b);
      t(i, j, k, l) = t(j, i, k, l) = t(i, j, l, k) = t(j, i, l, k) = m(a, b);
    }
  }
  return t;
}

Tensor4& Tensor4::operator+=(const Tensor4& b) {
  if (b.n_ != n_) throw InputError("Tensor4: dimension mismatch");
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i) c_[i] += b.c_[i];
  return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& b) {
  if (b.n_ != n_) throw InputError("Tensor4: dimension mismatch");
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i) c_[i] -= b.c_[i];
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (int i = 0; i < n_ * n_ * n_ * n_; ++i) c_[i] *= s;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
Tensor4 operator*(Tensor4 a, double s) { return a *= s; }
Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

// ---------------------------------------------------------------------------

Tensor4 apply_transform_elasticity(const Tensor4& t, const Tensor2& a) {
  const int n = t.dim();
  if (a.dim() != n) throw InputError("apply_transform_elasticity: dimension mismatch");
  // R_ijkl = A_ip A_jq A_kr A_ls T_pqrs, one index at a time.
  Tensor4 cur = t;
  for (int slot = 0; slot < 4; ++slot) {
    Tensor4 next(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            std::array<int, 4> ix{i, j, k, l};
            double s = 0;
            for (int p = 0; p < n; ++p) {
              std::array<int, 4> src = ix;
              src[slot] = p;
              s += a(ix[slot], p) * cur(src[0], src[1], src[2], src[3]);
            }
            next(i, j, k, l) = s;
          }
    cur = next;
  }
  return cur;
}

ResidualGenerator st_venant_generator(const Tensor4& c4) {
  return [c4](const Tensor2& c) { return c4.apply(c - Tensor2::identity(c.dim())) * 0.5; };
}

Tensor2 residual_pushforward(const ResidualGenerator& gen, const Tensor2& a) {
  const Tensor2 s = gen(a.transpose() * a);
  if (s.dim() != a.dim()) throw InputError("residual_pushforward: dimension mismatch");
  return a * s * a.transpose();
}

SymmetryReport check_symmetries(const Tensor4& t, double tol) {
  const int n = t.dim();
  double minor = 0, major = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          minor = std::max(minor, std::abs(t(i, j, k, l) - t(j, i, k, l)));
          minor = std::max(minor, std::abs(t(i, j, k, l) - t(i, j, l, k)));
          major = std::max(major, std::abs(t(i, j, k, l) - t(k, l, i, j)));
        }
  const double scale = std::max(1.0, t.max_abs());
  return {minor <= tol * scale, major <= tol * scale, std::max(minor, major)};
}

double coercivity_constant(const Tensor4& t, double sym_tol) {
  const auto rep = check_symmetries(t, sym_tol);
  if (!rep.minor || !rep.major)
    throw InputError("coercivity_constant: tensor lacks minor/major symmetry (defect " +
                     std::to_string(rep.max_violation) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.mandel(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Tensor4 make_isotropic(double lambda, double mu, int n) {
  check_dim(n);
  if (!(mu > 0) || !(n * lambda + 2 * mu > 0))
    throw InputError("make_isotropic: need mu > 0 and n*lambda + 2*mu > 0");
  Tensor4 t = Tensor4::symmetrizer(n) * (2 * mu);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) t(i, i, k, k) += lambda;
  return t;
}

Tensor4 make_orthotropic(const OrthotropicConstants& k, int n) {
  check_dim(n);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(sym_size(n), sym_size(n));
  if (n == 2) {
    v << k.c11, k.c12, 0, k.c12, k.c22, 0, 0, 0, k.c66;
  } else {
    v(0, 0) = k.c11, v(1, 1) = k.c22, v(2, 2) = k.c33;
    v(0, 1) = v(1, 0) = k.c12;
    v(0, 2) = v(2, 0) = k.c13;
    v(1, 2) = v(2, 1) = k.c23;
    v(3, 3) = k.c44, v(4, 4) = k.c55, v(5, 5) = k.c66;
  }
  Tensor4 t = Tensor4::from_voigt(v, n);
  if (!(coercivity_constant(t) > 0)) throw InputError("make_orthotropic: constants are not coercive");
  return t;
}

Tensor4 make_rotated_orthotropic(const OrthotropicConstants& k, const Tensor2& orientation) {
  return apply_transform_elasticity(make_orthotropic(k, orientation.dim()), orientation);
}

bool approx_equal(const Tensor2& a, const Tensor2& b, double tol) {
  return a.dim() == b.dim() && (a - b).max_abs() <= tol;
}

bool approx_equal(const Tensor4& a, const Tensor4& b, double tol) {
  return a.dim() == b.dim() && (a - b).max_abs() <= tol;
}

double relative_difference(const Tensor4& a, const Tensor4& b) {
  return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

double relative_difference(const Tensor2& a, const Tensor2& b) {
  return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

void to_json(nlohmann::json& j, const Tensor2& t) {
  const int n = t.dim();
  j = nlohmann::json{{"order", 2}, {"dim", n}, {"components", std::vector<double>(t.data(), t.data() + n * n)}};
}

void from_json(const nlohmann::json& j, Tensor2& t) {
  const int n = j.at("dim").get<int>();
  const auto c = j.at("components").get<std::vector<double>>();
  if (j.value("order", 2) != 2 || static_cast<int>(c.size()) != n * n) throw InputError("Tensor2 JSON: bad shape");
  t = Tensor2(n);
  for (int i = 0; i < n * n; ++i) t(i / n, i % n) = c[i];
}

void to_json(nlohmann::json& j, const Tensor4& t) {
  const int n = t.dim();
  j = nlohmann::json{{"order", 4}, {"dim", n}, {"components", std::vector<double>(t.data(), t.data() + n * n * n * n)}};
}

void from_json(const nlohmann::json& j, Tensor4& t) {
  const int n = j.at("dim").get<int>();
  const auto c = j.at("components").get<std::vector<double>>();
  if (j.value("order", 4) != 4 || static_cast<int>(c.size()) != n * n * n * n) throw InputError("Tensor4 JSON: bad shape");
  t = Tensor4(n);
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) t(i, jj, k, l) = c[idx++];
}

std::string voigt_csv(const Tensor4& t) {
  const Eigen::MatrixXd v = t.voigt();
  std::ostringstream os;
  char buf[32];
  for (int a = 0; a < v.rows(); ++a) {
    for (int b = 0; b < v.cols(); ++b) {
      std::snprintf(buf, sizeof buf, "%.17g", v(a, b));
      os << (b ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace lph
