#pragma once

// Second- and fourth-order tensors in dimension 2 or 3.
//
// Storage is row-major in the natural index order:
//   Tensor2 (i,j)     -> i*n + j
//   Tensor4 (i,j,k,l) -> ((i*n + j)*n + k)*n + l
// which is also the order used by the JSON serialization.
//
// Symmetric tensors have a Mandel (norm-consistent) representation: the
// off-diagonal pairs carry a sqrt(2) weight, so A.B = mandel(A).mandel(B) and
// the eigenvalues of a fourth-order tensor restricted to Sym equal those of
// its Mandel matrix. Pair order is (11,22,12) in 2D and (11,22,33,23,13,12)
// in 3D.

#include <array>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lph {

using Point = std::array<double, 3>;

inline constexpr double kDefaultTol = 1e-12;

/// Number of independent components of a symmetric second-order tensor.
constexpr int sym_size(int n) { return n * (n + 1) / 2; }

/// Index pair (i,j) of Mandel component a.
std::array<int, 2> mandel_pair(int n, int a);

void check_dim(int n);

class Tensor2 {
 public:
  Tensor2() : Tensor2(2) {}
  explicit Tensor2(int n);

  static Tensor2 zero(int n) { return Tensor2(n); }
  static Tensor2 identity(int n);
  static Tensor2 diag(std::initializer_list<double> d);
  static Tensor2 from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor2 outer(int n, const Point& a, const Point& b);
  /// e_i (x) e_j.
  static Tensor2 unit(int n, int i, int j);
  /// Counter-clockwise rotation by theta in the (x1,x2) plane; in 3D about x3.
  static Tensor2 rotation(int n, double theta);
  /// 3D rotation about an arbitrary axis (Rodrigues' formula).
  static Tensor2 rotation_about(const Point& axis, double theta);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return c_[i * n_ + j]; }
  double& operator()(int i, int j) { return c_[i * n_ + j]; }
  const double* data() const { return c_.data(); }

  Tensor2 transpose() const;
  Tensor2 sym() const;
  Tensor2 skew() const;
  double trace() const;
  double det() const;
  /// Throws InputError when the tensor is numerically singular.
  Tensor2 inverse() const;
  /// Frobenius inner product A.B = tr(A^T B).
  double dot(const Tensor2& b) const;
  double norm() const;
  double max_abs() const;
  /// Ratio of extreme singular values; infinity for singular tensors.
  double condition_number() const;
  Point apply(const Point& x) const;

  bool is_symmetric(double tol = kDefaultTol) const;
  bool is_orthogonal(double tol = kDefaultTol) const;
  bool is_invertible(double tol = kDefaultTol) const;
  bool is_finite() const;

  Eigen::MatrixXd matrix() const;
  static Tensor2 from_matrix(const Eigen::MatrixXd& m);
  /// Mandel vector of sym(*this).
  Eigen::VectorXd mandel() const;
  static Tensor2 from_mandel(const Eigen::VectorXd& v, int n);
  /// Plain Voigt vector (11,22,12) / (11,22,33,23,13,12) of a symmetric tensor.
  Eigen::VectorXd voigt() const;

  Tensor2& operator+=(const Tensor2& b);
  Tensor2& operator-=(const Tensor2& b);
  Tensor2& operator*=(double s);

 private:
  int n_;
  std::array<double, 9> c_{};
};

Tensor2 operator+(Tensor2 a, const Tensor2& b);
Tensor2 operator-(Tensor2 a, const Tensor2& b);
Tensor2 operator-(Tensor2 a);
Tensor2 operator*(Tensor2 a, double s);
Tensor2 operator*(double s, Tensor2 a);
Tensor2 operator/(Tensor2 a, double s);
/// Matrix product.
Tensor2 operator*(const Tensor2& a, const Tensor2& b);

/// Orthonormal basis of Sym (Frobenius inner product): e_i(x)e_i and
/// (e_i(x)e_j + e_j(x)e_i)/sqrt(2), in Mandel order.
std::vector<Tensor2> sym_basis(int n);

class Tensor4 {
 public:
  Tensor4() : Tensor4(2) {}
  explicit Tensor4(int n);

  static Tensor4 zero(int n) { return Tensor4(n); }
  /// Identity on Lin: I[A] = A.
  static Tensor4 identity(int n);
  /// Symmetrizer: I_sym[A] = sym(A).
  static Tensor4 symmetrizer(int n);

  int dim() const { return n_; }
  double operator()(int i, int j, int k, int l) const { return c_[idx(i, j, k, l)]; }
  double& operator()(int i, int j, int k, int l) { return c_[idx(i, j, k, l)]; }
  const double* data() const { return c_.data(); }

  /// (T[E])_ij = T_ijkl E_kl.
  Tensor2 apply(const Tensor2& e) const;
  double norm() const;
  double max_abs() const;
  bool is_finite() const;

  bool has_minor_symmetry(double tol = kDefaultTol) const;
  bool has_major_symmetry(double tol = kDefaultTol) const;

  /// n^2 x n^2 matrix acting on row-major flattened Lin.
  Eigen::MatrixXd lin_matrix() const;
  /// Mandel matrix; meaningful for tensors with both minor symmetries.
  Eigen::MatrixXd mandel() const;
  /// Tensor with both minor symmetries built from a Mandel matrix.
  static Tensor4 from_mandel(const Eigen::MatrixXd& m, int n);
  /// Plain Voigt matrix C_IJ = C_ijkl (no weights).
  Eigen::MatrixXd voigt() const;
  static Tensor4 from_voigt(const Eigen::MatrixXd& m, int n);

  Tensor4& operator+=(const Tensor4& b);
  Tensor4& operator-=(const Tensor4& b);
  Tensor4& operator*=(double s);

 private:
  int idx(int i, int j, int k, int l) const { return ((i * n_ + j) * n_ + k) * n_ + l; }

  int n_;
  std::array<double, 81> c_{};
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(Tensor4 a, double s);
Tensor4 operator*(double s, Tensor4 a);

/// E -> A (T[A^T E A]) A^T.
Tensor4 apply_transform_elasticity(const Tensor4& t, const Tensor2& a);

/// Strain-free residual stress generator C -> S(C) of one material point.
using ResidualGenerator = std::function<Tensor2(const Tensor2& c)>;

/// S(C) = 1/2 C4[C - 1]; stress free at C = 1.
ResidualGenerator st_venant_generator(const Tensor4& c4);

/// A S(A^T A) A^T.
Tensor2 residual_pushforward(const ResidualGenerator& gen, const Tensor2& a);

struct SymmetryReport {
  bool minor = false;
  bool major = false;
  double max_violation = 0.0;
};

/// Exhaustive check over the canonical basis of Lin. The booleans compare
/// the largest defect against tol * max(1, max|T|).
SymmetryReport check_symmetries(const Tensor4& t, double tol = kDefaultTol);

/// Smallest eigenvalue of T restricted to Sym (Mandel eigensolve).
/// Throws InputError when T lacks minor or major symmetry.
double coercivity_constant(const Tensor4& t, double sym_tol = 1e-10);

/// Isotropic tensor lambda tr(E) 1 + 2 mu E; rejects non-coercive moduli.
Tensor4 make_isotropic(double lambda, double mu, int n);

/// Orthotropic stiffness in plain Voigt indices (4=23, 5=13, 6=12).
/// In 2D only c11, c22, c12, c66 are used.
struct OrthotropicConstants {
  double c11 = 0, c22 = 0, c33 = 0;
  double c12 = 0, c13 = 0, c23 = 0;
  double c44 = 0, c55 = 0, c66 = 0;
};

Tensor4 make_orthotropic(const OrthotropicConstants& k, int n);
/// apply_transform_elasticity(make_orthotropic(k), orientation).
Tensor4 make_rotated_orthotropic(const OrthotropicConstants& k, const Tensor2& orientation);

bool approx_equal(const Tensor2& a, const Tensor2& b, double tol);
bool approx_equal(const Tensor4& a, const Tensor4& b, double tol);
/// |a - b| / max(|b|, tiny) in the Frobenius norm.
double relative_difference(const Tensor4& a, const Tensor4& b);
double relative_difference(const Tensor2& a, const Tensor2& b);

void to_json(nlohmann::json& j, const Tensor2& t);
void from_json(const nlohmann::json& j, Tensor2& t);
void to_json(nlohmann::json& j, const Tensor4& t);
void from_json(const nlohmann::json& j, Tensor4& t);

/// Plain Voigt matrix as CSV, one row per line, full precision.
std::string voigt_csv(const Tensor4& t);

}  // namespace lph
