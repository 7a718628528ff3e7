#pragma once

// The macroscopic constitutive law T_hom(E, x) = S_r,hom(x) + C_hom(x) E:
// cell averages of corrected stresses, the H = K shortcut through canonical
// correctors, and evaluation strategies over the macroscopic domain.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "lphom/cell_solver.hpp"
#include "lphom/fields.hpp"

namespace lph {

/// C_hom(H, K): one strain corrector per orthonormal basis strain of Sym, then
/// C_hom E_a = <S(C, K)[E_a + G(w^{E_a})]>.
Tensor4 effective_elasticity_at(const CellSolver& solver, const Tensor2& H, const Tensor2& K);

struct ResidualBreakdown {
  Tensor2 total;      // S_r,hom
  Tensor2 average;    // <S_r(K, .)>
  Tensor2 corrector;  // <S(C, K)[G(w^0)]>
};

ResidualBreakdown effective_residual_breakdown(const CellSolver& solver, const Tensor2& H, const Tensor2& K);
Tensor2 effective_residual_at(const CellSolver& solver, const Tensor2& H, const Tensor2& K);

/// C_hom of the untransformed cell from the n(n+1)/2 canonical correctors.
Tensor4 canonical_effective_elasticity(const CellSolver& solver);
/// S_r,hom at H = K: K <S(K^T K, .) + C grad w^0(K, .)> K^T.
Tensor2 effective_residual_HK(const CellSolver& solver, const Tensor2& K);

/// E -> M C[M^T E M] M^T. Throws InputError for singular M.
Tensor4 pushforward_effective(const Tensor4& base, const Tensor2& M);
/// Transport from a point with anisotropy K_from to one with K_to:
/// C_hom(to) = pushforward_effective(C_hom(from), K_to K_from^{-1}).
Tensor2 uniformity_map(const Tensor2& K_from, const Tensor2& K_to);

struct EffectiveRecord {
  Point x{0, 0, 0};
  Tensor2 H, K;
  Tensor2 residual;    // S_r,hom(x)
  Tensor4 elasticity;  // C_hom(x)
};

/// T_hom(E) = S_r,hom + C_hom E.
Tensor2 effective_stress(const EffectiveRecord& r, const Tensor2& E);

enum class LawStrategy { Pointwise, Table, FastPath, Sampled, Constant };
std::string to_string(LawStrategy s);

class EffectiveLaw {
 public:
  virtual ~EffectiveLaw() = default;
  virtual int dim() const = 0;
  virtual LawStrategy strategy() const = 0;
  virtual EffectiveRecord evaluate(const Point& x) const = 0;
  /// Records that define the law (grid samples, imported records); empty for
  /// laws evaluated on demand.
  virtual std::vector<EffectiveRecord> stored_records() const { return {}; }
};

using LawPtr = std::shared_ptr<const EffectiveLaw>;

/// Same record everywhere.
LawPtr constant_law(const EffectiveRecord& r);

/// Exact cell solves at every queried x, memoized per quantized (H_x, K_x).
LawPtr build_pointwise_law(std::shared_ptr<const CellSolver> solver, FieldPtr H, FieldPtr K);

class FastPathLaw : public EffectiveLaw {
 public:
  FastPathLaw(std::shared_ptr<const CellSolver> solver, FieldPtr K, const Point& x0);

  int dim() const override { return solver_->dim(); }
  LawStrategy strategy() const override { return LawStrategy::FastPath; }
  EffectiveRecord evaluate(const Point& x) const override;

  const Tensor4& canonical() const { return canonical_; }
  const Tensor4& base() const { return base_; }
  const Point& base_point() const { return x0_; }
  std::size_t canonical_solves() const { return canonical_solves_; }

 private:
  Tensor2 residual(const Tensor2& K) const;

  std::shared_ptr<const CellSolver> solver_;
  FieldPtr K_;
  Point x0_;
  Tensor2 K0_inv_;
  Tensor4 canonical_;
  Tensor4 base_;
  std::size_t canonical_solves_ = 0;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::vector<long long>, Tensor2> residual_memo_;
};

/// H = K shortcut: canonical correctors once, C_hom(x) by pushforward from
/// C_hom(x0), residual stress per distinct K. When `H` is given it must agree
/// with K on `domain` (relative mismatch <= 1e-12) or InputError is thrown.
std::shared_ptr<const FastPathLaw> build_fast_path(std::shared_ptr<const CellSolver> solver, FieldPtr K,
                                                   const Point& x0, const Box& domain, FieldPtr H = nullptr);

class TableLaw : public EffectiveLaw {
 public:
  TableLaw(const Box& box, const std::array<int, 3>& counts, std::vector<EffectiveRecord> records);

  int dim() const override { return box_.dim; }
  LawStrategy strategy() const override { return LawStrategy::Table; }
  /// Multilinear interpolation in x; queries outside the box are clamped and counted.
  EffectiveRecord evaluate(const Point& x) const override;
  std::vector<EffectiveRecord> stored_records() const override { return records_; }

  const Box& box() const { return box_; }
  const std::array<int, 3>& counts() const { return counts_; }
  std::size_t clamped_queries() const { return clamped_.load(); }

  /// Interpolation error at held-out probes: max relative Frobenius error of
  /// C_hom and max absolute error of S_r,hom.
  double probe_elasticity_error() const { return probe_c_; }
  double probe_residual_error() const { return probe_s_; }
  const std::vector<Point>& probe_points() const { return probes_; }
  void set_probe_errors(std::vector<Point> probes, double c_err, double s_err);

 private:
  Box box_;
  std::array<int, 3> counts_;
  std::vector<EffectiveRecord> records_;
  mutable std::atomic<std::size_t> clamped_{0};
  std::vector<Point> probes_;
  double probe_c_ = 0, probe_s_ = 0;
};

/// Pointwise-exact records on a counts grid over `box` (faces included),
/// evaluated concurrently; `probes` Halton points measure the interpolation error.
std::shared_ptr<const TableLaw> build_law_table(std::shared_ptr<const CellSolver> solver, FieldPtr H, FieldPtr K,
                                                const Box& box, const std::array<int, 3>& counts, int probes = 4);

/// Records looked up by exact position (imported laws for macro solves).
class SampledLaw : public EffectiveLaw {
 public:
  explicit SampledLaw(int dim, std::vector<EffectiveRecord> records);

  int dim() const override { return dim_; }
  LawStrategy strategy() const override { return LawStrategy::Sampled; }
  /// Throws InputError when x is not a stored sample point.
  EffectiveRecord evaluate(const Point& x) const override;
  std::vector<EffectiveRecord> stored_records() const override { return records_; }

 private:
  int dim_;
  std::vector<EffectiveRecord> records_;
  std::map<std::array<long long, 3>, std::size_t> index_;
};

/// Evaluates the law at each point; parallel over points, ordered output.
std::vector<EffectiveRecord> sample_law(const EffectiveLaw& law, const std::vector<Point>& points, int jobs = 1);

/// {"format": "lphom-law", "dim", "strategy", "records": [{x, H, K, S_r_hom (Voigt),
/// C_hom (Voigt matrix)}], "grid": {...} for tables}. Laws without stored
/// records are sampled at `points`.
nlohmann::json law_to_json(const EffectiveLaw& law, const std::vector<Point>& points = {}, int jobs = 1);
/// Tables come back as TableLaw, everything else as SampledLaw.
LawPtr law_from_json(const nlohmann::json& j);
void write_law(const EffectiveLaw& law, const std::string& path, const std::vector<Point>& points = {}, int jobs = 1);
LawPtr read_law(const std::string& path);

/// Arithmetic and harmonic phase means of S(C_p, K) on Sym; C_hom lies
/// between them in the order of quadratic forms.
struct MeanBounds {
  Tensor4 arithmetic;
  Tensor4 harmonic;
};
MeanBounds phase_mean_bounds(const CellMaterial& material, const Tensor2& K);

/// Smallest eigenvalue of (a - b) restricted to Sym.
double min_sym_eigenvalue_of_difference(const Tensor4& a, const Tensor4& b);

}  // namespace lph
