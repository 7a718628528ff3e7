#include "lphom/effective_law.hpp"

#include <cmath>
#include <fstream>

#include "lphom/error.hpp"
#include "lphom/parallel.hpp"

namespace lph {

namespace {

// C_hom from per-basis mean stresses: C_hom = sum_a sigma_a (x) E_a.
Tensor4 assemble_from_basis(const std::vector<Tensor2>& basis, const std::vector<Tensor2>& mean_stress) {
  const int n = basis.front().dim();
  Tensor4 c(n);
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) c(i, j, k, l) += mean_stress[a](i, j) * basis[a](k, l);
  return c;
}

Tensor2 mean_corrected_stress(const CellSolver& solver, const CellOperator& op, const CorrectorField& w,
                              const Tensor2& E) {
  const CellMaterial& mat = solver.material();
  const CellMesh& mesh = mat.mesh();
  Tensor2 s(mat.dim());
  for (int e = 0; e < mesh.num_elements(); ++e)
    s += op.transformed_elasticity(mat.element_phase(e)).apply(E + op.effective_gradient(w.values, e));
  return mesh.element_volume() * s;
}

std::vector<long long> quantize(std::initializer_list<const Tensor2*> ts, double q = 1e-12) {
  std::vector<long long> k;
  for (const Tensor2* t : ts)
    for (int i = 0; i < t->dim() * t->dim(); ++i) k.push_back(std::llround(t->data()[i] / q));
  return k;
}

std::array<long long, 3> quantize_point(const Point& x) {
  return {std::llround(x[0] * 1e9), std::llround(x[1] * 1e9), std::llround(x[2] * 1e9)};
}

}  // namespace

Tensor4 effective_elasticity_at(const CellSolver& solver, const Tensor2& H, const Tensor2& K) {
  const int n = solver.dim();
  const auto basis = sym_basis(n);
  auto op = solver.cell_operator(H, K);
  std::vector<Tensor2> mean(basis.size());
  parallel_for(basis.size(), solver.options().jobs, [&](std::size_t a) {
    const CorrectorField w = solver.solve_corrector_E(H, K, basis[a]);
    mean[a] = mean_corrected_stress(solver, *op, w, basis[a]);
  });
  return assemble_from_basis(basis, mean);
}

ResidualBreakdown effective_residual_breakdown(const CellSolver& solver, const Tensor2& H, const Tensor2& K) {
  const CellMaterial& mat = solver.material();
  const CellMesh& mesh = mat.mesh();
  auto op = solver.cell_operator(H, K);
  const CorrectorField w = solver.solve_corrector_residual(H, K);
  const std::vector<Tensor2> tau = solver.residual_field(K);
  ResidualBreakdown r{Tensor2(mat.dim()), Tensor2(mat.dim()), Tensor2(mat.dim())};
  for (int e = 0; e < mesh.num_elements(); ++e) {
    r.average += tau[e];
    r.corrector += op->transformed_elasticity(mat.element_phase(e)).apply(op->effective_gradient(w.values, e));
  }
  r.average *= mesh.element_volume();
  r.corrector *= mesh.element_volume();
  r.total = r.average + r.corrector;
  return r;
}

Tensor2 effective_residual_at(const CellSolver& solver, const Tensor2& H, const Tensor2& K) {
  return effective_residual_breakdown(solver, H, K).total;
}

Tensor4 canonical_effective_elasticity(const CellSolver& solver) {
  const int n = solver.dim();
  const auto basis = sym_basis(n);
  const Tensor2 I = Tensor2::identity(n);
  auto op = solver.cell_operator(I, I);
  std::vector<Tensor2> mean(basis.size());
  parallel_for(basis.size(), solver.options().jobs, [&](std::size_t a) {
    const CorrectorField w = solver.solve_corrector_canonical(basis[a]);
    mean[a] = mean_corrected_stress(solver, *op, w, basis[a]);
  });
  return assemble_from_basis(basis, mean);
}

Tensor2 effective_residual_HK(const CellSolver& solver, const Tensor2& K) {
  const CellMaterial& mat = solver.material();
  const CellMesh& mesh = mat.mesh();
  const CorrectorField w = solver.solve_residual_K(K);
  const Tensor2 C = K.transpose() * K;
  std::vector<Tensor2> gen;
  for (const auto& ph : mat.phases()) gen.push_back(ph.residual(C));
  Tensor2 s(mat.dim());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const int p = mat.element_phase(e);
    s += gen[p] + mat.phase(p).elasticity.apply(w.element_gradient(e));
  }
  s *= mesh.element_volume();
  return K * s * K.transpose();
}

Tensor4 pushforward_effective(const Tensor4& base, const Tensor2& M) {
  if (!M.is_invertible()) throw InputError("pushforward_effective: M is singular");
  return apply_transform_elasticity(base, M);
}

Tensor2 uniformity_map(const Tensor2& K_from, const Tensor2& K_to) { return K_to * K_from.inverse(); }

Tensor2 effective_stress(const EffectiveRecord& r, const Tensor2& E) { return r.residual + r.elasticity.apply(E); }

std::string to_string(LawStrategy s) {
  switch (s) {
    case LawStrategy::Pointwise: return "pointwise";
    case LawStrategy::Table: return "table";
    case LawStrategy::FastPath: return "fast_path";
    case LawStrategy::Sampled: return "sampled";
    case LawStrategy::Constant: return "constant";
  }
  return "unknown";
}

// --- constant and pointwise ------------------------------------------------------

namespace {

class ConstantLaw : public EffectiveLaw {
 public:
  explicit ConstantLaw(const EffectiveRecord& r) : r_(r) {}
  int dim() const override { return r_.elasticity.dim(); }
  LawStrategy strategy() const override { return LawStrategy::Constant; }
  EffectiveRecord evaluate(const Point& x) const override {
    EffectiveRecord r = r_;
    r.x = x;
    return r;
  }

 private:
  EffectiveRecord r_;
};

class PointwiseLaw : public EffectiveLaw {
 public:
  PointwiseLaw(std::shared_ptr<const CellSolver> solver, FieldPtr H, FieldPtr K)
      : solver_(std::move(solver)), H_(std::move(H)), K_(std::move(K)) {}

  int dim() const override { return solver_->dim(); }
  LawStrategy strategy() const override { return LawStrategy::Pointwise; }

  EffectiveRecord evaluate(const Point& x) const override {
    EffectiveRecord r;
    r.x = x;
    r.H = (*H_)(x);
    r.K = (*K_)(x);
    const auto key = quantize({&r.H, &r.K});
    {
      std::lock_guard lock(mutex_);
      auto it = memo_.find(key);
      if (it != memo_.end()) {
        r.elasticity = it->second.first;
        r.residual = it->second.second;
        return r;
      }
    }
    r.elasticity = effective_elasticity_at(*solver_, r.H, r.K);
    r.residual = effective_residual_at(*solver_, r.H, r.K);
    std::lock_guard lock(mutex_);
    memo_.emplace(key, std::make_pair(r.elasticity, r.residual));
    return r;
  }

 private:
  std::shared_ptr<const CellSolver> solver_;
  FieldPtr H_, K_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<long long>, std::pair<Tensor4, Tensor2>> memo_;
};

}  // namespace

LawPtr constant_law(const EffectiveRecord& r) { return std::make_shared<const ConstantLaw>(r); }

LawPtr build_pointwise_law(std::shared_ptr<const CellSolver> solver, FieldPtr H, FieldPtr K) {
  if (!solver || !H || !K) throw InputError("pointwise law: null argument");
  if (H->dim() != solver->dim() || K->dim() != solver->dim()) throw InputError("pointwise law: dimension mismatch");
  return std::make_shared<const PointwiseLaw>(std::move(solver), std::move(H), std::move(K));
}

// --- fast path -------------------------------------------------------------------

FastPathLaw::FastPathLaw(std::shared_ptr<const CellSolver> solver, FieldPtr K, const Point& x0)
    : solver_(std::move(solver)), K_(std::move(K)), x0_(x0) {
  const Tensor2 K0 = (*K_)(x0_);
  if (!K0.is_invertible()) throw InputError("fast path: K is singular at the base point");
  K0_inv_ = K0.inverse();
  const std::size_t before = solver_->canonical_solves();
  canonical_ = canonical_effective_elasticity(*solver_);
  canonical_solves_ = solver_->canonical_solves() - before;
  base_ = apply_transform_elasticity(canonical_, K0);
}

Tensor2 FastPathLaw::residual(const Tensor2& K) const {
  const auto key = quantize({&K});
  {
    std::lock_guard lock(memo_mutex_);
    auto it = residual_memo_.find(key);
    if (it != residual_memo_.end()) return it->second;
  }
  const Tensor2 s = effective_residual_HK(*solver_, K);
  std::lock_guard lock(memo_mutex_);
  residual_memo_.emplace(key, s);
  return s;
}

EffectiveRecord FastPathLaw::evaluate(const Point& x) const {
  EffectiveRecord r;
  r.x = x;
  r.K = (*K_)(x);
  r.H = r.K;
  r.elasticity = pushforward_effective(base_, r.K * K0_inv_);
  r.residual = residual(r.K);
  return r;
}

std::shared_ptr<const FastPathLaw> build_fast_path(std::shared_ptr<const CellSolver> solver, FieldPtr K,
                                                   const Point& x0, const Box& domain, FieldPtr H) {
  if (!solver || !K) throw InputError("fast path: null argument");
  if (K->dim() != solver->dim() || domain.dim != solver->dim()) throw InputError("fast path: dimension mismatch");
  if (!domain.contains(x0, 1e-12)) throw InputError("fast path: base point outside the domain");
  if (H) {
    const double mismatch = max_field_mismatch(*H, *K, domain);
    if (mismatch > 1e-12) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "fast path requires H = K; relative mismatch %.3e on the domain", mismatch);
      throw InputError(msg);
    }
  }
  return std::make_shared<const FastPathLaw>(std::move(solver), std::move(K), x0);
}

// --- table -----------------------------------------------------------------------

TableLaw::TableLaw(const Box& box, const std::array<int, 3>& counts, std::vector<EffectiveRecord> records)
    : box_(box), counts_(counts), records_(std::move(records)) {
  std::size_t total = 1;
  for (int d = 0; d < box_.dim; ++d) {
    if (counts_[d] < 2) throw InputError("law table: need at least 2 samples per axis");
    total *= static_cast<std::size_t>(counts_[d]);
  }
  for (int d = box_.dim; d < 3; ++d) counts_[d] = 1;
  if (records_.size() != total) throw InputError("law table: record count does not match the grid");
}

void TableLaw::set_probe_errors(std::vector<Point> probes, double c_err, double s_err) {
  probes_ = std::move(probes);
  probe_c_ = c_err;
  probe_s_ = s_err;
}

EffectiveRecord TableLaw::evaluate(const Point& x) const {
  const int n = box_.dim;
  if (!box_.contains(x, 1e-12)) clamped_++;
  std::array<int, 3> i0{0, 0, 0};
  std::array<double, 3> t{0, 0, 0};
  for (int d = 0; d < n; ++d) {
    const double s = std::clamp((x[d] - box_.lo[d]) / box_.extent(d), 0.0, 1.0) * (counts_[d] - 1);
    i0[d] = std::min(static_cast<int>(std::floor(s)), counts_[d] - 2);
    t[d] = s - i0[d];
  }
  EffectiveRecord r;
  r.x = x;
  r.H = Tensor2(n);
  r.K = Tensor2(n);
  r.residual = Tensor2(n);
  r.elasticity = Tensor4(n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1;
    std::size_t lin = 0, stride = 1;
    for (int d = 0; d < n; ++d) {
      const int o = (corner >> d) & 1;
      w *= o ? t[d] : 1 - t[d];
      lin += static_cast<std::size_t>(i0[d] + o) * stride;
      stride *= counts_[d];
    }
    if (w == 0.0) continue;
    if (w == 1.0) {
      // Exactly on a sample: return the stored record bit for bit.
      EffectiveRecord exact = records_[lin];
      exact.x = x;
      return exact;
    }
    const EffectiveRecord& s = records_[lin];
    r.H += w * s.H;
    r.K += w * s.K;
    r.residual += w * s.residual;
    r.elasticity += w * s.elasticity;
  }
  return r;
}

namespace {

double halton(int index, int base) {
  double f = 1, r = 0;
  for (int i = index; i > 0; i /= base) {
    f /= base;
    r += f * (i % base);
  }
  return r;
}

}  // namespace

std::shared_ptr<const TableLaw> build_law_table(std::shared_ptr<const CellSolver> solver, FieldPtr H, FieldPtr K,
                                                const Box& box, const std::array<int, 3>& counts, int probes) {
  if (box.dim != solver->dim()) throw InputError("law table: dimension mismatch");
  auto exact = build_pointwise_law(solver, H, K);
  std::vector<Point> pts;
  std::size_t total = 1;
  for (int d = 0; d < box.dim; ++d) {
    if (counts[d] < 2) throw InputError("law table: need at least 2 samples per axis");
    total *= static_cast<std::size_t>(counts[d]);
  }
  for (std::size_t k = 0; k < total; ++k) {
    Point p{0, 0, 0};
    std::size_t rest = k;
    for (int d = 0; d < box.dim; ++d) {
      const int i = static_cast<int>(rest % counts[d]);
      rest /= counts[d];
      p[d] = box.lo[d] + box.extent(d) * i / (counts[d] - 1);
    }
    pts.push_back(p);
  }
  auto table = std::make_shared<TableLaw>(box, counts, sample_law(*exact, pts, solver->options().jobs));

  std::vector<Point> probe_pts;
  const int bases[3] = {2, 3, 5};
  for (int k = 1; k <= probes; ++k) {
    Point p{0, 0, 0};
    for (int d = 0; d < box.dim; ++d) p[d] = box.lo[d] + box.extent(d) * halton(k, bases[d]);
    probe_pts.push_back(p);
  }
  const auto truth = sample_law(*exact, probe_pts, solver->options().jobs);
  double c_err = 0, s_err = 0;
  for (std::size_t k = 0; k < probe_pts.size(); ++k) {
    const EffectiveRecord approx = table->evaluate(probe_pts[k]);
    c_err = std::max(c_err, relative_difference(approx.elasticity, truth[k].elasticity));
    s_err = std::max(s_err, (approx.residual - truth[k].residual).max_abs());
  }
  table->set_probe_errors(probe_pts, c_err, s_err);
  return table;
}

// --- sampled / IO ------------------------------------------------------------------

SampledLaw::SampledLaw(int dim, std::vector<EffectiveRecord> records) : dim_(dim), records_(std::move(records)) {
  check_dim(dim_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(quantize_point(records_[i].x), i).second)
      throw InputError("sampled law: duplicate sample point");
  }
}

EffectiveRecord SampledLaw::evaluate(const Point& x) const {
  auto it = index_.find(quantize_point(x));
  if (it == index_.end()) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "sampled law has no record at (%.17g, %.17g, %.17g)", x[0], x[1], x[2]);
    throw InputError(msg);
  }
  EffectiveRecord r = records_[it->second];
  r.x = x;
  return r;
}

std::vector<EffectiveRecord> sample_law(const EffectiveLaw& law, const std::vector<Point>& points, int jobs) {
  std::vector<EffectiveRecord> out(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) { out[i] = law.evaluate(points[i]); });
  return out;
}

namespace {

nlohmann::json rows_of(const Tensor2& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < t.dim(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < t.dim(); ++j) r.push_back(t(i, j));
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json vector_of(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json matrix_of(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Tensor2 sym_from_voigt(const std::vector<double>& v, int n) {
  if (static_cast<int>(v.size()) != sym_size(n)) throw InputError("law record: bad Voigt vector length");
  Tensor2 t(n);
  for (int a = 0; a < sym_size(n); ++a) {
    const auto [i, j] = mandel_pair(n, a);
    t(i, j) = v[a];
    t(j, i) = v[a];
  }
  return t;
}

nlohmann::json record_to_json(const EffectiveRecord& r, int n) {
  return {{"x", std::vector<double>(r.x.begin(), r.x.begin() + n)},
          {"H", rows_of(r.H)},
          {"K", rows_of(r.K)},
          {"S_r_hom", vector_of(r.residual.voigt())},
          {"C_hom", matrix_of(r.elasticity.voigt())}};
}

EffectiveRecord record_from_json(const nlohmann::json& j, int n) {
  for (const auto& [key, _] : j.items())
    if (key != "x" && key != "H" && key != "K" && key != "S_r_hom" && key != "C_hom")
      throw InputError("law record: unknown key '" + key + "'");
  EffectiveRecord r;
  const auto x = j.at("x").get<std::vector<double>>();
  if (static_cast<int>(x.size()) != n) throw InputError("law record: x has the wrong length");
  for (int d = 0; d < n; ++d) r.x[d] = x[d];
  r.H = Tensor2::from_rows(j.at("H").get<std::vector<std::vector<double>>>());
  r.K = Tensor2::from_rows(j.at("K").get<std::vector<std::vector<double>>>());
  if (r.H.dim() != n || r.K.dim() != n) throw InputError("law record: H/K dimension mismatch");
  r.residual = sym_from_voigt(j.at("S_r_hom").get<std::vector<double>>(), n);
  const auto rows = j.at("C_hom").get<std::vector<std::vector<double>>>();
  const int m = sym_size(n);
  if (static_cast<int>(rows.size()) != m) throw InputError("law record: bad Voigt matrix");
  Eigen::MatrixXd v(m, m);
  for (int a = 0; a < m; ++a) {
    if (static_cast<int>(rows[a].size()) != m) throw InputError("law record: bad Voigt matrix");
    for (int b = 0; b < m; ++b) v(a, b) = rows[a][b];
  }
  r.elasticity = Tensor4::from_voigt(v, n);
  return r;
}

}  // namespace

nlohmann::json law_to_json(const EffectiveLaw& law, const std::vector<Point>& points, int jobs) {
  const int n = law.dim();
  nlohmann::json j{{"format", "lphom-law"}, {"dim", n}, {"strategy", to_string(law.strategy())}};
  std::vector<EffectiveRecord> recs = law.stored_records();
  if (const auto* t = dynamic_cast<const TableLaw*>(&law)) {
    j["grid"] = {{"domain", box_to_json(t->box())},
                 {"counts", std::vector<int>(t->counts().begin(), t->counts().begin() + n)}};
  } else if (!points.empty()) {
    recs = sample_law(law, points, jobs);
  }
  if (recs.empty()) throw InputError("law export: the law stores no records and no sample points were given");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : recs) arr.push_back(record_to_json(r, n));
  j["records"] = arr;
  return j;
}

LawPtr law_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "lphom-law") throw InputError("law import: not an lphom-law document");
  const int n = j.at("dim").get<int>();
  check_dim(n);
  std::vector<EffectiveRecord> recs;
  for (const auto& r : j.at("records")) recs.push_back(record_from_json(r, n));
  if (j.contains("grid")) {
    const Box box = box_from_json(j.at("grid").at("domain"));
    const auto c = j.at("grid").at("counts").get<std::vector<int>>();
    if (static_cast<int>(c.size()) != n || box.dim != n) throw InputError("law import: grid dimension mismatch");
    std::array<int, 3> counts{1, 1, 1};
    for (int d = 0; d < n; ++d) counts[d] = c[d];
    return std::make_shared<const TableLaw>(box, counts, std::move(recs));
  }
  return std::make_shared<const SampledLaw>(n, std::move(recs));
}

void write_law(const EffectiveLaw& law, const std::string& path, const std::vector<Point>& points, int jobs) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << law_to_json(law, points, jobs).dump(1) << "\n";
}

LawPtr read_law(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("law file " + path + ": " + e.what());
  }
  return law_from_json(j);
}

// --- bounds --------------------------------------------------------------------------

MeanBounds phase_mean_bounds(const CellMaterial& material, const Tensor2& K) {
  const int n = material.dim();
  const int m = sym_size(n);
  Eigen::MatrixXd arith = Eigen::MatrixXd::Zero(m, m), harm_inv = Eigen::MatrixXd::Zero(m, m);
  for (int p = 0; p < material.num_phases(); ++p) {
    const double f = material.volume_fractions()[p];
    const Eigen::MatrixXd c = apply_transform_elasticity(material.phase(p).elasticity, K).mandel();
    arith += f * c;
    harm_inv += f * c.inverse();
  }
  return {Tensor4::from_mandel(arith, n), Tensor4::from_mandel(harm_inv.inverse(), n)};
}

double min_sym_eigenvalue_of_difference(const Tensor4& a, const Tensor4& b) {
  const Eigen::MatrixXd d = (a - b).mandel();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (d + d.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace lph
