#include "lphom/cell_solver.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>

#include "lphom/error.hpp"

namespace lph {

std::string to_string(CorrectorKind k) {
  switch (k) {
    case CorrectorKind::Strain: return "strain";
    case CorrectorKind::Residual: return "residual";
    case CorrectorKind::Affine: return "affine";
    case CorrectorKind::Canonical: return "canonical";
    case CorrectorKind::ResidualK: return "residual_k";
  }
  return "unknown";
}

static CorrectorKind kind_from_string(const std::string& s) {
  for (auto k : {CorrectorKind::Strain, CorrectorKind::Residual, CorrectorKind::Affine, CorrectorKind::Canonical,
                 CorrectorKind::ResidualK})
    if (to_string(k) == s) return k;
  throw InputError("unknown corrector kind '" + s + "'");
}

// --- CorrectorField ---------------------------------------------------------

Point CorrectorField::value(int node) const {
  const int n = mesh->dim();
  Point p{0, 0, 0};
  for (int c = 0; c < n; ++c) p[c] = values[node * n + c];
  return p;
}

Point CorrectorField::mean() const {
  // Each periodic Q1 hat function integrates to h^n.
  const int n = mesh->dim();
  Point s{0, 0, 0};
  for (int node = 0; node < mesh->num_nodes(); ++node)
    for (int c = 0; c < n; ++c) s[c] += values[node * n + c];
  for (int c = 0; c < n; ++c) s[c] *= mesh->element_volume();
  return s;
}

double CorrectorField::norm() const {
  // Lumped mass.
  return std::sqrt(mesh->element_volume() * values.squaredNorm());
}

Tensor2 CorrectorField::element_gradient(int e) const {
  const int n = mesh->dim();
  const auto& ref = mesh->quadrature();
  const double inv_h = 1.0 / mesh->spacing();
  Tensor2 g(n);
  for (int a = 0; a < ref.nodes; ++a) {
    const int node = mesh->element_node(e, a);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) += values[node * n + i] * ref.mean_grad[a][j] * inv_h;
  }
  return g;
}

// --- CellOperator -----------------------------------------------------------

namespace {

// B(i*n+j, a*n+c) = P_ic (P g_a)_j maps local DOFs to G(w) = P grad w P^T.
Eigen::MatrixXd gradient_matrix(const Tensor2& P, const std::vector<Point>& grads, double inv_h) {
  const int n = P.dim();
  const int nodes = static_cast<int>(grads.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n * n, n * nodes);
  for (int a = 0; a < nodes; ++a) {
    Point pg{0, 0, 0};
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) pg[j] += P(j, l) * grads[a][l] * inv_h;
    for (int c = 0; c < n; ++c)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i * n + j, a * n + c) = P(i, c) * pg[j];
  }
  return B;
}

Eigen::VectorXd flatten(const Tensor2& t) {
  const int n = t.dim();
  Eigen::VectorXd v(n * n);
  for (int k = 0; k < n * n; ++k) v[k] = t.data()[k];
  return v;
}

}  // namespace

CellOperator::CellOperator(std::shared_ptr<const CellMaterial> material, const Tensor2& H, const Tensor2& K)
    : material_(std::move(material)), H_(H), K_(K) {
  const int n = material_->dim();
  if (H.dim() != n || K.dim() != n) throw InputError("cell operator: H and K must match the cell dimension");
  if (!H.is_finite() || !K.is_finite()) throw InputError("cell operator: non-finite H or K");
  if (!H.is_invertible()) throw InputError("cell operator: H is singular");
  P_ = H.inverse().transpose();

  for (int p = 0; p < material_->num_phases(); ++p) {
    Tensor4 t = apply_transform_elasticity(material_->phase(p).elasticity, K);
    const double alpha = coercivity_constant(t);
    if (!(alpha > 1e-14 * std::max(1.0, t.max_abs())))
      throw InputError("cell operator: S(C, K) is not coercive for phase '" + material_->phase(p).name + "'");
    transformed_.push_back(t);
  }

  const CellMesh& mesh = material_->mesh();
  const auto& ref = mesh.quadrature();
  const double inv_h = 1.0 / mesh.spacing();
  const double vol = mesh.element_volume();
  const int ldofs = n * ref.nodes;

  std::vector<Eigen::MatrixXd> bq;
  for (std::size_t q = 0; q < ref.points.size(); ++q) bq.push_back(gradient_matrix(P_, ref.grad[q], inv_h));
  mean_b_ = gradient_matrix(P_, ref.mean_grad, inv_h);

  std::vector<Eigen::MatrixXd> ke;
  for (const auto& t : transformed_) {
    const Eigen::MatrixXd S = t.lin_matrix();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ldofs, ldofs);
    for (std::size_t q = 0; q < bq.size(); ++q) k += (vol * ref.weights[q]) * bq[q].transpose() * S * bq[q];
    ke.push_back(k);
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.num_elements()) * ldofs * ldofs);
  std::vector<int> dofs(ldofs);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    for (int a = 0; a < ref.nodes; ++a)
      for (int c = 0; c < n; ++c) dofs[a * n + c] = mesh.element_node(e, a) * n + c;
    const Eigen::MatrixXd& k = ke[material_->element_phase(e)];
    for (int r = 0; r < ldofs; ++r)
      for (int s = 0; s < ldofs; ++s) trips.emplace_back(dofs[r], dofs[s], k(r, s));
  }
  Eigen::SparseMatrix<double> A(mesh.num_dofs(), mesh.num_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseMatrix<double> At = A.transpose();
  A_ = 0.5 * (A + At);
  A_.makeCompressed();
  diag_ = A_.diagonal();
}

Tensor2 CellOperator::effective_gradient(const Eigen::VectorXd& w, int e) const {
  const CellMesh& mesh = material_->mesh();
  const int n = mesh.dim();
  const int nodes = mesh.nodes_per_element();
  Eigen::VectorXd we(n * nodes);
  for (int a = 0; a < nodes; ++a)
    for (int c = 0; c < n; ++c) we[a * n + c] = w[mesh.element_node(e, a) * n + c];
  const Eigen::VectorXd g = mean_b_ * we;
  Tensor2 out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = g[i * n + j];
  return out;
}

Eigen::VectorXd CellOperator::load(const std::vector<Tensor2>& sigma) const {
  const CellMesh& mesh = material_->mesh();
  if (static_cast<int>(sigma.size()) != mesh.num_elements())
    throw InputError("cell load: one stress per element required");
  const int n = mesh.dim();
  const int nodes = mesh.nodes_per_element();
  const double vol = mesh.element_volume();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_dofs());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::VectorXd fe = -vol * (mean_b_.transpose() * flatten(sigma[e]));
    for (int a = 0; a < nodes; ++a)
      for (int c = 0; c < n; ++c) f[mesh.element_node(e, a) * n + c] += fe[a * n + c];
  }
  return f;
}

double CellOperator::load_scale(const std::vector<Tensor2>& sigma) const {
  double s = 0;
  for (const auto& t : sigma) s += t.norm();
  return s * material_->mesh().element_volume() * mean_b_.cwiseAbs().maxCoeff();
}

std::shared_ptr<const CellOperator> assemble_cell_operator(std::shared_ptr<const CellMaterial> material,
                                                           const Tensor2& H, const Tensor2& K) {
  return std::make_shared<const CellOperator>(std::move(material), H, K);
}

// --- projected CG -------------------------------------------------------------

namespace {

void project_out_translations(Eigen::VectorXd& v, int n) {
  const Eigen::Index nodes = v.size() / n;
  for (int c = 0; c < n; ++c) {
    double s = 0;
    for (Eigen::Index i = 0; i < nodes; ++i) s += v[i * n + c];
    s /= static_cast<double>(nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) v[i * n + c] -= s;
  }
}

}  // namespace

CgResult projected_cg(const CellOperator& op, const Eigen::VectorXd& rhs, double tolerance, int max_iterations,
                      double reference_scale) {
  const int n = op.material().dim();
  const auto& A = op.matrix();
  CgResult out;
  out.x = Eigen::VectorXd::Zero(rhs.size());

  // Zero net force per component holds analytically; anything beyond
  // roundoff means the load is not in the range of A.
  const double size = rhs.cwiseAbs().sum();
  if (size == 0.0 || size <= 1e-13 * reference_scale) return out;
  const double scale = std::max(size, reference_scale);
  for (int c = 0; c < n; ++c) {
    double s = 0;
    for (Eigen::Index i = c; i < rhs.size(); i += n) s += rhs[i];
    if (std::abs(s) > 1e-9 * scale) throw SolverError("cell load has nonzero net force", std::abs(s) / scale, 0);
  }
  Eigen::VectorXd b = rhs;
  project_out_translations(b, n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return out;

  const Eigen::VectorXd inv_diag = op.diagonal().cwiseInverse();
  Eigen::VectorXd r = b;
  double rel = 1.0;
  int it = 0;
  int restarts = 0;
  // Restart from the true residual until it satisfies the tolerance.
  while (true) {
    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    project_out_translations(z, n);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    while (it < max_iterations && r.norm() > tolerance * bnorm) {
      const Eigen::VectorXd Ap = A * p;
      const double pAp = p.dot(Ap);
      if (!(pAp > 0)) break;
      const double alpha = rz / pAp;
      out.x += alpha * p;
      r -= alpha * Ap;
      project_out_translations(r, n);
      z = inv_diag.cwiseProduct(r);
      project_out_translations(z, n);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
      ++it;
    }
    project_out_translations(out.x, n);
    r = b - A * out.x;
    project_out_translations(r, n);
    rel = r.norm() / bnorm;
    if (rel <= tolerance) break;
    if (it >= max_iterations) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "cell CG did not converge: relative residual %.3e after %d iterations", rel, it);
      throw SolverError(msg, rel, it);
    }
    if (++restarts > 50) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "cell CG stagnated: relative residual %.3e", rel);
      throw SolverError(msg, rel, it);
    }
  }
  out.iterations = it;
  out.residual = rel;
  return out;
}

// --- CellSolver ---------------------------------------------------------------

CellSolver::CellSolver(std::shared_ptr<const CellMaterial> material, SolverOptions options)
    : material_(std::move(material)), options_(options) {
  if (!material_) throw InputError("cell solver: null material");
  if (!(options_.tolerance > 0)) throw InputError("cell solver: tolerance must be positive");
  if (options_.max_iterations < 1) throw InputError("cell solver: max_iterations must be positive");
  if (!(options_.cache_quantum > 0)) throw InputError("cell solver: cache quantum must be positive");
}

CellSolver::Key CellSolver::key(const Tensor2& H, const Tensor2& K) const {
  const int n = H.dim();
  Key k;
  k.reserve(2 * n * n);
  for (const Tensor2* t : {&H, &K})
    for (int i = 0; i < n * n; ++i) {
      const double q = t->data()[i] / options_.cache_quantum;
      if (!std::isfinite(q) || std::abs(q) > 9e18) throw InputError("cell solver: transform entry out of cache range");
      k.push_back(std::llround(q));
    }
  return k;
}

std::shared_ptr<const CellOperator> CellSolver::cell_operator(const Tensor2& H, const Tensor2& K) const {
  const Key k = key(H, K);
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
  }
  auto op = assemble_cell_operator(material_, H, K);
  operator_builds_++;
  std::unique_lock lock(cache_mutex_);
  auto [it, inserted] = cache_.emplace(k, op);
  return it->second;
}

std::vector<Tensor2> CellSolver::residual_field(const Tensor2& K) const {
  std::vector<Tensor2> per_phase;
  for (const auto& ph : material_->phases()) per_phase.push_back(residual_pushforward(ph.residual, K));
  std::vector<Tensor2> out;
  out.reserve(material_->phase_ids().size());
  for (int id : material_->phase_ids()) out.push_back(per_phase[id]);
  return out;
}

CorrectorField CellSolver::solve(const CellOperator& op, const std::vector<Tensor2>& sigma, CorrectorKind kind,
                                 const Tensor2& E) const {
  // Prestresses at roundoff level relative to the stiffness (e.g. S(Q^T Q)
  // for a rotation Q) describe a stress-free state.
  double stiff = 0, peak = 0;
  for (int p = 0; p < material_->num_phases(); ++p) stiff = std::max(stiff, op.transformed_elasticity(p).max_abs());
  for (const auto& t : sigma) peak = std::max(peak, t.max_abs());
  CgResult r;
  if (peak <= 1e-14 * stiff)
    r.x = Eigen::VectorXd::Zero(material_->mesh().num_dofs());
  else
    r = projected_cg(op, op.load(sigma), options_.tolerance, options_.max_iterations, op.load_scale(sigma));
  total_solves_++;
  CorrectorField w;
  w.mesh = material_->mesh_ptr();
  w.kind = kind;
  w.H = op.H();
  w.K = op.K();
  w.E = E;
  w.values = r.x;
  w.iterations = r.iterations;
  w.residual = r.residual;
  return w;
}

CorrectorField CellSolver::solve_corrector_E(const Tensor2& H, const Tensor2& K, const Tensor2& E) const {
  if (E.dim() != dim()) throw InputError("corrector: strain dimension mismatch");
  auto op = cell_operator(H, K);
  std::vector<Tensor2> per_phase;
  for (int p = 0; p < material_->num_phases(); ++p) per_phase.push_back(op->transformed_elasticity(p).apply(E));
  std::vector<Tensor2> sigma;
  sigma.reserve(material_->phase_ids().size());
  for (int id : material_->phase_ids()) sigma.push_back(per_phase[id]);
  return solve(*op, sigma, CorrectorKind::Strain, E);
}

CorrectorField CellSolver::solve_corrector_residual(const Tensor2& H, const Tensor2& K) const {
  auto op = cell_operator(H, K);
  return solve(*op, residual_field(K), CorrectorKind::Residual, Tensor2::zero(dim()));
}

CorrectorField CellSolver::solve_corrector_affine(const Tensor2& H, const Tensor2& K, const Tensor2& E) const {
  if (E.dim() != dim()) throw InputError("corrector: strain dimension mismatch");
  auto op = cell_operator(H, K);
  std::vector<Tensor2> sigma = residual_field(K);
  for (std::size_t e = 0; e < sigma.size(); ++e)
    sigma[e] += op->transformed_elasticity(material_->element_phase(static_cast<int>(e))).apply(E);
  return solve(*op, sigma, CorrectorKind::Affine, E);
}

CorrectorField CellSolver::solve_corrector_canonical(const Tensor2& E) const {
  const Tensor2 I = Tensor2::identity(dim());
  CorrectorField w = solve_corrector_E(I, I, E);
  canonical_solves_++;
  w.kind = CorrectorKind::Canonical;
  return w;
}

CorrectorField CellSolver::solve_residual_K(const Tensor2& K) const {
  if (K.dim() != dim()) throw InputError("corrector: K dimension mismatch");
  const Tensor2 I = Tensor2::identity(dim());
  const Tensor2 C = K.transpose() * K;
  auto op = cell_operator(I, I);
  std::vector<Tensor2> per_phase;
  for (const auto& ph : material_->phases()) per_phase.push_back(ph.residual(C));
  std::vector<Tensor2> sigma;
  for (int id : material_->phase_ids()) sigma.push_back(per_phase[id]);
  CorrectorField w = solve(*op, sigma, CorrectorKind::ResidualK, Tensor2::zero(dim()));
  w.K = K;
  return w;
}

// --- exports --------------------------------------------------------------------

Eigen::VectorXd two_scale_corrector(const CorrectorField& w) {
  const int n = w.mesh->dim();
  const Tensor2 P = w.H.inverse().transpose();
  Eigen::VectorXd out(w.values.size());
  for (int node = 0; node < w.mesh->num_nodes(); ++node) {
    const Point v = P.apply(w.value(node));
    for (int c = 0; c < n; ++c) out[node * n + c] = v[c];
  }
  return out;
}

void write_corrector(const CorrectorField& w, const std::string& prefix) {
  const std::string bin = prefix + ".bin";
  std::string bin_name = bin;
  if (auto pos = bin.find_last_of('/'); pos != std::string::npos) bin_name = bin.substr(pos + 1);
  nlohmann::json j;
  j["dim"] = w.mesh->dim();
  j["resolution"] = w.mesh->resolution();
  j["kind"] = to_string(w.kind);
  j["H"] = w.H;
  j["K"] = w.K;
  j["E"] = w.E;
  j["iterations"] = w.iterations;
  j["residual"] = w.residual;
  j["node_order"] = "periodic nodes, first index fastest; dim components per node";
  j["dtype"] = "float64-le";
  j["count"] = w.values.size();
  j["data"] = bin_name;
  std::ofstream h(prefix + ".json");
  if (!h) throw InputError("cannot write " + prefix + ".json");
  h << j.dump(2) << "\n";
  std::ofstream b(bin, std::ios::binary);
  if (!b) throw InputError("cannot write " + bin);
  b.write(reinterpret_cast<const char*>(w.values.data()), static_cast<std::streamsize>(w.values.size() * sizeof(double)));
}

CorrectorField read_corrector(const std::string& prefix) {
  std::ifstream h(prefix + ".json");
  if (!h) throw InputError("cannot read " + prefix + ".json");
  const nlohmann::json j = nlohmann::json::parse(h);
  CorrectorField w;
  w.mesh = build_cell_mesh(j.at("dim").get<int>(), j.at("resolution").get<int>());
  w.kind = kind_from_string(j.at("kind").get<std::string>());
  w.H = j.at("H").get<Tensor2>();
  w.K = j.at("K").get<Tensor2>();
  w.E = j.at("E").get<Tensor2>();
  w.iterations = j.at("iterations").get<int>();
  w.residual = j.at("residual").get<double>();
  const auto count = j.at("count").get<Eigen::Index>();
  if (count != w.mesh->num_dofs()) throw InputError("corrector dump: count does not match the mesh");
  std::ifstream b(prefix + ".bin", std::ios::binary);
  if (!b) throw InputError("cannot read " + prefix + ".bin");
  w.values.resize(count);
  b.read(reinterpret_cast<char*>(w.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!b) throw InputError("corrector dump: truncated payload");
  return w;
}

void write_strain_csv(const CorrectorField& w, const CellOperator& op, const std::string& path) {
  const CellMesh& mesh = *w.mesh;
  const int n = mesh.dim();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InputError("cannot write " + path);
  std::fputs(n == 2 ? "element,y1,y2,e11,e22,e12\n" : "element,y1,y2,y3,e11,e22,e33,e23,e13,e12\n", f);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Point y = mesh.element_centroid(e);
    const Eigen::VectorXd v = (w.E + op.effective_gradient(w.values, e)).sym().voigt();
    std::fprintf(f, "%d", e);
    for (int d = 0; d < n; ++d) std::fprintf(f, ",%.17g", y[d]);
    for (Eigen::Index k = 0; k < v.size(); ++k) std::fprintf(f, ",%.17g", v[k]);
    std::fputc('\n', f);
  }
  std::fclose(f);
}

}  // namespace lph
