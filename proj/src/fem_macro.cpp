#include "lphom/fem_macro.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "lphom/error.hpp"
#include "lphom/parallel.hpp"
#include "lphom/q1.hpp"

namespace lph {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor2 sym_from_voigt(const Eigen::VectorXd& v, int n) {
  Tensor2 t(n);
  for (int a = 0; a < sym_size(n); ++a) {
    const auto [i, j] = mandel_pair(n, a);
    t(i, j) = v(a);
    t(j, i) = v(a);
  }
  return t;
}

}  // namespace

MacroMesh::MacroMesh(const Box& box, const std::array<int, 3>& cells) : box_(box) {
  check_dim(box.dim);
  num_elements_ = 1;
  num_nodes_ = 1;
  volume_ = 1;
  for (int d = 0; d < box.dim; ++d) {
    if (cells[d] < 1) throw InputError("macro mesh: at least one element per direction required");
    if (!(box.extent(d) > 0)) throw InputError("macro mesh: empty box");
    cells_[d] = cells[d];
    h_[d] = box.extent(d) / cells[d];
    num_elements_ *= cells[d];
    num_nodes_ *= cells[d] + 1;
    volume_ *= h_[d];
  }
}

Point MacroMesh::node_coord(int node) const {
  Point x{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    const int i = node % (cells_[d] + 1);
    node /= cells_[d] + 1;
    // the last node sits exactly on the upper face
    x[d] = i == cells_[d] ? box_.hi[d] : box_.lo[d] + i * h_[d];
  }
  return x;
}

int MacroMesh::element_node(int e, int a) const {
  int node = 0, stride = 1;
  for (int d = 0; d < dim(); ++d) {
    const int i = e % cells_[d] + Q1Reference::offset(a, d);
    e /= cells_[d];
    node += i * stride;
    stride *= cells_[d] + 1;
  }
  return node;
}

Point MacroMesh::element_origin(int e) const {
  Point x{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    x[d] = box_.lo[d] + (e % cells_[d]) * h_[d];
    e /= cells_[d];
  }
  return x;
}

Point MacroMesh::element_centroid(int e) const {
  Point x = element_origin(e);
  for (int d = 0; d < dim(); ++d) x[d] += 0.5 * h_[d];
  return x;
}

bool MacroMesh::is_boundary(int node) const {
  for (int d = 0; d < dim(); ++d) {
    const int i = node % (cells_[d] + 1);
    node /= cells_[d] + 1;
    if (i == 0 || i == cells_[d]) return true;
  }
  return false;
}

int MacroMesh::locate(const Point& x, Point& local) const {
  int e = 0, stride = 1;
  local = {0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    const double t = (x[d] - box_.lo[d]) / h_[d];
    int i = static_cast<int>(std::floor(t));
    i = std::clamp(i, 0, cells_[d] - 1);
    local[d] = std::clamp(t - i, 0.0, 1.0);
    e += i * stride;
    stride *= cells_[d];
  }
  return e;
}

VectorFunction zero_vector_function() {
  return [](const Point&) { return Point{0, 0, 0}; };
}

VectorFunction constant_vector_function(const Point& v) {
  return [v](const Point&) { return v; };
}

VectorFunction linear_vector_function(const Tensor2& E) {
  return [E](const Point& x) {
    Point y{0, 0, 0};
    for (int i = 0; i < E.dim(); ++i)
      for (int j = 0; j < E.dim(); ++j) y[i] += E(i, j) * x[j];
    return y;
  };
}

VectorFunction vector_function_from_json(const nlohmann::json& j, int dim) {
  check_dim(dim);
  if (!j.is_object()) throw InputError("vector function: expected an object");
  const std::string kind = j.at("kind").get<std::string>();
  auto only = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, _] : j.items()) {
      bool ok = key == "kind";
      for (const char* k : keys) ok |= key == k;
      if (!ok) throw InputError("vector function '" + kind + "': unknown key '" + key + "'");
    }
  };
  if (kind == "zero") {
    only({});
    return zero_vector_function();
  }
  if (kind == "constant") {
    only({"value"});
    const auto v = j.at("value").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != dim) throw InputError("vector function: value needs " + std::to_string(dim) + " entries");
    Point p{0, 0, 0};
    std::copy(v.begin(), v.end(), p.begin());
    return constant_vector_function(p);
  }
  if (kind == "linear") {
    only({"E"});
    const auto rows = j.at("E").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != dim) throw InputError("vector function: E has the wrong shape");
    for (const auto& r : rows)
      if (static_cast<int>(r.size()) != dim) throw InputError("vector function: E has the wrong shape");
    return linear_vector_function(Tensor2::from_rows(rows));
  }
  throw InputError("vector function: unknown kind '" + kind + "'");
}

Point DisplacementField::value(int node) const {
  Point u{0, 0, 0};
  const int n = mesh->dim();
  for (int i = 0; i < n; ++i) u[i] = values(node * n + i);
  return u;
}

Point DisplacementField::evaluate(const Point& x) const {
  Point xi;
  const int e = mesh->locate(x, xi);
  const int n = mesh->dim();
  Point u{0, 0, 0};
  for (int a = 0; a < (1 << n); ++a) {
    double N = 1;
    for (int d = 0; d < n; ++d) N *= Q1Reference::offset(a, d) ? xi[d] : 1 - xi[d];
    const int node = mesh->element_node(e, a);
    for (int i = 0; i < n; ++i) u[i] += N * values(node * n + i);
  }
  return u;
}

Tensor2 DisplacementField::gradient(const Point& x) const {
  Point xi;
  const int e = mesh->locate(x, xi);
  const int n = mesh->dim();
  Tensor2 g(n);
  for (int a = 0; a < (1 << n); ++a) {
    const int node = mesh->element_node(e, a);
    for (int j = 0; j < n; ++j) {
      double dN = (Q1Reference::offset(a, j) ? 1.0 : -1.0) / mesh->spacing(j);
      for (int d = 0; d < n; ++d)
        if (d != j) dN *= Q1Reference::offset(a, d) ? xi[d] : 1 - xi[d];
      for (int i = 0; i < n; ++i) g(i, j) += dN * values(node * n + i);
    }
  }
  return g;
}

DisplacementField solve_macro(const MacroProblem& problem, int points_per_axis,
                              const std::function<ElementMaterial(int e, int q, const Point& x)>& material) {
  const auto t0 = Clock::now();
  auto mesh = std::make_shared<const MacroMesh>(problem.domain, problem.cells);
  const int n = mesh->dim();
  const int nn = 1 << n;
  const int ne = nn * n;
  const int n2 = n * n;
  const Q1Reference& ref = q1_reference(n, points_per_axis);
  const int nq = static_cast<int>(ref.points.size());
  const double vol = mesh->element_volume();

  // element matrices and loads, independent per element
  std::vector<Eigen::MatrixXd> Ke(mesh->num_elements());
  std::vector<Eigen::VectorXd> fe(mesh->num_elements());
  parallel_for(static_cast<std::size_t>(mesh->num_elements()), problem.jobs, [&](std::size_t ei) {
    const int e = static_cast<int>(ei);
    const Point origin = mesh->element_origin(e);
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ne, ne);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(ne);
    Eigen::MatrixXd B(n2, ne);
    for (int q = 0; q < nq; ++q) {
      Point x = origin;
      for (int d = 0; d < n; ++d) x[d] += ref.points[q][d] * mesh->spacing(d);
      const ElementMaterial m = material(e, q, x);
      B.setZero();
      for (int a = 0; a < nn; ++a)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) B(i * n + j, a * n + i) = ref.grad[q][a][j] / mesh->spacing(j);
      const double w = ref.weights[q] * vol;
      K.noalias() += w * B.transpose() * m.elasticity.lin_matrix() * B;
      if (problem.include_residual) {
        Eigen::VectorXd s(n2);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) s(i * n + j) = m.residual(i, j);
        f.noalias() -= w * B.transpose() * s;
      }
      const Point b = problem.body_force(x);
      for (int a = 0; a < nn; ++a)
        for (int i = 0; i < n; ++i) f(a * n + i) += w * ref.shape[q][a] * b[i];
    }
    Ke[e] = std::move(K);
    fe[e] = std::move(f);
  });

  // Dirichlet data on every boundary node
  const int ndof = mesh->num_dofs();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
  std::vector<int> free_index(ndof, -1);
  int nfree = 0;
  for (int node = 0; node < mesh->num_nodes(); ++node) {
    if (mesh->is_boundary(node)) {
      const Point g = problem.boundary(mesh->node_coord(node));
      for (int i = 0; i < n; ++i) u(node * n + i) = g[i];
    } else {
      for (int i = 0; i < n; ++i) free_index[node * n + i] = nfree++;
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh->num_elements()) * ne * ne);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  std::vector<int> dofs(ne);
  double energy = 0;
  for (int e = 0; e < mesh->num_elements(); ++e) {
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < n; ++i) dofs[a * n + i] = mesh->element_node(e, a) * n + i;
    for (int r = 0; r < ne; ++r) {
      const int fr = free_index[dofs[r]];
      if (fr < 0) continue;
      rhs(fr) += fe[e](r);
      for (int c = 0; c < ne; ++c) {
        const int fc = free_index[dofs[c]];
        if (fc >= 0)
          trip.emplace_back(fr, fc, Ke[e](r, c));
        else
          rhs(fr) -= Ke[e](r, c) * u(dofs[c]);
      }
    }
  }

  SolveStats stats;
  stats.free_dofs = nfree;
  if (nfree > 0) {
    Eigen::SparseMatrix<double> A(nfree, nfree);
    A.setFromTriplets(trip.begin(), trip.end());
    trip.clear();
    trip.shrink_to_fit();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw SolverError("macro solve: factorization failed", 0.0, 0);
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !x.allFinite()) throw SolverError("macro solve: back substitution failed", 0.0, 0);
    const double rn = rhs.norm();
    stats.residual = (A * x - rhs).norm() / (rn > 0 ? rn : 1.0);
    if (stats.residual > 1e-8) throw SolverError("macro solve: residual too large", stats.residual, 1);
    for (int d = 0; d < ndof; ++d)
      if (free_index[d] >= 0) u(d) = x(free_index[d]);
  }
  for (int e = 0; e < mesh->num_elements(); ++e) {
    Eigen::VectorXd ue(ne);
    for (int a = 0; a < nn; ++a)
      for (int i = 0; i < n; ++i) ue(a * n + i) = u(mesh->element_node(e, a) * n + i);
    energy += 0.5 * ue.dot(Ke[e] * ue);
  }
  stats.energy = energy;
  stats.seconds = seconds_since(t0);
  return DisplacementField{mesh, std::move(u), stats};
}

DisplacementField solve_homogenized(const MacroProblem& problem, const EffectiveLaw& law, int jobs) {
  if (law.dim() != problem.domain.dim) throw InputError("homogenized solve: law and domain dimensions differ");
  const MacroMesh mesh(problem.domain, problem.cells);
  const int n = mesh.dim();
  std::vector<Point> centroids(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) centroids[e] = mesh.element_centroid(e);
  const auto records = sample_law(law, centroids, jobs);
  std::vector<ElementMaterial> mats(records.size());
  for (std::size_t e = 0; e < records.size(); ++e) {
    mats[e].elasticity = Tensor4::from_voigt(records[e].elasticity.voigt(), n);
    mats[e].residual = sym_from_voigt(records[e].residual.voigt(), n);
  }
  return solve_macro(problem, 2, [&](int e, int, const Point&) { return mats[e]; });
}

void check_resolution(const MacroProblem& problem, double eps, int min_elements_per_period) {
  for (int d = 0; d < problem.domain.dim; ++d) {
    const double per_period = eps * problem.cells[d] / problem.domain.extent(d);
    if (per_period < min_elements_per_period - 1e-9) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "direct solve: resolution rule violated, %.3g elements per period eps in direction %d "
                    "(at least %d required)",
                    per_period, d + 1, min_elements_per_period);
      throw InputError(buf);
    }
  }
}

DisplacementField solve_direct(const MacroProblem& problem, const MicroField& field, const DirectOptions& opts) {
  if (field.dim() != problem.domain.dim) throw InputError("direct solve: field and domain dimensions differ");
  check_resolution(problem, field.eps(), opts.min_elements_per_period);
  return solve_macro(problem, opts.points_per_axis, [&](int, int, const Point& x) {
    const MicroSample s = field.sample(x);
    return ElementMaterial{s.elasticity, s.residual};
  });
}

namespace {

struct NormAccumulator {
  double l2 = 0, h1 = 0, energy = 0;
  void add(double w, const Point& du, const Tensor2& dg, const Point& x, const TensorFunction4& C, int n) {
    for (int i = 0; i < n; ++i) l2 += w * du[i] * du[i];
    h1 += w * dg.dot(dg);
    const Tensor2 e = dg.sym();
    energy += w * (C ? C(x).apply(e).dot(e) : 2.0 * e.dot(e));
  }
  ErrorNorms result() const { return {std::sqrt(l2), std::sqrt(h1), std::sqrt(std::max(0.0, energy))}; }
};

template <class Diff>
ErrorNorms integrate(const MacroMesh& mesh, Diff&& diff, const TensorFunction4& C) {
  const int n = mesh.dim();
  const Q1Reference& ref = q1_reference(n, 3);
  NormAccumulator acc;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Point origin = mesh.element_origin(e);
    for (std::size_t q = 0; q < ref.points.size(); ++q) {
      Point x = origin;
      for (int d = 0; d < n; ++d) x[d] += ref.points[q][d] * mesh.spacing(d);
      Point du;
      Tensor2 dg(n);
      diff(x, du, dg);
      acc.add(ref.weights[q] * mesh.element_volume(), du, dg, x, C, n);
    }
  }
  return acc.result();
}

}  // namespace

ErrorNorms error_norms(const DisplacementField& a, const DisplacementField& b, const TensorFunction4& C) {
  if (a.mesh->dim() != b.mesh->dim()) throw InputError("error norms: dimensions differ");
  for (int d = 0; d < a.mesh->dim(); ++d) {
    const double tol = 1e-12 * std::max(1.0, a.mesh->box().extent(d));
    if (std::abs(a.mesh->box().lo[d] - b.mesh->box().lo[d]) > tol || std::abs(a.mesh->box().hi[d] - b.mesh->box().hi[d]) > tol)
      throw InputError("error norms: the fields live on different domains");
  }
  const MacroMesh& fine = a.mesh->num_elements() >= b.mesh->num_elements() ? *a.mesh : *b.mesh;
  return integrate(
      fine,
      [&](const Point& x, Point& du, Tensor2& dg) {
        const Point ua = a.evaluate(x), ub = b.evaluate(x);
        for (int i = 0; i < 3; ++i) du[i] = ua[i] - ub[i];
        dg = a.gradient(x) - b.gradient(x);
      },
      C);
}

ErrorNorms error_norms(const DisplacementField& a, const VectorFunction& f,
                       const std::function<Tensor2(const Point&)>& grad_f, const TensorFunction4& C) {
  return integrate(
      *a.mesh,
      [&](const Point& x, Point& du, Tensor2& dg) {
        const Point ua = a.evaluate(x), ub = f(x);
        for (int i = 0; i < 3; ++i) du[i] = ua[i] - ub[i];
        dg = a.gradient(x) - grad_f(x);
      },
      C);
}

ErrorNorms field_norms(const DisplacementField& u) {
  const int n = u.mesh->dim();
  return error_norms(u, zero_vector_function(), [n](const Point&) { return Tensor2(n); });
}

ConvergenceReport convergence_study(const ConvergenceSetup& s, const std::vector<double>& eps_list) {
  if (!s.material || !s.law || !s.H || !s.K) throw InputError("convergence study: material, law, H and K are required");
  if (eps_list.empty()) throw InputError("convergence study: empty eps list");
  const int n = s.domain.dim;
  ConvergenceReport report;
  report.rows.resize(eps_list.size());
  std::vector<std::array<int, 3>> cells(eps_list.size());
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const double eps = eps_list[i];
    if (!(eps > 0 && eps < 1)) throw InputError("convergence study: eps must lie in (0,1)");
    if (i > 0 && !(eps < eps_list[i - 1])) throw InputError("convergence study: eps values must decrease");
    for (int d = 0; d < n; ++d) {
      cells[i][d] = static_cast<int>(std::ceil(s.elements_per_period * s.domain.extent(d) / eps - 1e-9));
    }
    report.rows[i].eps = eps;
    report.rows[i].cells = cells[i][0];
  }

  const auto t0 = Clock::now();
  std::shared_ptr<const DisplacementField> shared_hom;
  if (s.homogenized_cells > 0) {
    const MacroProblem hom{s.domain, {s.homogenized_cells, s.homogenized_cells, s.homogenized_cells}, s.boundary,
                           s.body_force, true, s.jobs};
    shared_hom = std::make_shared<const DisplacementField>(solve_homogenized(hom, *s.law, s.jobs));
  }

  const int outer = std::max(1, s.jobs);
  std::atomic<bool> exceeded{false};
  std::vector<double> hom_seconds(eps_list.size(), 0.0);
  parallel_for(eps_list.size(), outer, [&](std::size_t i) {
    if (s.budget_seconds > 0 && seconds_since(t0) > s.budget_seconds) {
      exceeded = true;
      return;
    }
    const auto t1 = Clock::now();
    auto dec = decompose(s.domain, eps_list[i], s.r, s.H, s.anchors);
    const MicroField field(s.material, s.K, dec);
    const MacroProblem problem{s.domain, cells[i], s.boundary, s.body_force, true, 1};
    const DisplacementField u = solve_direct(problem, field, s.direct);
    std::shared_ptr<const DisplacementField> u_hom = shared_hom;
    if (!u_hom) {
      u_hom = std::make_shared<const DisplacementField>(solve_homogenized(problem, *s.law, 1));
      hom_seconds[i] = u_hom->stats.seconds;
    }
    const ErrorNorms err = error_norms(u, *u_hom);
    ConvergenceRow& row = report.rows[i];
    row.l2_error = err.l2;
    row.h1_error = err.h1_semi;
    row.h1_norm = field_norms(u).h1_semi;
    row.runtime = seconds_since(t1);
    row.completed = true;
  });
  report.homogenized_seconds = shared_hom ? shared_hom->stats.seconds : 0.0;
  for (double t : hom_seconds) report.homogenized_seconds += t;
  report.budget_exceeded = exceeded;

  std::vector<const ConvergenceRow*> done;
  for (const auto& r : report.rows)
    if (r.completed) done.push_back(&r);
  report.monotone = done.size() >= 2;
  for (std::size_t i = 1; i < done.size(); ++i) report.monotone &= done[i]->l2_error < done[i - 1]->l2_error;
  if (!done.empty()) {
    report.final_ratio = done.front()->l2_error > 0 ? done.back()->l2_error / done.front()->l2_error : 0.0;
    double lo = done.front()->h1_norm, hi = lo;
    for (const auto* r : done) {
      lo = std::min(lo, r->h1_norm);
      hi = std::max(hi, r->h1_norm);
    }
    report.h1_band = lo > 0 ? hi / lo : 0.0;
  }
  return report;
}

std::string convergence_csv(const ConvergenceReport& report) {
  std::ostringstream os;
  os << "eps,cells,completed,l2_error,h1_error,h1_norm\n";
  for (const auto& r : report.rows)
    os << fmt(r.eps) << ',' << r.cells << ',' << (r.completed ? 1 : 0) << ',' << fmt(r.l2_error) << ','
       << fmt(r.h1_error) << ',' << fmt(r.h1_norm) << '\n';
  return os.str();
}

std::string convergence_timing_csv(const ConvergenceReport& report) {
  std::ostringstream os;
  os << "eps,runtime_s\n";
  for (const auto& r : report.rows) os << fmt(r.eps) << ',' << fmt(r.runtime) << '\n';
  return os.str();
}

void write_displacement(const DisplacementField& u, const std::string& prefix) {
  const std::string bin = prefix + ".bin";
  std::string bin_name = bin;
  if (auto pos = bin.find_last_of('/'); pos != std::string::npos) bin_name = bin.substr(pos + 1);
  const MacroMesh& m = *u.mesh;
  nlohmann::json j;
  j["dim"] = m.dim();
  j["domain"] = box_to_json(m.box());
  j["cells"] = std::vector<int>(m.cells().begin(), m.cells().begin() + m.dim());
  j["node_order"] = "first index fastest; dim components per node";
  j["dtype"] = "float64-le";
  j["count"] = u.values.size();
  j["energy"] = u.stats.energy;
  j["residual"] = u.stats.residual;
  j["data"] = bin_name;
  std::ofstream h(prefix + ".json");
  if (!h) throw InputError("cannot write " + prefix + ".json");
  h << j.dump(2) << "\n";
  std::ofstream b(bin, std::ios::binary);
  if (!b) throw InputError("cannot write " + bin);
  b.write(reinterpret_cast<const char*>(u.values.data()), static_cast<std::streamsize>(u.values.size() * sizeof(double)));
}

DisplacementField read_displacement(const std::string& prefix) {
  std::ifstream h(prefix + ".json");
  if (!h) throw InputError("cannot read " + prefix + ".json");
  const nlohmann::json j = nlohmann::json::parse(h);
  const Box box = box_from_json(j.at("domain"));
  const auto c = j.at("cells").get<std::vector<int>>();
  std::array<int, 3> cells{1, 1, 1};
  for (std::size_t d = 0; d < c.size() && d < 3; ++d) cells[d] = c[d];
  DisplacementField u;
  u.mesh = std::make_shared<const MacroMesh>(box, cells);
  const auto count = j.at("count").get<Eigen::Index>();
  if (count != u.mesh->num_dofs()) throw InputError("displacement dump: count does not match the mesh");
  u.values.resize(count);
  std::ifstream b(prefix + ".bin", std::ios::binary);
  if (!b) throw InputError("cannot read " + prefix + ".bin");
  b.read(reinterpret_cast<char*>(u.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!b) throw InputError("displacement dump: truncated payload");
  u.stats.energy = j.value("energy", 0.0);
  u.stats.residual = j.value("residual", 0.0);
  return u;
}

}  // namespace lph
