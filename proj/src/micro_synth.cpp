#include "lphom/micro_synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lphom/error.hpp"

namespace lph {

PatchDecomposition::PatchDecomposition(const Box& domain, double eps, double r, FieldPtr H,
                                       const AnchorOptions& anchors)
    : domain_(domain), eps_(eps), r_(r), H_(std::move(H)) {
  const int n = domain_.dim;
  check_dim(n);
  if (!(eps > 0 && eps < 1)) throw InputError("decompose: eps must lie in (0,1)");
  if (!(r > 0 && r < 1)) throw InputError("decompose: r must lie in (0,1)");
  size_ = std::pow(eps, r);
  if (!(size_ > eps))
    throw InputError("decompose: patch size eps^r must exceed the period eps, otherwise a patch holds no full cell");
  if (!H_) throw InputError("decompose: H field required");
  if (H_->dim() != n) throw InputError("decompose: H field dimension mismatch");
  if (anchors.rule == AnchorRule::LatticeAligned && !anchors.L)
    throw InputError("decompose: lattice-aligned anchors need the lattice map L");
  if (anchors.rule == AnchorRule::Custom && !anchors.custom) throw InputError("decompose: custom anchor rule missing");

  std::size_t total = 1;
  for (int d = 0; d < n; ++d) {
    kmin_[d] = static_cast<int>(std::floor(domain_.lo[d] / size_));
    kmax_[d] = static_cast<int>(std::ceil(domain_.hi[d] / size_ - 1e-12)) - 1;
    counts_[d] = kmax_[d] - kmin_[d] + 1;
    total *= static_cast<std::size_t>(counts_[d]);
  }
  static constexpr double kInsideTol = 1e-12;
  for (std::size_t lin = 0; lin < total; ++lin) {
    Patch p;
    std::size_t rest = lin;
    Point center{0, 0, 0};
    for (int d = 0; d < n; ++d) {
      p.k[d] = kmin_[d] + static_cast<int>(rest % counts_[d]);
      rest /= counts_[d];
      p.lo[d] = size_ * p.k[d];
      p.hi[d] = size_ * (p.k[d] + 1);
      center[d] = 0.5 * (p.lo[d] + p.hi[d]);
    }
    switch (anchors.rule) {
      case AnchorRule::Center:
        p.anchor = p.shift = center;
        break;
      case AnchorRule::Offset:
        for (int d = 0; d < n; ++d) p.anchor[d] = p.lo[d] + anchors.offset[d] * size_;
        p.shift = p.anchor;
        break;
      case AnchorRule::LatticeAligned:
        p.anchor = center;
        break;
      case AnchorRule::Custom: {
        const auto [a, s] = anchors.custom(p);
        p.anchor = a;
        p.shift = s;
        break;
      }
    }
    p.H = (*H_)(p.anchor);
    if (!p.H.is_invertible()) throw InputError("decompose: H singular at a patch anchor");
    p.H_inv = p.H.inverse();
    if (anchors.rule == AnchorRule::LatticeAligned) {
      // Snap the cell origin to the nearest lattice point of g(x) = L_x^{-1} x / eps.
      const Point z = (*anchors.L)(p.anchor).inverse().apply(p.anchor);
      Point frac{0, 0, 0};
      for (int d = 0; d < n; ++d) frac[d] = z[d] / eps_ - std::round(z[d] / eps_);
      const Point hz = p.H.apply(frac);
      for (int d = 0; d < n; ++d) p.shift[d] = p.anchor[d] - eps_ * hz[d];
    }
    for (int d = 0; d < n; ++d) {
      if (p.anchor[d] < p.lo[d] - kInsideTol || p.anchor[d] > p.hi[d] + kInsideTol ||
          p.shift[d] < p.lo[d] - kInsideTol || p.shift[d] > p.hi[d] + kInsideTol)
        throw InputError("decompose: anchor outside its patch");
    }
    patches_.push_back(p);
  }
}

int PatchDecomposition::patch_index(const Point& x) const {
  const int n = domain_.dim;
  std::size_t lin = 0, stride = 1;
  for (int d = 0; d < n; ++d) {
    int k = static_cast<int>(std::floor(x[d] / size_));
    if (k > kmax_[d] && x[d] <= domain_.hi[d] + 1e-12) k = kmax_[d];
    if (k < kmin_[d] && x[d] >= domain_.lo[d] - 1e-12) k = kmin_[d];
    if (k < kmin_[d] || k > kmax_[d]) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "point (%g, %g, %g) lies in no patch", x[0], x[1], x[2]);
      throw InputError(msg);
    }
    lin += static_cast<std::size_t>(k - kmin_[d]) * stride;
    stride *= counts_[d];
  }
  return static_cast<int>(lin);
}

Point PatchDecomposition::cell_point(const Point& x) const {
  const Patch& p = patches_[patch_index(x)];
  Point dx{0, 0, 0};
  for (int d = 0; d < domain_.dim; ++d) dx[d] = (x[d] - p.shift[d]) / eps_;
  return p.H_inv.apply(dx);
}

std::shared_ptr<const PatchDecomposition> decompose(const Box& domain, double eps, double r, FieldPtr H,
                                                    const AnchorOptions& anchors) {
  return std::make_shared<const PatchDecomposition>(domain, eps, r, std::move(H), anchors);
}

// --- MicroField ------------------------------------------------------------------

MicroField::MicroField(std::shared_ptr<const CellMaterial> material, FieldPtr K,
                       std::shared_ptr<const PatchDecomposition> dec)
    : material_(std::move(material)), K_(std::move(K)), dec_(std::move(dec)) {
  if (!material_ || !K_ || !dec_) throw InputError("micro field: null argument");
  if (material_->dim() != dec_->dim() || K_->dim() != dec_->dim()) throw InputError("micro field: dimension mismatch");
  for (const Patch& p : dec_->patches()) {
    const Tensor2 K = (*K_)(p.anchor);
    for (const Phase& ph : material_->phases()) {
      elasticity_.push_back(apply_transform_elasticity(ph.elasticity, K));
      residual_.push_back(residual_pushforward(ph.residual, K));
      max_stiffness_ = std::max(max_stiffness_, elasticity_.back().max_abs());
    }
  }
}

MicroSample MicroField::sample(const Point& x) const {
  MicroSample s;
  s.patch = dec_->patch_index(x);
  s.y = dec_->cell_point(x);
  s.phase = material_->phase_at(s.y);
  const std::size_t slot = static_cast<std::size_t>(s.patch) * material_->num_phases() + s.phase;
  s.elasticity = elasticity_[slot];
  s.residual = residual_[slot];
  return s;
}

std::shared_ptr<const MicroField> synth_microstructure(std::shared_ptr<const CellMaterial> material, FieldPtr K,
                                                       std::shared_ptr<const PatchDecomposition> dec) {
  return std::make_shared<const MicroField>(std::move(material), std::move(K), std::move(dec));
}

// --- lattice maps ---------------------------------------------------------------------

namespace {

Point lattice_g(const TransformField& L, const Point& x) { return L(x).inverse().apply(x); }

Tensor2 fd_jacobian(const TransformField& L, const Point& x, double step) {
  const int n = L.dim();
  Tensor2 J(n);
  for (int k = 0; k < n; ++k) {
    const double h = step * std::max(1.0, std::abs(x[k]));
    Point xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Point gp = lattice_g(L, xp), gm = lattice_g(L, xm);
    for (int i = 0; i < n; ++i) J(i, k) = (gp[i] - gm[i]) / (2 * h);
  }
  return J;
}

Tensor2 checked_inverse(const Tensor2& J) {
  const double cond = J.condition_number();
  if (!(cond < 1e12)) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "derive_H_from_L: lattice Jacobian numerically singular (condition %.3e)", cond);
    throw InputError(msg);
  }
  return J.inverse();
}

}  // namespace

Tensor2 derive_H_from_L(const TransformField& L, const Point& x, double step) {
  if (!(step > 0)) throw InputError("derive_H_from_L: step must be positive");
  return checked_inverse(fd_jacobian(L, x, step));
}

Tensor2 derive_H_from_L(const TransformField& L, const LGradient& dL, const Point& x) {
  const int n = L.dim();
  const Tensor2 Li = L(x).inverse();
  const Point lx = Li.apply(x);
  Tensor2 J(n);
  for (int k = 0; k < n; ++k) {
    // d/dx_k (L^{-1} x) = L^{-1} e_k - L^{-1} (dL/dx_k) L^{-1} x.
    const Point corr = (Li * dL(x, k)).apply(lx);
    for (int i = 0; i < n; ++i) J(i, k) = Li(i, k) - corr[i];
  }
  return checked_inverse(J);
}

double lattice_jacobian_condition(const TransformField& L, const Point& x, double step) {
  return fd_jacobian(L, x, step).condition_number();
}

// --- nonperiodic reference ----------------------------------------------------------

NonperiodicField::NonperiodicField(std::shared_ptr<const CellMaterial> material, FieldPtr L, FieldPtr M, double eps)
    : material_(std::move(material)), L_(std::move(L)), M_(std::move(M)), eps_(eps) {
  if (!material_ || !L_ || !M_) throw InputError("nonperiodic field: null argument");
  if (!(eps > 0 && eps < 1)) throw InputError("nonperiodic field: eps must lie in (0,1)");
}

MicroSample NonperiodicField::sample(const Point& x) const {
  MicroSample s;
  const int n = material_->dim();
  const Point g = (*L_)(x).inverse().apply(x);
  for (int d = 0; d < n; ++d) s.y[d] = g[d] / eps_;
  s.phase = material_->phase_at(s.y);
  const Tensor2 M = (*M_)(x);
  const Phase& ph = material_->phase(s.phase);
  s.elasticity = apply_transform_elasticity(ph.elasticity, M);
  s.residual = residual_pushforward(ph.residual, M);
  return s;
}

FieldDifference field_l2_difference(const MicroField& a, const NonperiodicField& b, const Box& box, int per_axis) {
  if (per_axis < 1) throw InputError("field difference: need at least one sample per axis");
  const int n = box.dim;
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);
  double ce = 0, se = 0;
  std::size_t mismatched = 0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    Point x{0, 0, 0};
    std::size_t rest = lin;
    for (int d = 0; d < n; ++d) {
      const std::size_t i = rest % per_axis;
      rest /= per_axis;
      x[d] = box.lo[d] + box.extent(d) * (i + 0.5) / per_axis;
    }
    const MicroSample sa = a.sample(x), sb = b.sample(x);
    const double dc = (sa.elasticity - sb.elasticity).norm();
    const double ds = (sa.residual - sb.residual).norm();
    ce += dc * dc;
    se += ds * ds;
    mismatched += sa.phase != sb.phase;
  }
  const double w = box.volume() / static_cast<double>(total);
  return {std::sqrt(ce * w), std::sqrt(se * w), static_cast<double>(mismatched) / static_cast<double>(total)};
}

void write_micro_voxels(const MicroField& field, const Box& box, const std::array<int, 3>& counts,
                        const std::string& prefix) {
  const int n = box.dim;
  const int m = sym_size(n);
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) {
    if (counts[d] < 1) throw InputError("voxel export: counts must be positive");
    total *= static_cast<std::size_t>(counts[d]);
  }
  std::vector<double> data;
  data.reserve(total * (m * m + m));
  for (std::size_t lin = 0; lin < total; ++lin) {
    Point x{0, 0, 0};
    std::size_t rest = lin;
    for (int d = 0; d < n; ++d) {
      const std::size_t i = rest % counts[d];
      rest /= counts[d];
      x[d] = box.lo[d] + box.extent(d) * (i + 0.5) / counts[d];
    }
    const MicroSample s = field.sample(x);
    const Eigen::MatrixXd c = s.elasticity.voigt();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) data.push_back(c(i, j));
    const Eigen::VectorXd r = s.residual.voigt();
    for (int i = 0; i < m; ++i) data.push_back(r[i]);
  }
  std::string bin_name = prefix + ".bin";
  if (auto pos = bin_name.find_last_of('/'); pos != std::string::npos) bin_name = bin_name.substr(pos + 1);
  nlohmann::json h{{"dims", std::vector<int>(counts.begin(), counts.begin() + n)},
                   {"domain", box_to_json(box)},
                   {"eps", field.eps()},
                   {"voxel_order", "first index fastest, samples at voxel centers"},
                   {"layout", "elasticity Voigt matrix row-major, then residual stress Voigt vector"},
                   {"components_per_voxel", m * m + m},
                   {"dtype", "float64-le"},
                   {"data", bin_name}};
  std::ofstream(prefix + ".json") << h.dump(2) << "\n";
  std::ofstream b(prefix + ".bin", std::ios::binary);
  if (!b) throw InputError("cannot write " + prefix + ".bin");
  b.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
}

}  // namespace lph
