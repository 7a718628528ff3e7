#include "lphom/fields.hpp"

#include <algorithm>
#include <cmath>

#include "lphom/error.hpp"
#include "lphom/micro_synth.hpp"

namespace lph {

double Box::volume() const {
  double v = 1;
  for (int d = 0; d < dim; ++d) v *= extent(d);
  return v;
}

bool Box::contains(const Point& x, double tol) const {
  for (int d = 0; d < dim; ++d)
    if (x[d] < lo[d] - tol || x[d] > hi[d] + tol) return false;
  return true;
}

Point Box::center() const {
  Point c{0, 0, 0};
  for (int d = 0; d < dim; ++d) c[d] = 0.5 * (lo[d] + hi[d]);
  return c;
}

Box unit_box(int dim) {
  check_dim(dim);
  Box b;
  b.dim = dim;
  b.lo = {0, 0, 0};
  b.hi = {1, 1, dim == 3 ? 1.0 : 0.0};
  return b;
}

Box box_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items())
    if (key != "lo" && key != "hi") throw InputError("domain: unknown key '" + key + "'");
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw InputError("domain: lo and hi differ in length");
  Box b;
  b.dim = static_cast<int>(lo.size());
  check_dim(b.dim);
  b.hi = {0, 0, 0};
  for (int d = 0; d < b.dim; ++d) {
    b.lo[d] = lo[d];
    b.hi[d] = hi[d];
    if (!(hi[d] > lo[d])) throw InputError("domain: need hi > lo in every direction");
  }
  return b;
}

nlohmann::json box_to_json(const Box& b) {
  return {{"lo", std::vector<double>(b.lo.begin(), b.lo.begin() + b.dim)},
          {"hi", std::vector<double>(b.hi.begin(), b.hi.begin() + b.dim)}};
}

namespace {

std::vector<double> head(const Point& p, int n) { return std::vector<double>(p.begin(), p.begin() + n); }

double dotn(const Point& a, const Point& x, int n) {
  double s = 0;
  for (int d = 0; d < n; ++d) s += a[d] * x[d];
  return s;
}

Point point_from_json(const nlohmann::json& j, int n, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<int>(v.size()) != n) throw InputError(std::string(what) + ": expected " + std::to_string(n) + " entries");
  Point p{0, 0, 0};
  for (int d = 0; d < n; ++d) p[d] = v[d];
  return p;
}

Tensor2 tensor_from_rows(const nlohmann::json& j, int n, const char* what) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != n) throw InputError(std::string(what) + ": wrong number of rows");
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != n) throw InputError(std::string(what) + ": wrong row length");
  return Tensor2::from_rows(rows);
}

nlohmann::json tensor_rows(const Tensor2& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < t.dim(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < t.dim(); ++j) r.push_back(t(i, j));
    rows.push_back(r);
  }
  return rows;
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    bool ok = key == "kind";
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw InputError("field '" + j.value("kind", std::string("?")) + "': unknown key '" + key + "'");
  }
}

}  // namespace

FieldPtr constant_field(const Tensor2& value) {
  if (!value.is_finite()) throw InputError("constant field: non-finite value");
  return std::make_shared<const TransformField>(
      value.dim(), [value](const Point&) { return value; },
      nlohmann::json{{"kind", "constant"}, {"value", tensor_rows(value)}});
}

FieldPtr rotation_field(int dim, const Point& a, double b, double scale, const Point& axis) {
  check_dim(dim);
  if (!(scale > 0)) throw InputError("rotation field: scale must be positive");
  nlohmann::json spec{{"kind", "rotation"}, {"a", head(a, dim)}, {"b", b}, {"scale", scale}};
  if (dim == 3) spec["axis"] = head(axis, 3);
  return std::make_shared<const TransformField>(
      dim,
      [=](const Point& x) {
        const double th = dotn(a, x, dim) + b;
        return scale * (dim == 2 ? Tensor2::rotation(2, th) : Tensor2::rotation_about(axis, th));
      },
      spec);
}

FieldPtr shear_field(int dim, double gamma, const Point& g, int i, int j) {
  check_dim(dim);
  if (i == j || i < 0 || j < 0 || i >= dim || j >= dim) throw InputError("shear field: need distinct i, j < dim");
  return std::make_shared<const TransformField>(
      dim,
      [=](const Point& x) {
        Tensor2 t = Tensor2::identity(dim);
        t(i, j) += gamma + dotn(g, x, dim);
        return t;
      },
      nlohmann::json{{"kind", "shear"}, {"gamma", gamma}, {"gradient", head(g, dim)}, {"i", i}, {"j", j}});
}

FieldPtr isotropic_linear_field(int dim, double c0, const Point& c) {
  check_dim(dim);
  return std::make_shared<const TransformField>(
      dim, [=](const Point& x) { return (c0 + dotn(c, x, dim)) * Tensor2::identity(dim); },
      nlohmann::json{{"kind", "isotropic_linear"}, {"c0", c0}, {"c", head(c, dim)}});
}

FieldPtr grid_field(const Box& box, const std::array<int, 3>& counts, std::vector<Tensor2> values) {
  const int n = box.dim;
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) {
    if (counts[d] < 2) throw InputError("grid field: need at least 2 samples per axis");
    total *= static_cast<std::size_t>(counts[d]);
  }
  if (values.size() != total) throw InputError("grid field: value count does not match the grid");
  for (const auto& v : values)
    if (v.dim() != n || !v.is_finite()) throw InputError("grid field: bad sample value");
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : values) vals.push_back(tensor_rows(v));
  nlohmann::json spec{{"kind", "grid"}, {"domain", box_to_json(box)},
                      {"counts", std::vector<int>(counts.begin(), counts.begin() + n)}, {"values", vals}};
  auto data = std::make_shared<const std::vector<Tensor2>>(std::move(values));
  return std::make_shared<const TransformField>(
      n,
      [box, counts, data, n](const Point& x) {
        std::array<int, 3> i0{0, 0, 0};
        std::array<double, 3> t{0, 0, 0};
        for (int d = 0; d < n; ++d) {
          const double s = std::clamp((x[d] - box.lo[d]) / box.extent(d), 0.0, 1.0) * (counts[d] - 1);
          i0[d] = std::min(static_cast<int>(std::floor(s)), counts[d] - 2);
          t[d] = s - i0[d];
        }
        Tensor2 out(n);
        for (int corner = 0; corner < (1 << n); ++corner) {
          double w = 1;
          std::size_t lin = 0, stride = 1;
          for (int d = 0; d < n; ++d) {
            const int o = (corner >> d) & 1;
            w *= o ? t[d] : 1 - t[d];
            lin += static_cast<std::size_t>(i0[d] + o) * stride;
            stride *= counts[d];
          }
          if (w != 0.0) out += w * (*data)[lin];
        }
        return out;
      },
      spec);
}

FieldPtr derived_from_L_field(FieldPtr L, double step) {
  if (!L) throw InputError("derived field: null L");
  if (!(step > 0)) throw InputError("derived field: step must be positive");
  nlohmann::json spec{{"kind", "derived_from_L"}, {"L", L->spec()}, {"step", step}};
  const int n = L->dim();
  return std::make_shared<const TransformField>(
      n, [L, step](const Point& x) { return derive_H_from_L(*L, x, step); }, spec);
}

FieldPtr function_field(int dim, std::function<Tensor2(const Point&)> f, const std::string& name) {
  check_dim(dim);
  return std::make_shared<const TransformField>(dim, std::move(f), nlohmann::json{{"kind", "function"}, {"name", name}});
}

FieldPtr field_from_json(const nlohmann::json& j, int dim) {
  check_dim(dim);
  if (!j.is_object()) throw InputError("field: expected an object");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    check_keys(j, {"value"});
    return constant_field(tensor_from_rows(j.at("value"), dim, "constant field value"));
  }
  if (kind == "rotation") {
    check_keys(j, {"a", "b", "scale", "axis"});
    Point a{0, 0, 0};
    if (j.contains("a")) a = point_from_json(j.at("a"), dim, "rotation field a");
    Point axis{0, 0, 1};
    if (j.contains("axis")) {
      if (dim != 3) throw InputError("rotation field: axis is only meaningful in 3D");
      axis = point_from_json(j.at("axis"), 3, "rotation field axis");
    }
    return rotation_field(dim, a, j.value("b", 0.0), j.value("scale", 1.0), axis);
  }
  if (kind == "shear") {
    check_keys(j, {"gamma", "gradient", "i", "j"});
    Point g{0, 0, 0};
    if (j.contains("gradient")) g = point_from_json(j.at("gradient"), dim, "shear field gradient");
    return shear_field(dim, j.value("gamma", 0.0), g, j.value("i", 0), j.value("j", 1));
  }
  if (kind == "isotropic_linear") {
    check_keys(j, {"c0", "c"});
    Point c{0, 0, 0};
    if (j.contains("c")) c = point_from_json(j.at("c"), dim, "isotropic_linear c");
    return isotropic_linear_field(dim, j.value("c0", 1.0), c);
  }
  if (kind == "grid") {
    check_keys(j, {"domain", "counts", "values"});
    const Box box = box_from_json(j.at("domain"));
    if (box.dim != dim) throw InputError("grid field: domain dimension mismatch");
    const auto c = j.at("counts").get<std::vector<int>>();
    if (static_cast<int>(c.size()) != dim) throw InputError("grid field: counts must have dim entries");
    std::array<int, 3> counts{1, 1, 1};
    for (int d = 0; d < dim; ++d) counts[d] = c[d];
    std::vector<Tensor2> values;
    for (const auto& v : j.at("values")) values.push_back(tensor_from_rows(v, dim, "grid field value"));
    return grid_field(box, counts, std::move(values));
  }
  if (kind == "derived_from_L") {
    check_keys(j, {"L", "step"});
    return derived_from_L_field(field_from_json(j.at("L"), dim), j.value("step", 1e-5));
  }
  throw InputError("unknown field kind '" + kind + "'");
}

std::vector<Point> box_grid_points(const Box& box, int per_axis) {
  if (per_axis < 2) throw InputError("box grid: need at least 2 points per axis");
  std::vector<Point> pts;
  const int n = box.dim;
  int total = 1;
  for (int d = 0; d < n; ++d) total *= per_axis;
  for (int k = 0; k < total; ++k) {
    Point p{0, 0, 0};
    int rest = k;
    for (int d = 0; d < n; ++d) {
      const int i = rest % per_axis;
      rest /= per_axis;
      p[d] = box.lo[d] + box.extent(d) * i / (per_axis - 1);
    }
    pts.push_back(p);
  }
  return pts;
}

double max_field_mismatch(const TransformField& a, const TransformField& b, const Box& box, int per_axis) {
  if (a.dim() != b.dim() || a.dim() != box.dim) throw InputError("field mismatch: dimension mismatch");
  double worst = 0;
  for (const Point& x : box_grid_points(box, per_axis)) {
    const Tensor2 bv = b(x);
    worst = std::max(worst, (a(x) - bv).max_abs() / std::max(1.0, bv.max_abs()));
  }
  return worst;
}

}  // namespace lph
