#pragma once

// Macroscale domains and the tensor-valued maps x -> H_x, K_x over them.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lphom/tensor.hpp"

namespace lph {

/// Axis-aligned box (lo, hi) in dimension 2 or 3.
struct Box {
  int dim = 2;
  Point lo{0, 0, 0};
  Point hi{1, 1, 1};

  double volume() const;
  double extent(int d) const { return hi[d] - lo[d]; }
  bool contains(const Point& x, double tol = 0.0) const;
  Point center() const;
};

Box unit_box(int dim);
Box box_from_json(const nlohmann::json& j);
nlohmann::json box_to_json(const Box& b);

/// x -> Tensor2 with a JSON description that reproduces it.
class TransformField {
 public:
  TransformField(int dim, std::function<Tensor2(const Point&)> eval, nlohmann::json spec)
      : dim_(dim), eval_(std::move(eval)), spec_(std::move(spec)) {}

  int dim() const { return dim_; }
  Tensor2 operator()(const Point& x) const { return eval_(x); }
  const nlohmann::json& spec() const { return spec_; }

 private:
  int dim_;
  std::function<Tensor2(const Point&)> eval_;
  nlohmann::json spec_;
};

using FieldPtr = std::shared_ptr<const TransformField>;

FieldPtr constant_field(const Tensor2& value);
/// scale * Q(theta(x)), theta(x) = a . x + b. In 3D the rotation is about `axis`.
FieldPtr rotation_field(int dim, const Point& a, double b, double scale = 1.0, const Point& axis = {0, 0, 1});
/// 1 + (gamma + g . x) e_i (x) e_j, i != j.
FieldPtr shear_field(int dim, double gamma, const Point& g, int i = 0, int j = 1);
/// (c0 + c . x) * 1.
FieldPtr isotropic_linear_field(int dim, double c0, const Point& c);
/// Multilinear interpolation of nodal values on a counts[0] x counts[1] (x counts[2])
/// grid over `box`, first index fastest. Queries outside the box are clamped.
FieldPtr grid_field(const Box& box, const std::array<int, 3>& counts, std::vector<Tensor2> values);
/// H_x from a nonperiodic lattice map L_x by finite differences of x -> L_x^{-1} x.
FieldPtr derived_from_L_field(FieldPtr L, double step = 1e-5);
/// Arbitrary callable; its JSON description records only `name`.
FieldPtr function_field(int dim, std::function<Tensor2(const Point&)> f, const std::string& name);

/// Parses {"kind": "constant"|"rotation"|"shear"|"isotropic_linear"|"grid"|"derived_from_L", ...}.
/// Unknown keys are rejected.
FieldPtr field_from_json(const nlohmann::json& j, int dim);

/// Largest |A(x) - B(x)| / max(1, |B(x)|) over a regular probe grid of `box`.
double max_field_mismatch(const TransformField& a, const TransformField& b, const Box& box, int per_axis = 9);

/// Regular grid of points per_axis^dim covering the box including its faces.
std::vector<Point> box_grid_points(const Box& box, int per_axis);

}  // namespace lph
