#include "lphom/q1.hpp"

#include <cmath>
#include <mutex>

#include "lphom/error.hpp"

namespace lph {

namespace {

Q1Reference build(int dim, int ppa) {
  std::vector<double> xi, w;
  if (ppa == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    xi = {0.5 - d, 0.5 + d};
    w = {0.5, 0.5};
  } else if (ppa == 3) {
    const double d = 0.5 * std::sqrt(0.6);
    xi = {0.5 - d, 0.5, 0.5 + d};
    w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  } else {
    throw InputError("q1_reference: points_per_axis must be 2 or 3");
  }

  Q1Reference r;
  r.dim = dim;
  r.nodes = 1 << dim;
  r.points_per_axis = ppa;
  int total = 1;
  for (int d = 0; d < dim; ++d) total *= ppa;
  for (int q = 0; q < total; ++q) {
    Point p{0, 0, 0};
    double wq = 1;
    int rest = q;
    for (int d = 0; d < dim; ++d) {
      const int k = rest % ppa;
      rest /= ppa;
      p[d] = xi[k];
      wq *= w[k];
    }
    r.points.push_back(p);
    r.weights.push_back(wq);

    std::vector<double> n(r.nodes);
    std::vector<Point> g(r.nodes, Point{0, 0, 0});
    for (int a = 0; a < r.nodes; ++a) {
      double val = 1;
      for (int d = 0; d < dim; ++d) val *= Q1Reference::offset(a, d) ? p[d] : 1 - p[d];
      n[a] = val;
      for (int d = 0; d < dim; ++d) {
        double gd = Q1Reference::offset(a, d) ? 1.0 : -1.0;
        for (int e = 0; e < dim; ++e)
          if (e != d) gd *= Q1Reference::offset(a, e) ? p[e] : 1 - p[e];
        g[a][d] = gd;
      }
    }
    r.shape.push_back(n);
    r.grad.push_back(g);
  }
  r.mean_grad.assign(r.nodes, Point{0, 0, 0});
  for (int q = 0; q < total; ++q)
    for (int a = 0; a < r.nodes; ++a)
      for (int d = 0; d < dim; ++d) r.mean_grad[a][d] += r.weights[q] * r.grad[q][a][d];
  return r;
}

}  // namespace

const Q1Reference& q1_reference(int dim, int points_per_axis) {
  check_dim(dim);
  static std::once_flag once;
  static std::array<std::array<Q1Reference, 2>, 2> table;
  std::call_once(once, [] {
    for (int d = 2; d <= 3; ++d)
      for (int p = 2; p <= 3; ++p) table[d - 2][p - 2] = build(d, p);
  });
  if (points_per_axis < 2 || points_per_axis > 3) throw InputError("q1_reference: points_per_axis must be 2 or 3");
  return table[dim - 2][points_per_axis - 2];
}

}  // namespace lph
