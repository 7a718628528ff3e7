#pragma once

// Multilinear (Q1) reference element on [0,1]^n with tensor Gauss rules.
// Local node a sits at the corner with offsets (a & 1, (a >> 1) & 1, (a >> 2) & 1).

#include <array>
#include <vector>

#include "lphom/tensor.hpp"

namespace lph {

struct Q1Reference {
  int dim = 2;
  int nodes = 4;
  int points_per_axis = 2;
  std::vector<Point> points;               // quadrature points in [0,1]^n
  std::vector<double> weights;             // sum to 1
  std::vector<std::vector<double>> shape;  // shape[q][a]
  std::vector<std::vector<Point>> grad;    // grad[q][a], unit-cube gradient
  std::vector<Point> mean_grad;            // element average of grad N_a

  static int offset(int a, int d) { return (a >> d) & 1; }
};

/// Cached reference data; points_per_axis is 2 (exact for Q1 stiffness) or 3.
const Q1Reference& q1_reference(int dim, int points_per_axis = 2);

}  // namespace lph
