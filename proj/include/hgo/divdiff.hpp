#pragma once

#include "hgo/linalg.hpp"
#include "hgo/model.hpp"

#include <span>
#include <vector>

namespace hgo {

// Divided difference of f_i in its j-th state slot,
//   delta_{i,j}(t, y, x_2..x_m, e_2..e_j)
// with m = min(i+1, n). Preceding slots are shifted by their error
// components, so that the coefficients telescope the row difference
//   f_i(t,y,x_2..x_m) - f_i(t,y,z_2..z_m) = sum_j delta_{i,j} (x_j - z_j).
// Defined as exactly 0 when e_j = 0.
double delta(const TriangularSystem& sys, int i, int j, double t, double y,
             std::span<const double> x_tail, std::span<const double> e);

struct DifferenceDecomposition {
    int i = 0;
    std::vector<double> coeffs; // delta_{i,j} for j = 2..min(i+1, n)
    double apply(std::span<const double> e_tail) const {
        double acc = 0.0;
        for (size_t k = 0; k < coeffs.size(); ++k) acc += coeffs[k] * e_tail[k];
        return acc;
    }
};

DifferenceDecomposition decompose(const TriangularSystem& sys, int i, double t, double y,
                                  std::span<const double> x_tail,
                                  std::span<const double> z_tail);

// Level-k system matrix: lower triangle from the perturbation block
// q_{n-k+i, n-k+j} (row-major, j <= i within the block), superdiagonal from
// the divided differences with the level-k error vector zero-padded into the
// global slots, zeros elsewhere. k = n gives the full matrix.
Mat assemble_A(const TriangularSystem& sys, int k, double t, std::span<const double> q_lower,
               std::span<const double> x, std::span<const double> e_level, double y);

// number of lower-triangle entries at level k
inline int q_lower_size(int k) { return k * (k + 1) / 2; }

} // namespace hgo
