#pragma once

#include <vector>

#include "actcomp/tensor.hpp"

namespace actcomp {

// Singular-value summary of a matrix. singular_values is non-increasing;
// cumulative_mass[i] is the fraction of the total singular-value sum carried
// by the first i+1 values, so it is non-decreasing in [0,1] and ends at 1.
// A zero matrix yields all-zero singular values and, by convention, an
// all-ones mass curve.
struct SpectrumCurve {
    std::vector<double> singular_values;
    std::vector<double> cumulative_mass;
};

// Full singular spectrum of a rank-2 tensor, computed in double via a cyclic
// Jacobi eigendecomposition of the smaller Gram matrix. Extents are capped at
// 2048 per side; this is a measurement tool, not a production solver.
SpectrumCurve singular_spectrum(const Tensor& x);
SpectrumCurve singular_spectrum(const TensorD& x);

} // namespace actcomp
