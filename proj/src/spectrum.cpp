#include "actcomp/spectrum.hpp"

#include <algorithm>
#include <cmath>

namespace actcomp {
namespace {

constexpr size_t kMaxExtent = 2048;

double offdiag_frobenius_sq(const std::vector<double>& a, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (i != j) s += a[i * n + j] * a[i * n + j];
    return s;
}

double frobenius_sq(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

// Cyclic Jacobi sweeps on a symmetric matrix, in place. Stops once the
// off-diagonal Frobenius mass falls below 1e-12 of the matrix norm, or after
// 30 sweeps. Returns the diagonal (unsorted eigenvalues).
std::vector<double> jacobi_eigenvalues(std::vector<double> a, size_t n) {
    const double norm = std::sqrt(frobenius_sq(a));
    const double stop = 1e-12 * std::max(norm, 1e-300);
    for (int sweep = 0; sweep < 30; ++sweep) {
        if (std::sqrt(offdiag_frobenius_sq(a, n)) <= stop) break;
        for (size_t p = 0; p + 1 < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (apq == 0.0) continue;
                double app = a[p * n + p];
                double aqq = a[q * n + q];
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p];
                    double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k];
                    double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> diag(n);
    for (size_t i = 0; i < n; ++i) diag[i] = a[i * n + i];
    return diag;
}

template <typename Real>
SpectrumCurve spectrum_impl(const TensorT<Real>& x) {
    if (x.rank() != 2) {
        throw dimension_error("singular_spectrum: rank-2 tensor required, got " +
                              x.shape_string());
    }
    size_t m = x.extent(0), n = x.extent(1);
    if (m > kMaxExtent || n > kMaxExtent) {
        throw dimension_error("singular_spectrum: extents capped at " +
                              std::to_string(kMaxExtent) + ", got " + x.shape_string());
    }

    // Gram matrix of the smaller side: X^T X (n x n) or X X^T (m x m).
    size_t g = std::min(m, n);
    std::vector<double> gram(g * g, 0.0);
    if (n <= m) {
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (size_t r = 0; r < m; ++r) {
                    s += static_cast<double>(x[r * n + i]) * static_cast<double>(x[r * n + j]);
                }
                gram[i * n + j] = gram[j * n + i] = s;
            }
        }
    } else {
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = i; j < m; ++j) {
                double s = 0.0;
                for (size_t c = 0; c < n; ++c) {
                    s += static_cast<double>(x[i * n + c]) * static_cast<double>(x[j * n + c]);
                }
                gram[i * m + j] = gram[j * m + i] = s;
            }
        }
    }

    std::vector<double> eig = jacobi_eigenvalues(std::move(gram), g);
    SpectrumCurve curve;
    curve.singular_values.resize(g);
    for (size_t i = 0; i < g; ++i) {
        curve.singular_values[i] = std::sqrt(std::max(eig[i], 0.0));
    }
    std::sort(curve.singular_values.begin(), curve.singular_values.end(),
              std::greater<double>());

    double total = 0.0;
    for (double s : curve.singular_values) total += s;
    curve.cumulative_mass.resize(g);
    if (total == 0.0) {
        // Zero matrix: no mass to distribute; the curve is flat at 1.
        std::fill(curve.cumulative_mass.begin(), curve.cumulative_mass.end(), 1.0);
    } else {
        double acc = 0.0;
        for (size_t i = 0; i < g; ++i) {
            acc += curve.singular_values[i];
            curve.cumulative_mass[i] = acc / total;
        }
        curve.cumulative_mass.back() = 1.0;
    }
    return curve;
}

} // namespace

SpectrumCurve singular_spectrum(const Tensor& x) { return spectrum_impl(x); }
SpectrumCurve singular_spectrum(const TensorD& x) { return spectrum_impl(x); }

} // namespace actcomp
