#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "actcomp/errors.hpp"
#include "actcomp/rng.hpp"

namespace actcomp {

// Dense row-major tensor over float or double. The simulation carries
// activations in float; oracles, the spectrum solver, and the autoencoder
// trainer work in double.
template <typename Real>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<size_t> shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(compute_numel(), Real(0));
    }

    TensorT(std::vector<size_t> shape, std::vector<Real> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != compute_numel()) {
            throw dimension_error("tensor: data size " + std::to_string(data_.size()) +
                                  " does not match shape numel " +
                                  std::to_string(compute_numel()));
        }
    }

    static TensorT zeros(std::vector<size_t> shape) { return TensorT(std::move(shape)); }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t numel() const { return data_.size(); }

    size_t extent(size_t axis) const {
        if (axis >= shape_.size()) {
            throw dimension_error("tensor: axis " + std::to_string(axis) + " out of range");
        }
        return shape_[axis];
    }

    // Extent of the trailing axis; the unit most operations group by ("rows"
    // of a flattened ...xH view).
    size_t last_extent() const {
        if (shape_.empty()) throw dimension_error("tensor: rank-0 tensor has no trailing axis");
        return shape_.back();
    }

    size_t leading_rows() const { return shape_.empty() ? 0 : numel() / last_extent(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    std::vector<Real>& values() { return data_; }
    const std::vector<Real>& values() const { return data_; }

    Real& operator[](size_t flat) { return data_[flat]; }
    Real operator[](size_t flat) const { return data_[flat]; }

    Real& at2(size_t row, size_t col) { return data_[row * shape_[1] + col]; }
    Real at2(size_t row, size_t col) const { return data_[row * shape_[1] + col]; }

    // Same data, new shape; numel must be preserved.
    TensorT reshaped(std::vector<size_t> new_shape) const {
        TensorT out(std::move(new_shape), data_);
        return out;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    std::string shape_string() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << "]";
        return os.str();
    }

private:
    size_t compute_numel() const {
        size_t n = 1;
        for (size_t e : shape_) n *= e;
        return shape_.empty() ? 0 : n;
    }

    void validate_shape() const {
        if (shape_.empty()) throw dimension_error("tensor: rank must be at least 1");
        for (size_t e : shape_) {
            if (e == 0) throw dimension_error("tensor: zero extent in shape");
        }
    }

    std::vector<size_t> shape_;
    std::vector<Real> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// --- construction -----------------------------------------------------------

enum class Dist { uniform, gaussian };

// Seeded random tensor. uniform draws from [0,1), gaussian from N(0,1); the
// generator is the documented splitmix64 stream, so values are reproducible.
template <typename Real = float>
TensorT<Real> random_tensor(std::vector<size_t> shape, Dist dist, uint64_t seed) {
    TensorT<Real> out(std::move(shape));
    Rng rng(seed);
    for (size_t i = 0; i < out.numel(); ++i) {
        double v = dist == Dist::uniform ? rng.uniform() : rng.gaussian();
        out[i] = static_cast<Real>(v);
    }
    return out;
}

// --- linear algebra ---------------------------------------------------------

// 2-D matrix product with the k-innermost loop and accumulation in Real. The
// summation order is part of the contract: a naive same-type triple loop
// reproduces the result bit for bit.
template <typename Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw dimension_error("matmul: both operands must be rank 2, got " +
                              a.shape_string() + " and " + b.shape_string());
    }
    size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2) {
        throw dimension_error("matmul: inner extents differ, " + a.shape_string() +
                              " vs " + b.shape_string());
    }
    TensorT<Real> out({m, n});
    const Real* pa = a.data();
    const Real* pb = b.data();
    Real* po = out.data();
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) {
            Real acc = Real(0);
            for (size_t kk = 0; kk < k; ++kk) {
                acc += pa[i * k + kk] * pb[kk * n + j];
            }
            po[i * n + j] = acc;
        }
    }
    return out;
}

// Multiply along the trailing axis: (...xK) times (KxN) -> (...xN).
template <typename Real>
TensorT<Real> matmul_last(const TensorT<Real>& x, const TensorT<Real>& w) {
    size_t rows = x.leading_rows();
    TensorT<Real> flat = x.reshaped({rows, x.last_extent()});
    TensorT<Real> prod = matmul(flat, w);
    std::vector<size_t> shape = x.shape();
    shape.back() = w.extent(1);
    return prod.reshaped(std::move(shape));
}

template <typename Real>
TensorT<Real> transpose(const TensorT<Real>& a) {
    if (a.rank() != 2) throw dimension_error("transpose: rank-2 tensor required");
    size_t m = a.extent(0), n = a.extent(1);
    TensorT<Real> out({n, m});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

// Numerically guarded softmax over the trailing axis: the row max is
// subtracted before exponentiation so large logits cannot overflow.
template <typename Real>
TensorT<Real> rowwise_softmax(const TensorT<Real>& x) {
    TensorT<Real> out(x.shape());
    size_t n = x.last_extent();
    size_t rows = x.leading_rows();
    for (size_t r = 0; r < rows; ++r) {
        const Real* in = x.data() + r * n;
        Real* o = out.data() + r * n;
        Real mx = in[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        Real sum = Real(0);
        for (size_t j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (size_t j = 0; j < n; ++j) o[j] /= sum;
    }
    return out;
}

// --- elementwise helpers ----------------------------------------------------

template <typename Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (!a.same_shape(b)) {
        throw dimension_error("add: shape mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
    }
    TensorT<Real> out(a.shape());
    for (size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename Real>
TensorT<Real> subtract(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (!a.same_shape(b)) {
        throw dimension_error("subtract: shape mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
    }
    TensorT<Real> out(a.shape());
    for (size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <typename Real>
TensorT<Real> scale(const TensorT<Real>& a, Real factor) {
    TensorT<Real> out(a.shape());
    for (size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * factor;
    return out;
}

// --- 2-D structural helpers (used by the parallel decompositions) -----------

template <typename Real>
TensorT<Real> take_cols(const TensorT<Real>& a, size_t c0, size_t c1) {
    if (a.rank() != 2) throw dimension_error("take_cols: rank-2 tensor required");
    size_t m = a.extent(0), n = a.extent(1);
    if (c0 >= c1 || c1 > n) throw dimension_error("take_cols: bad column range");
    TensorT<Real> out({m, c1 - c0});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = c0; j < c1; ++j) out[i * (c1 - c0) + (j - c0)] = a[i * n + j];
    return out;
}

template <typename Real>
TensorT<Real> take_rows(const TensorT<Real>& a, size_t r0, size_t r1) {
    if (a.rank() != 2) throw dimension_error("take_rows: rank-2 tensor required");
    size_t m = a.extent(0), n = a.extent(1);
    if (r0 >= r1 || r1 > m) throw dimension_error("take_rows: bad row range");
    TensorT<Real> out({r1 - r0, n});
    for (size_t i = r0; i < r1; ++i)
        for (size_t j = 0; j < n; ++j) out[(i - r0) * n + j] = a[i * n + j];
    return out;
}

template <typename Real>
TensorT<Real> concat_cols(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(0) != b.extent(0)) {
        throw dimension_error("concat_cols: row counts differ");
    }
    size_t m = a.extent(0), na = a.extent(1), nb = b.extent(1);
    TensorT<Real> out({m, na + nb});
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = a[i * na + j];
        for (size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = b[i * nb + j];
    }
    return out;
}

// Slice/rejoin along the leading (batch) axis.
template <typename Real>
TensorT<Real> take_leading(const TensorT<Real>& x, size_t b0, size_t b1) {
    if (b0 >= b1 || b1 > x.extent(0)) throw dimension_error("take_leading: bad range");
    size_t stride = x.numel() / x.extent(0);
    std::vector<size_t> shape = x.shape();
    shape[0] = b1 - b0;
    TensorT<Real> out(shape);
    for (size_t i = 0; i < out.numel(); ++i) out[i] = x[b0 * stride + i];
    return out;
}

template <typename Real>
TensorT<Real> concat_leading(const std::vector<TensorT<Real>>& parts) {
    if (parts.empty()) throw dimension_error("concat_leading: no parts");
    std::vector<size_t> shape = parts[0].shape();
    size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != shape.size()) throw dimension_error("concat_leading: rank mismatch");
        total += p.extent(0);
    }
    shape[0] = total;
    TensorT<Real> out(shape);
    size_t off = 0;
    for (const auto& p : parts) {
        for (size_t i = 0; i < p.numel(); ++i) out[off + i] = p[i];
        off += p.numel();
    }
    return out;
}

// --- deviation metrics ------------------------------------------------------

template <typename Real>
double max_abs(const TensorT<Real>& a) {
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i])));
    return m;
}

template <typename Real>
double max_abs_diff(const TensorT<Real>& a, const TensorT<Real>& b) {
    if (!a.same_shape(b)) {
        throw dimension_error("max_abs_diff: shape mismatch " + a.shape_string() + " vs " +
                              b.shape_string());
    }
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

// Relative deviation: max |a-b| over max |ref|, guarded for all-zero refs.
template <typename Real>
double rel_deviation(const TensorT<Real>& a, const TensorT<Real>& ref) {
    double denom = max_abs(ref);
    double diff = max_abs_diff(a, ref);
    if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / denom;
}

template <typename Real>
TensorT<double> widen(const TensorT<Real>& a) {
    TensorT<double> out(a.shape());
    for (size_t i = 0; i < a.numel(); ++i) out[i] = static_cast<double>(a[i]);
    return out;
}

inline Tensor narrow(const TensorD& a) {
    Tensor out(a.shape());
    for (size_t i = 0; i < a.numel(); ++i) out[i] = static_cast<float>(a[i]);
    return out;
}

} // namespace actcomp
