#ifndef REPSIM_LINALG_HPP
#define REPSIM_LINALG_HPP

// Dense kernels behind the CCA solve: centering, covariance, symmetric
// eigendecomposition, inverse square roots with spectral truncation, SVD,
// and the closed-form canonical correlation solve itself.
//
// Everything is computed in double precision. Matrices are small and
// row-major; nothing here allocates beyond the returned values.

#include "repsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace repsim {

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

    /// Takes ownership of `data` (row-major). Rejects non-finite values.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != checked_size(rows, cols)) {
            throw DataError("shape", "matrix data length " + std::to_string(data_.size()) +
                                         " != " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) {
                throw DataError("nonfinite", "matrix value at flat index " + std::to_string(i) +
                                                 " is not finite");
            }
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        data_.reserve(checked_size(rows_, cols_));
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DataError("shape", "ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    /// The first `count` columns.
    Matrix left_cols(std::size_t count) const {
        Matrix out(rows_, count);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, c);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    static std::size_t checked_size(std::size_t rows, std::size_t cols) {
        if (rows == 0 || cols == 0) {
            throw DataError("shape", "matrix dimensions must be >= 1, got " + std::to_string(rows) +
                                         "x" + std::to_string(cols));
        }
        return rows * cols;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DataError("shape", "matmul shape mismatch " + std::to_string(a.rows()) + "x" +
                                     std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                                     "x" + std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto src = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

/// Largest absolute entry.
inline double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

inline Matrix center_columns(const Matrix& m) {
    Matrix out = m;
    const auto n = static_cast<double>(m.rows());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        // Second pass removes the residual mean left by rounding in the first.
        for (int pass = 0; pass < 2; ++pass) {
            double sum = 0.0;
            for (std::size_t r = 0; r < m.rows(); ++r) sum += out(r, c);
            const double mean = sum / n;
            for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) -= mean;
        }
    }
    return out;
}

/// xᵀy / (rows - 1). Inputs are expected to be column-centered already.
inline Matrix covariance(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows()) {
        throw DataError("shape", "covariance row mismatch: " + std::to_string(x.rows()) + " vs " +
                                     std::to_string(y.rows()));
    }
    if (x.rows() < 2) throw DataError("shape", "covariance needs at least 2 rows");

    Matrix out(x.cols(), y.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t a = 0; a < xi.size(); ++a) {
            const double xa = xi[a];
            auto dst = out.row(a);
            for (std::size_t b = 0; b < yi.size(); ++b) dst[b] += xa * yi[b];
        }
    }
    const double scale = 1.0 / static_cast<double>(x.rows() - 1);
    for (double& v : out.data()) v *= scale;
    return out;
}

struct SymEigen {
    std::vector<double> values; // non-increasing
    Matrix vectors;             // column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition. Assumes `s` is symmetric; callers check.
inline SymEigen sym_eigen(const Matrix& s, int max_sweeps = 100) {
    const std::size_t n = s.rows();
    if (n != s.cols()) throw DataError("shape", "sym_eigen needs a square matrix");

    Matrix a = s;
    Matrix v = Matrix::identity(n);

    double total = 0.0;
    for (double x : a.data()) total += x * x;
    const double floor = std::numeric_limits<double>::epsilon() * std::sqrt(total);

    int sweep = 0;
    for (;; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= floor || off == 0.0) break;
        if (sweep >= max_sweeps) {
            throw NumericError("symmetric eigensolver did not converge after " +
                               std::to_string(max_sweeps) + " sweeps");
        }

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = a(order[i], order[i]);
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
    }
    return out;
}

struct InvSqrtResult {
    Matrix value;
    std::size_t retained = 0; // eigendirections kept after truncation
};

/// Q·diag(λ^{-1/2})·Qᵀ over eigendirections with λ > trunc·λmax; dropped
/// directions map to zero.
inline InvSqrtResult inv_sqrt_sym(const Matrix& s, double trunc) {
    if (s.rows() != s.cols()) throw DataError("shape", "inv_sqrt_sym needs a square matrix");
    if (!(trunc >= 0.0 && trunc < 1.0)) {
        throw DataError("argument", "truncation must lie in [0, 1), got " + std::to_string(trunc));
    }
    const std::size_t n = s.rows();
    const double scale = std::max(max_abs(s), std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(s(i, j) - s(j, i)) > 1e-8 * scale) {
                throw DataError("numeric", "matrix is not symmetric at (" + std::to_string(i) +
                                               "," + std::to_string(j) + ")");
            }
        }
    }

    const SymEigen eig = sym_eigen(s);
    const double lmax = eig.values.front();
    InvSqrtResult out{Matrix(n, n), 0};
    if (lmax <= 0.0) {
        if (lmax < -1e-8 * scale) throw DataError("numeric", "matrix is negative definite");
        return out;
    }
    if (eig.values.back() < -1e-8 * lmax) {
        throw DataError("numeric", "matrix is not positive semidefinite (eigenvalue " +
                                       std::to_string(eig.values.back()) + ")");
    }

    std::vector<double> weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (eig.values[i] > trunc * lmax && eig.values[i] > 0.0) {
            weight[i] = 1.0 / std::sqrt(eig.values[i]);
            ++out.retained;
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r; c < n; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < out.retained; ++k)
                acc += eig.vectors(r, k) * weight[k] * eig.vectors(c, k);
            out.value(r, c) = acc;
            out.value(c, r) = acc;
        }
    }
    return out;
}

struct Svd {
    Matrix u;                   // rows × k, orthonormal columns
    std::vector<double> values; // k = min(rows, cols), non-increasing
    Matrix vt;                  // k × cols, orthonormal rows
};

namespace detail {

// Replace column `col` of `u` with a unit vector orthogonal to columns
// [0, col): the standard basis vector with the largest residual after
// projecting those columns out, normalized.
inline void complete_basis(Matrix& u, std::size_t col) {
    const std::size_t n = u.rows();
    std::vector<double> cand(n), best(n);
    double best_norm = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < col; ++j) {
                double dot = 0.0;
                for (std::size_t k = 0; k < n; ++k) dot += u(k, j) * cand[k];
                for (std::size_t k = 0; k < n; ++k) cand[k] -= dot * u(k, j);
            }
        }
        double norm = 0.0;
        for (double x : cand) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > best_norm) {
            best_norm = norm;
            best = cand;
        }
    }
    for (std::size_t k = 0; k < n; ++k) u(k, col) = best[k] / best_norm;
}

// One-sided Jacobi (Hestenes) for rows >= cols.
inline Svd svd_tall(const Matrix& m, int max_sweeps) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    Matrix w = m;
    Matrix v = Matrix::identity(cols);
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(rows);

    for (int sweep = 0;; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < rows; ++k) {
                    alpha += w(k, p) * w(k, p);
                    beta += w(k, q) * w(k, q);
                    gamma += w(k, p) * w(k, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < rows; ++k) {
                    const double wp = w(k, p);
                    const double wq = w(k, q);
                    w(k, p) = c * wp - s * wq;
                    w(k, q) = s * wp + c * wq;
                }
                for (std::size_t k = 0; k < cols; ++k) {
                    const double vp = v(k, p);
                    const double vq = v(k, q);
                    v(k, p) = c * vp - s * vq;
                    v(k, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
        if (sweep + 1 >= max_sweeps) {
            throw NumericError("SVD did not converge after " + std::to_string(max_sweeps) +
                               " sweeps");
        }
    }

    std::vector<double> norms(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < rows; ++k) acc += w(k, c) * w(k, c);
        norms[c] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

    Svd out{Matrix(rows, cols), std::vector<double>(cols), Matrix(cols, cols)};
    const double smax = norms[order.front()];
    const double tiny = smax * std::numeric_limits<double>::epsilon() * static_cast<double>(rows);
    for (std::size_t i = 0; i < cols; ++i) {
        const std::size_t src = order[i];
        out.values[i] = norms[src];
        for (std::size_t k = 0; k < cols; ++k) out.vt(i, k) = v(k, src);
        if (norms[src] > tiny && norms[src] > 0.0) {
            for (std::size_t k = 0; k < rows; ++k) out.u(k, i) = w(k, src) / norms[src];
        } else {
            complete_basis(out.u, i);
        }
    }
    return out;
}

} // namespace detail

/// Thin SVD m = u·diag(values)·vt. Throws NumericError if the Jacobi
/// sweeps fail to converge.
inline Svd svd(const Matrix& m, int max_sweeps = 80) {
    if (m.rows() >= m.cols()) return detail::svd_tall(m, max_sweeps);
    Svd t = detail::svd_tall(m.transposed(), max_sweeps);
    return Svd{t.vt.transposed(), std::move(t.values), t.u.transposed()};
}

struct CcaResult {
    std::vector<double> correlations; // non-increasing, clipped to [0, 1]
    Matrix transform_x;               // x.cols × k
    Matrix transform_y;               // y.cols × k
    std::size_t effective_rank_x = 0;
    std::size_t effective_rank_y = 0;
    double max_raw_correlation = 0.0; // largest singular value before clipping

    double mean_correlation() const {
        return std::accumulate(correlations.begin(), correlations.end(), 0.0) /
               static_cast<double>(correlations.size());
    }
};

inline constexpr double kDefaultTruncation = 1e-6;

/// Canonical correlation analysis of the column spaces of x and y.
///
/// Both inputs are centered, whitened by their truncated inverse square-root
/// covariances, and the whitened cross-covariance is decomposed by SVD. The
/// singular values are the canonical correlations; mapping the singular
/// vectors back through the whitening gives the canonical weights.
inline CcaResult cca(const Matrix& x, const Matrix& y, double trunc = kDefaultTruncation) {
    if (x.rows() != y.rows()) {
        throw DataError("shape", "cca row mismatch: " + std::to_string(x.rows()) + " vs " +
                                     std::to_string(y.rows()));
    }
    if (x.rows() <= std::max(x.cols(), y.cols())) {
        throw DataError("shape", "cca needs more rows than columns, got " +
                                     std::to_string(x.rows()) + " rows for " +
                                     std::to_string(std::max(x.cols(), y.cols())) + " columns");
    }

    const Matrix xc = center_columns(x);
    const Matrix yc = center_columns(y);
    const InvSqrtResult wx = inv_sqrt_sym(covariance(xc, xc), trunc);
    const InvSqrtResult wy = inv_sqrt_sym(covariance(yc, yc), trunc);
    if (wx.retained == 0 || wy.retained == 0) {
        throw NumericError("degenerate cca input: covariance fully truncated (x rank " +
                           std::to_string(wx.retained) + ", y rank " +
                           std::to_string(wy.retained) + ")");
    }

    const Matrix whitened = wx.value * covariance(xc, yc) * wy.value;
    Svd dec = svd(whitened);

    const std::size_t k = std::min(wx.retained, wy.retained);
    CcaResult out;
    out.effective_rank_x = wx.retained;
    out.effective_rank_y = wy.retained;
    out.max_raw_correlation = dec.values.front();
    out.correlations.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.correlations[i] = std::clamp(dec.values[i], 0.0, 1.0);
    out.transform_x = wx.value * dec.u.left_cols(k);
    out.transform_y = wy.value * dec.vt.transposed().left_cols(k);
    return out;
}

} // namespace repsim

#endif // REPSIM_LINALG_HPP
