#pragma once

/// \file matrix.hpp
/// Dense complex matrix arithmetic for small systems (desk scale, n <= 8).
///
/// Everything is double-precision complex, row-major, value-semantic. The
/// factorization behind det/inverse/solve is an ordinary partially pivoted
/// LU; "singular" is decided relative to the max row-sum norm of the input
/// so that rescaling a matrix never changes the verdict.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace riccati {

using cx = std::complex<double>;

/// Thrown when inverse/solve meets a pivot below the singularity tolerance.
struct SingularMatrix : std::runtime_error {
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

/// Relative pivot tolerance: a pivot smaller than this times the matrix norm
/// is treated as zero.
inline constexpr double kSingularRelTol = 1e-12;

/// Square complex matrix with value semantics.
class MatrixC {
  public:
    MatrixC() = default;

    /// n-by-n matrix, zero initialized.
    explicit MatrixC(int n) : n_(n), a_(static_cast<size_t>(n) * n, cx{0.0, 0.0}) {
        if (n < 1)
            throw std::invalid_argument("MatrixC: dimension must be >= 1");
    }

    static MatrixC zeros(int n) { return MatrixC(n); }

    static MatrixC identity(int n) {
        MatrixC m(n);
        for (int i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    /// Scalar multiple of the identity.
    static MatrixC scaledIdentity(int n, cx s) {
        MatrixC m(n);
        for (int i = 0; i < n; ++i)
            m(i, i) = s;
        return m;
    }

    int dim() const { return n_; }

    cx& operator()(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
    const cx& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

    const std::vector<cx>& data() const { return a_; }
    std::vector<cx>& data() { return a_; }

    MatrixC& operator+=(const MatrixC& o) {
        checkDim(o);
        for (size_t k = 0; k < a_.size(); ++k)
            a_[k] += o.a_[k];
        return *this;
    }

    MatrixC& operator-=(const MatrixC& o) {
        checkDim(o);
        for (size_t k = 0; k < a_.size(); ++k)
            a_[k] -= o.a_[k];
        return *this;
    }

    MatrixC& operator*=(cx s) {
        for (auto& v : a_)
            v *= s;
        return *this;
    }

    friend MatrixC operator+(MatrixC a, const MatrixC& b) { return a += b; }
    friend MatrixC operator-(MatrixC a, const MatrixC& b) { return a -= b; }
    friend MatrixC operator*(MatrixC a, cx s) { return a *= s; }
    friend MatrixC operator*(cx s, MatrixC a) { return a *= s; }
    friend MatrixC operator*(MatrixC a, double s) { return a *= cx{s, 0.0}; }
    friend MatrixC operator*(double s, MatrixC a) { return a *= cx{s, 0.0}; }

    MatrixC operator-() const {
        MatrixC m = *this;
        for (auto& v : m.a_)
            v = -v;
        return m;
    }

    friend MatrixC operator*(const MatrixC& a, const MatrixC& b) {
        a.checkDim(b);
        const int n = a.n_;
        MatrixC c(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const cx aik = a(i, k);
                if (aik == cx{0.0, 0.0})
                    continue;
                for (int j = 0; j < n; ++j)
                    c(i, j) += aik * b(k, j);
            }
        return c;
    }

    cx trace() const {
        cx t = 0.0;
        for (int i = 0; i < n_; ++i)
            t += (*this)(i, i);
        return t;
    }

    /// Induced max row-sum norm (infinity norm).
    double opNorm() const {
        double best = 0.0;
        for (int i = 0; i < n_; ++i) {
            double row = 0.0;
            for (int j = 0; j < n_; ++j)
                row += std::abs((*this)(i, j));
            best = std::max(best, row);
        }
        return best;
    }

    double maxAbs() const {
        double best = 0.0;
        for (const auto& v : a_)
            best = std::max(best, std::abs(v));
        return best;
    }

    bool isFinite() const {
        for (const auto& v : a_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                return false;
        return true;
    }

  private:
    void checkDim(const MatrixC& o) const {
        if (n_ != o.n_)
            throw std::invalid_argument("MatrixC: dimension mismatch");
    }

    int n_ = 0;
    std::vector<cx> a_;
};

namespace detail {

/// Partially pivoted LU of a copy of M. Factorization always completes;
/// `minPivot` reports the smallest pivot magnitude met on the diagonal so
/// callers can apply their own singularity policy.
struct Lu {
    explicit Lu(const MatrixC& m) : n(m.dim()), lu(m), perm(static_cast<size_t>(m.dim())) {
        for (int i = 0; i < n; ++i)
            perm[static_cast<size_t>(i)] = i;
        for (int col = 0; col < n; ++col) {
            int piv = col;
            double best = std::abs(lu(col, col));
            for (int r = col + 1; r < n; ++r) {
                const double v = std::abs(lu(r, col));
                if (v > best) {
                    best = v;
                    piv = r;
                }
            }
            if (piv != col) {
                for (int j = 0; j < n; ++j)
                    std::swap(lu(col, j), lu(piv, j));
                std::swap(perm[static_cast<size_t>(col)], perm[static_cast<size_t>(piv)]);
                swaps ^= 1;
            }
            minPivot = std::min(minPivot, best);
            if (best == 0.0)
                continue;  // column already eliminated; determinant will be 0
            const cx p = lu(col, col);
            for (int r = col + 1; r < n; ++r) {
                const cx f = lu(r, col) / p;
                lu(r, col) = f;
                if (f == cx{0.0, 0.0})
                    continue;
                for (int j = col + 1; j < n; ++j)
                    lu(r, j) -= f * lu(col, j);
            }
        }
    }

    cx det() const {
        cx d = swaps ? cx{-1.0, 0.0} : cx{1.0, 0.0};
        for (int i = 0; i < n; ++i)
            d *= lu(i, i);
        return d;
    }

    /// Solve L U x = P b in place; b holds one column.
    void solveColumn(std::vector<cx>& b) const {
        std::vector<cx> y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            y[static_cast<size_t>(i)] = b[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j)
                y[static_cast<size_t>(i)] -= lu(i, j) * y[static_cast<size_t>(j)];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j)
                y[static_cast<size_t>(i)] -= lu(i, j) * y[static_cast<size_t>(j)];
            y[static_cast<size_t>(i)] /= lu(i, i);
        }
        b = std::move(y);
    }

    int n;
    MatrixC lu;
    std::vector<int> perm;
    int swaps = 0;
    double minPivot = std::numeric_limits<double>::infinity();
};

}  // namespace detail

/// Determinant by pivoted elimination. Exactly singular input gives 0; no error.
inline cx det(const MatrixC& m) {
    detail::Lu f(m);
    if (f.minPivot == 0.0)
        return cx{0.0, 0.0};
    return f.det();
}

/// Singularity threshold used by inverse()/solve(): relative to the matrix
/// norm, with a tiny absolute floor so the zero matrix is always singular.
inline double singularTol(const MatrixC& m, double relTol = kSingularRelTol) {
    return std::max(relTol * m.opNorm(), 1e-300);
}

/// Solve M X = B. Throws SingularMatrix when a pivot falls under the tolerance.
inline MatrixC solve(const MatrixC& m, const MatrixC& b, double relTol = kSingularRelTol) {
    detail::Lu f(m);
    const double tol = singularTol(m, relTol);
    if (f.minPivot < tol)
        throw SingularMatrix("solve: pivot " + std::to_string(f.minPivot) +
                             " under tolerance " + std::to_string(tol));
    const int n = m.dim();
    MatrixC x(n);
    std::vector<cx> col(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i)
            col[static_cast<size_t>(i)] = b(i, j);
        f.solveColumn(col);
        for (int i = 0; i < n; ++i)
            x(i, j) = col[static_cast<size_t>(i)];
    }
    return x;
}

/// Matrix inverse; same singularity policy as solve().
inline MatrixC inverse(const MatrixC& m, double relTol = kSingularRelTol) {
    return solve(m, MatrixC::identity(m.dim()), relTol);
}

/// Max row-sum norm as a free function, to match the rest of the toolkit API.
inline double op_norm(const MatrixC& m) { return m.opNorm(); }

}  // namespace riccati
