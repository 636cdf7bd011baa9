#pragma once

/// \file quadrature.hpp
/// Adaptive Simpson quadrature for scalar (complex) integrands. Enough for
/// the trace integrals this toolkit needs; integrands coming from dense ODE
/// output are piecewise smooth, which adaptive bisection handles well.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>

namespace riccati {

namespace detail {

inline std::complex<double> simpsonRecurse(const std::function<std::complex<double>(double)>& f,
                                           double a, double b, std::complex<double> fa,
                                           std::complex<double> fm, std::complex<double> fb,
                                           std::complex<double> whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const std::complex<double> flm = f(lm);
    const std::complex<double> frm = f(rm);
    const std::complex<double> left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const std::complex<double> right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const std::complex<double> delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpsonRecurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpsonRecurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Integrate a complex-valued integrand over [a, b] to absolute tolerance
/// `tol`. The interval is pre-split so integrands with localized features
/// (coefficient cutoffs, step seams) are sampled everywhere.
inline std::complex<double> integrate_adaptive(
    const std::function<std::complex<double>(double)>& f, double a, double b, double tol,
    int presplit = 16) {
    if (!(b >= a))
        throw std::invalid_argument("integrate_adaptive: need b >= a");
    if (a == b)
        return {0.0, 0.0};
    std::complex<double> total = 0.0;
    const double h = (b - a) / presplit;
    for (int k = 0; k < presplit; ++k) {
        const double x0 = a + k * h;
        const double x1 = (k + 1 == presplit) ? b : x0 + h;
        const double m = 0.5 * (x0 + x1);
        const std::complex<double> f0 = f(x0);
        const std::complex<double> fm = f(m);
        const std::complex<double> f1 = f(x1);
        const std::complex<double> whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total += detail::simpsonRecurse(f, x0, x1, f0, fm, f1, whole, tol / presplit, 40);
    }
    return total;
}

/// Real-valued convenience wrapper.
inline double integrate_adaptive_real(const std::function<double(double)>& f, double a, double b,
                                      double tol, int presplit = 16) {
    return integrate_adaptive([&f](double t) { return std::complex<double>(f(t), 0.0); }, a, b,
                              tol, presplit)
        .real();
}

}  // namespace riccati
