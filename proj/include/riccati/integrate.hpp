#pragma once

/// \file integrate.hpp
/// Adaptive explicit integrator for complex ODE systems with dense output.
///
/// The scheme is the classic Dormand-Prince 5(4) embedded pair with the
/// free 4th-order interpolant, FSAL arrangement and a plain I step-size
/// controller. States are flat complex vectors; a StateLayout describes how
/// they split into square matrix blocks so trajectories can hand back
/// MatrixC views. Finite-time escape is detected against a norm threshold
/// and the escape time is bracketed on the dense interpolant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace riccati {

/// Right-hand side evaluation; returns false when the field cannot be
/// evaluated at (t, y) (the step is rejected and retried shorter).
using OdeField = std::function<bool(double t, const std::vector<cx>& y, std::vector<cx>& dy)>;

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = 0.0;    ///< 0 = span of integration
    double min_step = 0.0;    ///< 0 = 1e-13 * span
    double fixed_step = 0.0;  ///< >0 disables error control and steps uniformly
    double blowup_threshold = 1e8;
    double blowup_localize_tol = 1e-6;
    std::uint64_t max_steps = 20'000'000;
};

/// Thrown when the controller cannot make progress (reported by integrate()
/// as a blow-up with a wide bracket, so callers normally never see it).
struct StepSizeUnderflow : std::runtime_error {
    explicit StepSizeUnderflow(const std::string& what) : std::runtime_error(what) {}
};

struct BlowUpInfo {
    double t_escape = 0.0;    ///< first time the state norm reached the threshold
    double last_norm = 0.0;   ///< state norm at the last accepted sample
    bool wide_bracket = false;  ///< true when the step size underflowed instead of
                                ///< the norm crossing cleanly (bracket is one step wide)
};

/// How a flat state vector decomposes into square matrix blocks.
struct StateLayout {
    StateLayout() = default;
    explicit StateLayout(std::vector<int> matrixDims) : dims(std::move(matrixDims)) {
        offsets.reserve(dims.size());
        int off = 0;
        for (int d : dims) {
            if (d < 1)
                throw std::invalid_argument("StateLayout: block dimension must be >= 1");
            offsets.push_back(off);
            off += d * d;
        }
        total = off;
    }

    static StateLayout single(int n) { return StateLayout(std::vector<int>{n}); }

    MatrixC unpack(const std::vector<cx>& y, std::size_t block) const {
        const int n = dims[block];
        MatrixC m(n);
        const int off = offsets[block];
        for (int k = 0; k < n * n; ++k)
            m.data()[static_cast<size_t>(k)] = y[static_cast<size_t>(off + k)];
        return m;
    }

    void pack(const MatrixC& m, std::vector<cx>& y, std::size_t block) const {
        const int n = dims[block];
        const int off = offsets[block];
        for (int k = 0; k < n * n; ++k)
            y[static_cast<size_t>(off + k)] = m.data()[static_cast<size_t>(k)];
    }

    std::vector<int> dims;
    std::vector<int> offsets;
    int total = 0;
};

namespace detail {

/// Dormand-Prince coefficients (classic DOPRI5 tableau with the dense-output
/// weights of the standard contd5 interpolant).
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline bool allFinite(const std::vector<cx>& v) {
    for (const cx& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            return false;
    return true;
}

inline double maxAbs(const std::vector<cx>& v) {
    double m = 0.0;
    for (const cx& z : v)
        m = std::max(m, std::abs(z));
    return m;
}

}  // namespace detail

/// One accepted step with the quartic interpolant coefficients.
/// eval(theta) = r1 + th*(r2 + (1-th)*(r3 + th*(r4 + (1-th)*r5))).
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    std::vector<cx> r1, r2, r3, r4, r5;

    void eval(double t, std::vector<cx>& out) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        out.resize(r1.size());
        for (std::size_t i = 0; i < r1.size(); ++i)
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
    }

    /// Time derivative of the interpolant.
    void evalDerivative(double t, std::vector<cx>& out) const {
        const double th = (t - t0) / h;
        out.resize(r1.size());
        const double w3 = 1.0 - 2.0 * th;
        const double w4 = th * (2.0 - 3.0 * th);
        const double w5 = 2.0 * th - 6.0 * th * th + 4.0 * th * th * th;
        for (std::size_t i = 0; i < r1.size(); ++i)
            out[i] = (r2[i] + w3 * r3[i] + w4 * r4[i] + w5 * r5[i]) / h;
    }
};

/// Result of integrate(): samples at accepted steps, dense interpolants in
/// between, and the termination status.
class Trajectory {
  public:
    enum class Status { Regular, BlowUp };

    Trajectory() = default;
    Trajectory(StateLayout layout, double tStart) : layout_(std::move(layout)), tStart_(tStart) {}

    Status status() const { return status_; }
    bool regularOn(double t) const { return status_ == Status::Regular || t < blowup_.t_escape; }
    const BlowUpInfo& blowUp() const { return blowup_; }

    double tStart() const { return tStart_; }
    /// Last covered time: the requested end for regular runs, else the last
    /// accepted sample before escape.
    double tEnd() const { return times_.empty() ? tStart_ : times_.back(); }

    std::size_t sampleCount() const { return times_.size(); }
    double sampleTime(std::size_t i) const { return times_[i]; }
    const std::vector<cx>& sampleState(std::size_t i) const { return states_[i]; }
    const StateLayout& layout() const { return layout_; }
    const std::vector<DenseStep>& steps() const { return steps_; }

    /// Dense evaluation. Exact stored samples are returned verbatim.
    std::vector<cx> eval(double t) const {
        checkCovered(t);
        const std::size_t k = findSample(t);
        if (k != npos)
            return states_[k];
        std::vector<cx> out;
        stepFor(t).eval(t, out);
        return out;
    }

    MatrixC evalBlock(double t, std::size_t block) const {
        const std::vector<cx> y = eval(t);
        return layout_.unpack(y, block);
    }

    std::vector<cx> evalDerivative(double t) const {
        checkCovered(t);
        std::vector<cx> out;
        stepFor(t).evalDerivative(t, out);
        return out;
    }

    MatrixC evalDerivativeBlock(double t, std::size_t block) const {
        const std::vector<cx> dy = evalDerivative(t);
        return layout_.unpack(dy, block);
    }

    // -- construction hooks used by integrate() ---------------------------
    void reserve(std::size_t n) {
        times_.reserve(n);
        states_.reserve(n);
        steps_.reserve(n);
    }
    void addSample(double t, std::vector<cx> y) {
        times_.push_back(t);
        states_.push_back(std::move(y));
    }
    void addStep(DenseStep s) { steps_.push_back(std::move(s)); }
    void markBlowUp(BlowUpInfo info) {
        status_ = Status::BlowUp;
        blowup_ = info;
    }

  private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    void checkCovered(double t) const {
        if (times_.empty())
            throw std::out_of_range("Trajectory: empty");
        if (t < tStart_ - 1e-12 || t > times_.back() + 1e-12)
            throw std::out_of_range("Trajectory: time outside covered span");
    }

    std::size_t findSample(double t) const {
        auto it = std::lower_bound(times_.begin(), times_.end(), t);
        if (it != times_.end() && *it == t)
            return static_cast<std::size_t>(it - times_.begin());
        return npos;
    }

    const DenseStep& stepFor(double t) const {
        if (steps_.empty())
            throw std::out_of_range("Trajectory: no dense data");
        // first step whose end lies at or beyond t
        std::size_t lo = 0, hi = steps_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (steps_[mid].t0 + steps_[mid].h >= t)
                hi = mid;
            else
                lo = mid + 1;
        }
        return steps_[lo];
    }

    StateLayout layout_;
    double tStart_ = 0.0;
    Status status_ = Status::Regular;
    BlowUpInfo blowup_;
    std::vector<double> times_;
    std::vector<std::vector<cx>> states_;
    std::vector<DenseStep> steps_;
};

namespace detail {

inline double errorNorm(const std::vector<cx>& err, const std::vector<cx>& y0,
                        const std::vector<cx>& y1, double atol, double rtol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double e = std::abs(err[i]);
        if (e == 0.0)
            continue;  // exact components (e.g. frozen blocks) carry no scale
        const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        worst = std::max(worst, e / sc);
    }
    return worst;
}

/// Conservative initial step: h ~ 0.01 * |y| / |f| refined by an Euler probe,
/// after Hairer's hinit.
inline double initialStep(const OdeField& f, double t, const std::vector<cx>& y0,
                          const std::vector<cx>& f0, double span, double atol) {
    const double d0 = maxAbs(y0);
    const double d1 = maxAbs(f0);
    double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 * span : 0.01 * (d0 + atol) / d1;
    h0 = std::min(h0, span);
    std::vector<cx> y1(y0.size()), f1;
    for (std::size_t i = 0; i < y0.size(); ++i)
        y1[i] = y0[i] + h0 * f0[i];
    f1.resize(y0.size());
    if (!f(t + h0, y1, f1) || !allFinite(f1))
        return std::max(1e-8 * span, h0 * 1e-3);
    double d2 = 0.0;
    for (std::size_t i = 0; i < y0.size(); ++i)
        d2 = std::max(d2, std::abs(f1[i] - f0[i]));
    d2 /= h0;
    const double d = std::max(d1, d2);
    const double h1 = (d <= 1e-15) ? std::max(1e-6 * span, h0 * 1e-3)
                                   : std::pow(0.01 / d, 0.2);
    return std::min({100.0 * h0, h1, span});
}

}  // namespace detail

/// Integrate y' = f(t, y) from t1 to tEnd (tEnd > t1). The trajectory stores
/// every accepted step. If the state norm reaches cfg.blowup_threshold the
/// run stops and the escape time is bracketed on the dense interpolant to
/// within cfg.blowup_localize_tol; persistent step failures below the minimum
/// step are reported the same way with wide_bracket set.
inline Trajectory integrate(const OdeField& f, std::vector<cx> y0, double t1, double tEnd,
                            const IntegratorConfig& cfg, StateLayout layout) {
    using D = detail::Dopri5;
    if (!(tEnd > t1))
        throw std::invalid_argument("integrate: need tEnd > t1");
    if (static_cast<int>(y0.size()) != layout.total)
        throw std::invalid_argument("integrate: state size does not match layout");
    if (!detail::allFinite(y0))
        throw std::invalid_argument("integrate: initial state not finite");
    if (detail::maxAbs(y0) >= cfg.blowup_threshold)
        throw std::invalid_argument("integrate: initial state beyond blow-up threshold");

    const double span = tEnd - t1;
    const double hmax = cfg.max_step > 0.0 ? cfg.max_step : span;
    const double hmin = cfg.min_step > 0.0 ? cfg.min_step : 1e-13 * span;
    const std::size_t n = y0.size();

    Trajectory traj(layout, t1);
    traj.addSample(t1, y0);

    std::vector<cx> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
    double t = t1;
    std::vector<cx> y = std::move(y0);

    if (!f(t, y, k1) || !detail::allFinite(k1))
        throw std::invalid_argument("integrate: field not evaluable at initial point");

    const bool fixed = cfg.fixed_step > 0.0;
    double h = fixed ? std::min(cfg.fixed_step, span)
                     : std::min(detail::initialStep(f, t, y, k1, span, cfg.abs_tol), hmax);
    std::uint64_t steps = 0;
    std::uint64_t consecutiveFailures = 0;

    auto wideBlowUp = [&](double tNow, double norm) {
        traj.markBlowUp(BlowUpInfo{tNow, norm, true});
    };

    while (t < tEnd) {
        if (++steps > cfg.max_steps)
            throw std::runtime_error("integrate: step budget exhausted");
        h = std::min(h, tEnd - t);
        if (fixed)
            h = std::min(cfg.fixed_step, tEnd - t);

        bool evalOk = true;
        auto stage = [&](double c, const std::vector<cx>& ys, std::vector<cx>& k) {
            if (!evalOk)
                return;
            if (!f(t + c * h, ys, k) || !detail::allFinite(k))
                evalOk = false;
        };

        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (D::a21 * k1[i]);
        stage(D::c2, ytmp, k2);
        if (evalOk) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (D::a31 * k1[i] + D::a32 * k2[i]);
            stage(D::c3, ytmp, k3);
        }
        if (evalOk) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (D::a41 * k1[i] + D::a42 * k2[i] + D::a43 * k3[i]);
            stage(D::c4, ytmp, k4);
        }
        if (evalOk) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (D::a51 * k1[i] + D::a52 * k2[i] + D::a53 * k3[i] +
                                      D::a54 * k4[i]);
            stage(D::c5, ytmp, k5);
        }
        if (evalOk) {
            for (std::size_t i = 0; i < n; ++i)
                ytmp[i] = y[i] + h * (D::a61 * k1[i] + D::a62 * k2[i] + D::a63 * k3[i] +
                                      D::a64 * k4[i] + D::a65 * k5[i]);
            stage(1.0, ytmp, k6);
        }
        if (evalOk) {
            for (std::size_t i = 0; i < n; ++i)
                y1[i] = y[i] + h * (D::b1 * k1[i] + D::b3 * k3[i] + D::b4 * k4[i] +
                                    D::b5 * k5[i] + D::b6 * k6[i]);
            stage(1.0, y1, k7);  // FSAL stage at the step end
        }
        if (evalOk)
            evalOk = detail::allFinite(y1);

        double errNorm = 0.0;
        if (evalOk && !fixed) {
            for (std::size_t i = 0; i < n; ++i)
                err[i] = h * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] +
                              D::e6 * k6[i] + D::e7 * k7[i]);
            errNorm = detail::errorNorm(err, y, y1, cfg.abs_tol, cfg.rel_tol);
        }

        const bool accept = evalOk && (fixed || errNorm <= 1.0);
        if (!accept) {
            ++consecutiveFailures;
            const double shrink =
                evalOk ? std::max(0.2, 0.9 * std::pow(errNorm, -0.2)) : 0.5;
            h *= std::min(shrink, 0.9);
            if (h < hmin || consecutiveFailures > 60) {
                wideBlowUp(t, detail::maxAbs(y));
                return traj;
            }
            continue;
        }
        consecutiveFailures = 0;

        // Dense output for the accepted step.
        DenseStep ds;
        ds.t0 = t;
        ds.h = h;
        ds.r1 = y;
        ds.r2.resize(n);
        ds.r3.resize(n);
        ds.r4.resize(n);
        ds.r5.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const cx ydiff = y1[i] - y[i];
            const cx bspl = h * k1[i] - ydiff;
            ds.r2[i] = ydiff;
            ds.r3[i] = bspl;
            ds.r4[i] = ydiff - h * k7[i] - bspl;
            ds.r5[i] = h * (D::d1 * k1[i] + D::d3 * k3[i] + D::d4 * k4[i] + D::d5 * k5[i] +
                            D::d6 * k6[i] + D::d7 * k7[i]);
        }

        const double normEnd = detail::maxAbs(y1);
        if (normEnd >= cfg.blowup_threshold) {
            // Bracket the first crossing inside this step on the interpolant.
            double lo = t, hi = t + h;
            std::vector<cx> probe;
            for (int it = 0; it < 200 && (hi - lo) > cfg.blowup_localize_tol; ++it) {
                const double mid = 0.5 * (lo + hi);
                ds.eval(mid, probe);
                if (detail::maxAbs(probe) >= cfg.blowup_threshold)
                    hi = mid;
                else
                    lo = mid;
            }
            traj.addStep(std::move(ds));
            traj.addSample(t + h, y1);
            traj.markBlowUp(BlowUpInfo{hi, normEnd, false});
            return traj;
        }

        traj.addStep(std::move(ds));
        traj.addSample(t + h, y1);
        t += h;
        y.swap(y1);
        k1.swap(k7);  // FSAL

        if (!fixed) {
            const double grow =
                errNorm <= 1e-30 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(errNorm, -0.2)));
            h = std::min(h * grow, hmax);
        }
    }
    return traj;
}

/// Convenience wrapper for single-matrix states.
inline Trajectory integrateMatrix(
    const std::function<bool(double, const MatrixC&, MatrixC&)>& field, const MatrixC& y0,
    double t1, double tEnd, const IntegratorConfig& cfg) {
    const int n = y0.dim();
    StateLayout layout = StateLayout::single(n);
    MatrixC m(n), dm(n);
    OdeField f = [&field, n, m, dm](double t, const std::vector<cx>& y,
                                    std::vector<cx>& dy) mutable -> bool {
        for (int k = 0; k < n * n; ++k)
            m.data()[static_cast<size_t>(k)] = y[static_cast<size_t>(k)];
        if (!field(t, m, dm))
            return false;
        dy.resize(static_cast<size_t>(n) * n);
        for (int k = 0; k < n * n; ++k)
            dy[static_cast<size_t>(k)] = dm.data()[static_cast<size_t>(k)];
        return true;
    };
    std::vector<cx> flat(static_cast<size_t>(n) * n);
    layout.pack(y0, flat, 0);
    return integrate(f, std::move(flat), t1, tEnd, cfg, layout);
}

}  // namespace riccati
