#pragma once

/// \file coefficients.hpp
/// Time-dependent coefficient data for the quadratic matrix equation
///
///     Z' + Z P(t) Z + Q(t) Z + Z R(t) + S(t) = 0,  t >= t0,
///
/// and for the companion first-order linear system
///
///     Phi' = A(t) Phi + B(t) Psi,   Psi' = C(t) Phi + D(t) Psi.
///
/// Coefficients are either constant, members of a named builtin family,
/// or tabulated on a grid with linear interpolation.

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace riccati {

/// Evaluation outside the declared domain (before t0, or past a table grid).
struct OutOfDomain : std::runtime_error {
    explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

/// Unrecognized builtin scenario name.
struct UnknownScenario : std::runtime_error {
    explicit UnknownScenario(const std::string& what) : std::runtime_error(what) {}
};

/// One matrix-valued coefficient of t.
class CoefficientFunction {
  public:
    enum class Kind { Zero, Constant, ScalarExpDecay, MatrixExpDecay, SmoothBump, Table };

    CoefficientFunction() = default;

    static CoefficientFunction zero(int dim) {
        CoefficientFunction f;
        f.kind_ = Kind::Zero;
        f.dim_ = dim;
        return f;
    }

    static CoefficientFunction constant(MatrixC m) {
        CoefficientFunction f;
        f.kind_ = Kind::Constant;
        f.dim_ = m.dim();
        f.mat_ = std::move(m);
        return f;
    }

    /// scale * exp(-rate * t) * I
    static CoefficientFunction scalarExpDecay(int dim, double scale, double rate) {
        CoefficientFunction f;
        f.kind_ = Kind::ScalarExpDecay;
        f.dim_ = dim;
        f.scale_ = scale;
        f.rate_ = rate;
        return f;
    }

    /// M0 * exp(-rate * t)
    static CoefficientFunction matrixExpDecay(MatrixC m0, double rate) {
        CoefficientFunction f;
        f.kind_ = Kind::MatrixExpDecay;
        f.dim_ = m0.dim();
        f.mat_ = std::move(m0);
        f.rate_ = rate;
        return f;
    }

    /// scale * (1 - (t/cutoff)^2)^2 * I inside |t| < cutoff, identically zero
    /// beyond it (continuously differentiable compact support).
    static CoefficientFunction smoothBump(int dim, double scale, double cutoff) {
        if (cutoff <= 0.0)
            throw std::invalid_argument("smoothBump: cutoff must be positive");
        CoefficientFunction f;
        f.kind_ = Kind::SmoothBump;
        f.dim_ = dim;
        f.scale_ = scale;
        f.rate_ = cutoff;
        return f;
    }

    /// Piecewise-linear interpolation through (times[i], values[i]); exact at
    /// the knots, OutOfDomain beyond either end.
    static CoefficientFunction table(std::vector<double> times, std::vector<MatrixC> values) {
        if (times.size() < 2 || times.size() != values.size())
            throw std::invalid_argument("table: need matching times/values, at least two knots");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("table: knot times must be strictly increasing");
        const int d = values.front().dim();
        for (const auto& v : values)
            if (v.dim() != d)
                throw std::invalid_argument("table: inconsistent matrix dimensions");
        CoefficientFunction f;
        f.kind_ = Kind::Table;
        f.dim_ = d;
        f.times_ = std::move(times);
        f.values_ = std::move(values);
        return f;
    }

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }

    /// True when the function is only defined up to a finite time.
    bool boundedDomain() const { return kind_ == Kind::Table; }
    double domainEnd() const {
        return kind_ == Kind::Table ? times_.back() : std::numeric_limits<double>::infinity();
    }
    double domainStart() const {
        return kind_ == Kind::Table ? times_.front() : -std::numeric_limits<double>::infinity();
    }

    MatrixC eval(double t) const {
        switch (kind_) {
            case Kind::Zero:
                return MatrixC::zeros(dim_);
            case Kind::Constant:
                return mat_;
            case Kind::ScalarExpDecay:
                return MatrixC::scaledIdentity(dim_, scale_ * std::exp(-rate_ * t));
            case Kind::MatrixExpDecay:
                return mat_ * std::exp(-rate_ * t);
            case Kind::SmoothBump: {
                const double u = t / rate_;
                if (std::abs(u) >= 1.0)
                    return MatrixC::zeros(dim_);
                const double w = 1.0 - u * u;
                return MatrixC::scaledIdentity(dim_, scale_ * w * w);
            }
            case Kind::Table: {
                if (t < times_.front() || t > times_.back())
                    throw OutOfDomain("table coefficient evaluated at t=" + std::to_string(t) +
                                      " outside [" + std::to_string(times_.front()) + ", " +
                                      std::to_string(times_.back()) + "]");
                auto it = std::lower_bound(times_.begin(), times_.end(), t);
                if (it != times_.end() && *it == t)
                    return values_[static_cast<std::size_t>(it - times_.begin())];
                const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
                const std::size_t lo = hi - 1;
                const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
                return values_[lo] * (1.0 - w) + values_[hi] * w;
            }
        }
        throw std::logic_error("CoefficientFunction: bad kind");
    }

    CoefficientFunction negated() const {
        CoefficientFunction f = *this;
        switch (kind_) {
            case Kind::Zero:
                break;
            case Kind::Constant:
            case Kind::MatrixExpDecay:
                f.mat_ = -mat_;
                break;
            case Kind::ScalarExpDecay:
            case Kind::SmoothBump:
                f.scale_ = -scale_;
                break;
            case Kind::Table:
                for (auto& v : f.values_)
                    v = -v;
                break;
        }
        return f;
    }

    bool isZero() const { return kind_ == Kind::Zero; }

  private:
    Kind kind_ = Kind::Zero;
    int dim_ = 1;
    MatrixC mat_;
    double scale_ = 0.0;
    double rate_ = 0.0;  // decay rate, or bump cutoff
    std::vector<double> times_;
    std::vector<MatrixC> values_;
};

/// The four coefficients of the quadratic equation at one time.
struct CoefficientQuad {
    MatrixC P, Q, R, S;
};

/// Full coefficient description of one quadratic matrix equation.
struct CoefficientSpec {
    int dim = 1;
    double t0 = 0.0;  ///< domain start; evaluation below it is an error
    CoefficientFunction P, Q, R, S;
    std::string label;  ///< builtin family name when applicable, else free-form

    /// Initial values worth probing during equation-level sampling (known
    /// distinguished solutions of the builtin families).
    std::vector<MatrixC> sampleSeeds;

    CoefficientQuad eval(double t) const {
        if (t < t0)
            throw OutOfDomain("coefficients evaluated at t=" + std::to_string(t) +
                              " before domain start " + std::to_string(t0));
        return CoefficientQuad{P.eval(t), Q.eval(t), R.eval(t), S.eval(t)};
    }

    /// Largest time all four coefficients are defined for.
    double domainEnd() const {
        return std::min(std::min(P.domainEnd(), Q.domainEnd()),
                        std::min(R.domainEnd(), S.domainEnd()));
    }
};

/// Coefficient description of the companion linear system.
struct SystemSpec {
    int dim = 1;
    double t0 = 0.0;
    CoefficientFunction A, B, C, D;

    void eval(double t, MatrixC& a, MatrixC& b, MatrixC& c, MatrixC& d) const {
        if (t < t0)
            throw OutOfDomain("system coefficients evaluated before domain start");
        a = A.eval(t);
        b = B.eval(t);
        c = C.eval(t);
        d = D.eval(t);
    }
};

/// Substituting Psi = Z Phi in the linear system yields the quadratic
/// equation with P = B, Q = -D, R = A, S = -C.
inline CoefficientSpec system_to_riccati(const SystemSpec& sys) {
    CoefficientSpec spec;
    spec.dim = sys.dim;
    spec.t0 = sys.t0;
    spec.P = sys.B;
    spec.Q = sys.D.negated();
    spec.R = sys.A;
    spec.S = sys.C.negated();
    spec.label = "reduced-linear-system";
    return spec;
}

/// Named parameter set for builtin scenarios; unknown keys are rejected so
/// config typos fail loudly.
using ScenarioParams = std::map<std::string, double>;

namespace detail {

inline double takeParam(ScenarioParams& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    if (it == p.end())
        return fallback;
    const double v = it->second;
    p.erase(it);
    return v;
}

inline int takeDim(ScenarioParams& p) {
    const double d = takeParam(p, "dim", 1.0);
    const int n = static_cast<int>(d);
    if (n < 1 || static_cast<double>(n) != d)
        throw std::invalid_argument("scenario: dim must be a positive integer");
    return n;
}

inline void requireEmpty(const ScenarioParams& p, const std::string& scenario) {
    if (!p.empty())
        throw std::invalid_argument("scenario " + scenario + ": unknown parameter '" +
                                    p.begin()->first + "'");
}

}  // namespace detail

/// Builtin coefficient families.
///
///  - pure_quadratic_constant: P = scale*I, Q = R = S = 0
///  - decay_scalar:            P = scale*exp(-rate*t)*I, Q = R = S = 0
///  - bounded_support:         P = scale*(1-(t/cutoff)^2)^2*I up to the cutoff,
///                             zero afterwards; Q = R = S = 0
///  - linear_only:             P = 0, Q = q*I, R = r*I, S = s*I
inline CoefficientSpec builtin_scenario(const std::string& name, ScenarioParams params = {}) {
    CoefficientSpec spec;
    spec.label = name;
    if (name == "pure_quadratic_constant") {
        const int n = detail::takeDim(params);
        const double scale = detail::takeParam(params, "scale", 1.0);
        detail::requireEmpty(params, name);
        spec.dim = n;
        spec.P = CoefficientFunction::constant(MatrixC::scaledIdentity(n, scale));
        spec.Q = spec.R = spec.S = CoefficientFunction::zero(n);
        spec.sampleSeeds = {MatrixC::zeros(n)};  // kernel mass diverges: z=0 is the extremal one
        return spec;
    }
    if (name == "decay_scalar") {
        const int n = detail::takeDim(params);
        const double scale = detail::takeParam(params, "scale", 1.0);
        const double rate = detail::takeParam(params, "rate", 1.0);
        detail::requireEmpty(params, name);
        if (rate <= 0.0)
            throw std::invalid_argument("decay_scalar: rate must be positive");
        spec.dim = n;
        spec.P = CoefficientFunction::scalarExpDecay(n, scale, rate);
        spec.Q = spec.R = spec.S = CoefficientFunction::zero(n);
        const double mass = scale / rate;  // total kernel integral from t = 0
        spec.sampleSeeds = {MatrixC::zeros(n)};
        if (mass != 0.0)
            spec.sampleSeeds.push_back(MatrixC::scaledIdentity(n, -1.0 / mass));
        return spec;
    }
    if (name == "bounded_support") {
        const int n = detail::takeDim(params);
        const double scale = detail::takeParam(params, "scale", 1.0);
        const double cutoff = detail::takeParam(params, "cutoff", 1.0);
        detail::requireEmpty(params, name);
        spec.dim = n;
        spec.P = CoefficientFunction::smoothBump(n, scale, cutoff);
        spec.Q = spec.R = spec.S = CoefficientFunction::zero(n);
        const double mass = 8.0 * scale * cutoff / 15.0;  // integral of the bump from 0
        spec.sampleSeeds = {MatrixC::zeros(n)};
        if (mass != 0.0)
            spec.sampleSeeds.push_back(MatrixC::scaledIdentity(n, -1.0 / mass));
        return spec;
    }
    if (name == "linear_only") {
        const int n = detail::takeDim(params);
        const double q = detail::takeParam(params, "q", 0.5);
        const double r = detail::takeParam(params, "r", -0.25);
        const double s = detail::takeParam(params, "s", 0.0);
        detail::requireEmpty(params, name);
        spec.dim = n;
        spec.P = CoefficientFunction::zero(n);
        spec.Q = q == 0.0 ? CoefficientFunction::zero(n)
                          : CoefficientFunction::constant(MatrixC::scaledIdentity(n, q));
        spec.R = r == 0.0 ? CoefficientFunction::zero(n)
                          : CoefficientFunction::constant(MatrixC::scaledIdentity(n, r));
        spec.S = s == 0.0 ? CoefficientFunction::zero(n)
                          : CoefficientFunction::constant(MatrixC::scaledIdentity(n, s));
        spec.sampleSeeds = {MatrixC::zeros(n)};
        return spec;
    }
    throw UnknownScenario("unknown builtin scenario '" + name + "'");
}

}  // namespace riccati
