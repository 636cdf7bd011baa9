#pragma once

/// \file family.hpp
/// Solutions of the quadratic matrix equation
///
///     Z' + Z P(t) Z + Q(t) Z + Z R(t) + S(t) = 0,                    (*)
///
/// their fundamental data, and the one-base reconstruction of every other
/// solution. For a solution Z on [t1, T] the fundamental pair solves
///
///     phi' = [P Z + R] phi,   psi' = psi [Z P + Q],   phi(t1) = psi(t1) = I,
///
/// and the kernel integral is mu(t) = Int_{t1}^{t} phi^{-1} P psi^{-1}.
/// Every solution with initial offset Lambda = Z1(t1) - Z(t1) is then
///
///     Z1(t) = Z(t) + psi^{-1}(t) [I + Lambda mu(t)]^{-1} Lambda phi^{-1}(t),
///
/// including singular and zero Lambda. Two regular solutions are tied
/// together by the determinant identity
///
///     det[I + Lambda_jk mu_{Z_k}(t)] = exp Int tr[P (Z_j - Z_k)]
///
/// (mu runs along the subtracted solution Z_k), whose two orientations
/// multiply to exactly one.

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coefficients.hpp"
#include "integrate.hpp"
#include "matrix.hpp"
#include "quadrature.hpp"

namespace riccati {

/// The family formula hit a singular [I + Lambda mu] factor: the member
/// solution escapes in finite time at (or before) this point.
struct FamilyBlowUp : std::runtime_error {
    FamilyBlowUp(double tAt, const std::string& what) : std::runtime_error(what), t(tAt) {}
    double t;
};

/// Fundamental factors lost invertibility within working precision; the
/// requested tolerances cannot represent this configuration.
struct NearSingularFundamental : std::runtime_error {
    explicit NearSingularFundamental(const std::string& what) : std::runtime_error(what) {}
};

/// One integrated solution of (*).
class RiccatiTrajectory {
  public:
    RiccatiTrajectory() = default;
    RiccatiTrajectory(CoefficientSpec spec, Trajectory traj, double t1)
        : spec_(std::move(spec)), traj_(std::move(traj)), t1_(t1) {}

    const CoefficientSpec& spec() const { return spec_; }
    const Trajectory& trajectory() const { return traj_; }
    double t1() const { return t1_; }

    Trajectory::Status status() const { return traj_.status(); }
    bool regularOn(double t) const { return traj_.status() == Trajectory::Status::Regular
                                         ? t <= traj_.tEnd() + 1e-12
                                         : t < traj_.blowUp().t_escape; }
    const BlowUpInfo& blowUp() const { return traj_.blowUp(); }
    double coveredEnd() const { return traj_.tEnd(); }

    MatrixC Z(double t) const { return traj_.evalBlock(t, 0); }
    MatrixC dZ(double t) const { return traj_.evalDerivativeBlock(t, 0); }

    /// Defect of the dense representation in (*) at one point.
    double residual(double t) const {
        const auto quad = spec_.eval(t);
        const MatrixC z = Z(t);
        return (dZ(t) + z * quad.P * z + quad.Q * z + z * quad.R + quad.S).opNorm();
    }

    /// Max residual over step midpoints (capped number of probes).
    double maxResidual(std::size_t maxProbes = 200) const {
        const auto& steps = traj_.steps();
        if (steps.empty())
            return 0.0;
        const std::size_t stride = std::max<std::size_t>(1, steps.size() / maxProbes);
        double worst = 0.0;
        for (std::size_t i = 0; i < steps.size(); i += stride) {
            const double tm = steps[i].t0 + 0.5 * steps[i].h;
            worst = std::max(worst, residual(tm));
        }
        return worst;
    }

    /// Closed-form-backed trajectories advertise their dense data as the
    /// authoritative source for downstream integrations.
    bool denseAuthoritative() const { return dense_authoritative_; }
    void setDenseAuthoritative(bool v) { dense_authoritative_ = v; }

  private:
    CoefficientSpec spec_;
    Trajectory traj_;
    double t1_ = 0.0;
    bool dense_authoritative_ = false;
};

namespace detail {

inline bool riccatiRhs(const CoefficientSpec& spec, double t, const MatrixC& z, MatrixC& dz) {
    if (t < spec.t0 || t > spec.domainEnd())
        return false;
    const auto quad = spec.eval(t);
    dz = -(z * quad.P * z + quad.Q * z + z * quad.R + quad.S);
    return true;
}

}  // namespace detail

/// Integrate (*) from Z(t1) = z0 out to T.
inline RiccatiTrajectory solve(const CoefficientSpec& spec, const MatrixC& z0, double t1,
                               double T, const IntegratorConfig& cfg = {}) {
    if (z0.dim() != spec.dim)
        throw std::invalid_argument("solve: initial value dimension mismatch");
    if (t1 < spec.t0)
        throw OutOfDomain("solve: t1 before coefficient domain start");
    if (T > spec.domainEnd())
        throw OutOfDomain("solve: horizon past coefficient domain end");
    auto field = [&spec](double t, const MatrixC& z, MatrixC& dz) {
        return detail::riccatiRhs(spec, t, z, dz);
    };
    Trajectory tr = integrateMatrix(field, z0, t1, T, cfg);
    return RiccatiTrajectory(spec, std::move(tr), t1);
}

/// Options for the joint fundamental integration. The stacked state holds
/// the base solution and its fundamental factors, which may grow genuinely
/// large along extremal bases, so its escape threshold sits far above the
/// plain solver default.
struct FundamentalOptions {
    IntegratorConfig integ{};
    double escape_threshold = 1e12;
};

/// Fundamental data of one base solution: phi, psi, mu on [t1, coveredEnd].
///
/// The base Z is carried inside the same stacked state so every piece shares
/// step control; when the source trajectory is closed-form-backed its dense
/// values are read instead of re-integrating Z.
class FundamentalData {
  public:
    FundamentalData() = default;

    double t1() const { return t1_; }
    const CoefficientSpec& spec() const { return spec_; }

    MatrixC Z(double t) const {
        return external_ ? source_->Z(t) : stacked_.evalBlock(t, 0);
    }
    MatrixC phi(double t) const { return stacked_.evalBlock(t, zOffset_ + 0); }
    MatrixC psi(double t) const { return stacked_.evalBlock(t, zOffset_ + 1); }
    MatrixC mu(double t) const { return stacked_.evalBlock(t, zOffset_ + 2); }

    /// Last time the stacked integration reached.
    double coveredEnd() const { return stacked_.tEnd(); }
    /// True when the stacked state escaped the fundamental threshold before
    /// the requested horizon (growth evidence, not an error).
    bool truncated() const { return stacked_.status() == Trajectory::Status::BlowUp; }
    const BlowUpInfo& escape() const { return stacked_.blowUp(); }

    const Trajectory& stacked() const { return stacked_; }
    /// Index of the phi block inside the stacked state.
    std::size_t phiBlock() const { return zOffset_ + 0; }
    std::size_t muBlock() const { return zOffset_ + 2; }

    /// Final stacked state, for window-continued integrations.
    std::vector<cx> finalState() const { return stacked_.sampleState(stacked_.sampleCount() - 1); }

    // construction access for fundamental_pair()
    FundamentalData(CoefficientSpec spec, double t1, Trajectory stacked,
                    std::shared_ptr<const RiccatiTrajectory> source, bool external)
        : spec_(std::move(spec)),
          t1_(t1),
          stacked_(std::move(stacked)),
          source_(std::move(source)),
          external_(external),
          zOffset_(external_ ? 0 : 1) {}

    bool usesExternalBase() const { return external_; }
    const RiccatiTrajectory& sourceTrajectory() const { return *source_; }

  private:
    CoefficientSpec spec_;
    double t1_ = 0.0;
    Trajectory stacked_;
    std::shared_ptr<const RiccatiTrajectory> source_;
    bool external_ = false;
    std::size_t zOffset_ = 1;
};

namespace detail {

/// Right-hand side of the stacked fundamental system. `zFromState` selects
/// whether Z is part of the state or read from an external dense source.
class FundamentalField {
  public:
    FundamentalField(const CoefficientSpec& spec, const RiccatiTrajectory* source, bool external)
        : spec_(spec), source_(source), external_(external) {}

    bool operator()(double t, const std::vector<cx>& y, std::vector<cx>& dy) {
        const int n = spec_.dim;
        const StateLayout& L = layout(n);
        if (t < spec_.t0 || t > spec_.domainEnd())
            return false;
        MatrixC z(n);
        if (external_) {
            if (t > source_->coveredEnd() + 1e-12)
                return false;
            z = source_->Z(t);
        } else {
            z = L.unpack(y, 0);
        }
        const std::size_t off = external_ ? 0 : 1;
        const MatrixC phi = L.unpack(y, off + 0);
        const MatrixC psi = L.unpack(y, off + 1);
        const auto quad = spec_.eval(t);

        MatrixC phiInv(n), psiInv(n);
        try {
            phiInv = inverse(phi);
            psiInv = inverse(psi);
        } catch (const SingularMatrix&) {
            sawNearSingular_ = true;
            return false;
        }

        dy.resize(y.size());
        if (!external_) {
            MatrixC dz(n);
            if (!riccatiRhs(spec_, t, z, dz))
                return false;
            L.pack(dz, dy, 0);
        }
        L.pack((quad.P * z + quad.R) * phi, dy, off + 0);
        L.pack(psi * (z * quad.P + quad.Q), dy, off + 1);
        L.pack(phiInv * quad.P * psiInv, dy, off + 2);
        return true;
    }

    const StateLayout& layout(int n) {
        if (layout_.total == 0) {
            std::vector<int> dims;
            if (!external_)
                dims.push_back(n);
            dims.insert(dims.end(), {n, n, n});
            layout_ = StateLayout(dims);
        }
        return layout_;
    }

    bool sawNearSingular() const { return sawNearSingular_; }

  private:
    const CoefficientSpec& spec_;
    const RiccatiTrajectory* source_;
    bool external_;
    bool sawNearSingular_ = false;
    StateLayout layout_;
};

}  // namespace detail

/// Jointly integrate the fundamental system along a regular base solution.
/// Stops early (flagging, not throwing) when the stacked state escapes the
/// fundamental threshold; throws NearSingularFundamental when phi or psi
/// lose invertibility within working precision.
inline FundamentalData fundamental_pair(const RiccatiTrajectory& rt, double T,
                                        const FundamentalOptions& opt = {}) {
    const int n = rt.spec().dim;
    const double t1 = rt.t1();
    if (!(T > t1))
        throw std::invalid_argument("fundamental_pair: need T > t1");
    if (!rt.regularOn(std::min(T, rt.coveredEnd())))
        throw std::invalid_argument("fundamental_pair: base solution is not regular on the span");
    if (rt.status() == Trajectory::Status::BlowUp && T >= rt.blowUp().t_escape)
        throw std::invalid_argument("fundamental_pair: base escapes before the horizon");

    const bool external = rt.denseAuthoritative();
    if (external && T > rt.coveredEnd() + 1e-12)
        throw std::invalid_argument("fundamental_pair: horizon past the base dense data");
    auto source = std::make_shared<RiccatiTrajectory>(rt);
    auto field = std::make_shared<detail::FundamentalField>(source->spec(), source.get(), external);
    const StateLayout layout = field->layout(n);

    std::vector<cx> y0(static_cast<std::size_t>(layout.total));
    std::size_t off = external ? 0 : 1;
    if (!external)
        layout.pack(rt.Z(t1), y0, 0);
    layout.pack(MatrixC::identity(n), y0, off + 0);
    layout.pack(MatrixC::identity(n), y0, off + 1);
    layout.pack(MatrixC::zeros(n), y0, off + 2);

    IntegratorConfig cfg = opt.integ;
    cfg.blowup_threshold = opt.escape_threshold;

    OdeField f = [field](double t, const std::vector<cx>& y, std::vector<cx>& dy) {
        return (*field)(t, y, dy);
    };
    Trajectory stacked = integrate(f, std::move(y0), t1, T, cfg, layout);

    if (stacked.status() == Trajectory::Status::BlowUp && stacked.blowUp().wide_bracket &&
        field->sawNearSingular())
        throw NearSingularFundamental(
            "fundamental factors became numerically singular near t=" +
            std::to_string(stacked.tEnd()));

    return FundamentalData(rt.spec(), t1, std::move(stacked), std::move(source), external);
}

/// Threshold under which [I + Lambda mu] counts as singular for the family
/// formula (relative to the natural scale of the product).
inline double familySingularBound(const MatrixC& lambda, const MatrixC& mu) {
    const int n = lambda.dim();
    return 1e-10 * std::pow(1.0 + lambda.opNorm() * mu.opNorm(), n);
}

/// Evaluate the solution with initial offset Lambda at time t using the base
/// fundamental data. Lambda may be singular or zero. Throws FamilyBlowUp when
/// [I + Lambda mu(t)] is singular within tolerance: that family member blows
/// up at or before t.
inline MatrixC family_solution(const FundamentalData& fd, const MatrixC& lambda, double t) {
    const int n = fd.spec().dim;
    if (lambda.dim() != n)
        throw std::invalid_argument("family_solution: offset dimension mismatch");
    const MatrixC z = fd.Z(t);
    if (lambda.maxAbs() == 0.0)
        return z;  // offset zero: the base itself, bit for bit
    const MatrixC mu = fd.mu(t);
    MatrixC m = MatrixC::identity(n) + lambda * mu;
    const cx dm = det(m);
    if (std::abs(dm) < familySingularBound(lambda, mu))
        throw FamilyBlowUp(t, "family member singular at t=" + std::to_string(t) +
                                  " (|det| = " + std::to_string(std::abs(dm)) + ")");
    const MatrixC core = solve(m, lambda);  // [I + Lambda mu]^{-1} Lambda
    return z + solve(fd.psi(t), core) * inverse(fd.phi(t));
}

/// exp Int_{t1}^{t} tr[P Z + R], the predicted det phi(t).
inline cx phi_liouville(const FundamentalData& fd, double t, double quadTol = 1e-11) {
    const auto f = [&fd](double s) {
        const auto quad = fd.spec().eval(s);
        return (quad.P * fd.Z(s) + quad.R).trace();
    };
    return std::exp(integrate_adaptive(f, fd.t1(), t, quadTol));
}

/// exp Int_{t1}^{t} tr[Z P + Q], the predicted det psi(t).
inline cx psi_liouville(const FundamentalData& fd, double t, double quadTol = 1e-11) {
    const auto f = [&fd](double s) {
        const auto quad = fd.spec().eval(s);
        return (fd.Z(s) * quad.P + quad.Q).trace();
    };
    return std::exp(integrate_adaptive(f, fd.t1(), t, quadTol));
}

/// Integral of Re tr[P (Z1 - Z2)] over [t1, t]: bounded exactly when the two
/// solutions have the same character (both normal), divergent to -inf when
/// Z1 is extremal and Z2 normal.
inline double pair_integral(const RiccatiTrajectory& rt1, const RiccatiTrajectory& rt2, double t,
                            double quadTol = 1e-10) {
    if (rt1.t1() != rt2.t1())
        throw std::invalid_argument("pair_integral: trajectories must share the anchor time");
    const auto f = [&rt1, &rt2](double s) {
        const MatrixC p = rt1.spec().eval(s).P;
        return (p * (rt1.Z(s) - rt2.Z(s))).trace().real();
    };
    return integrate_adaptive_real(f, rt1.t1(), t, quadTol);
}

/// Both orientations of the determinant identity for one pair of solutions.
class SolutionPair {
  public:
    /// Builds fundamental data for both trajectories on [t1, T].
    SolutionPair(const RiccatiTrajectory& rtj, const RiccatiTrajectory& rtk, double T,
                 const FundamentalOptions& opt = {})
        : fdj_(fundamental_pair(rtj, T, opt)), fdk_(fundamental_pair(rtk, T, opt)) {
        lambdaJk_ = fdj_.Z(fdj_.t1()) - fdk_.Z(fdk_.t1());
    }

    const FundamentalData& fdj() const { return fdj_; }
    const FundamentalData& fdk() const { return fdk_; }
    const MatrixC& lambdaJk() const { return lambdaJk_; }

    struct DetIdentity {
        cx determinant;   ///< det[I + Lambda_jk mu_{Z_k}(t)]
        cx traceExp;      ///< exp Int tr[P (Z_j - Z_k)]
        double residual;  ///< |determinant - traceExp|
    };

    /// det[I + Lambda_jk mu_{Z_k}(t)] against exp Int tr[P (Z_j - Z_k)].
    DetIdentity detIdentity(double t, double quadTol = 1e-11) const {
        const int n = fdk_.spec().dim;
        const cx lhs = det(MatrixC::identity(n) + lambdaJk_ * fdk_.mu(t));
        const auto f = [this](double s) {
            const MatrixC p = fdk_.spec().eval(s).P;
            return (p * (fdj_.Z(s) - fdk_.Z(s))).trace();
        };
        const cx rhs = std::exp(integrate_adaptive(f, fdk_.t1(), t, quadTol));
        return DetIdentity{lhs, rhs, std::abs(lhs - rhs)};
    }

    double detIdentityResidual(double t) const { return detIdentity(t).residual; }

    /// |det{[I + Lambda_jk mu_k][I + Lambda_kj mu_j]} - 1|; identically zero
    /// in exact arithmetic for any pair of regular solutions.
    double reciprocityResidual(double t) const {
        const int n = fdk_.spec().dim;
        const MatrixC mj = MatrixC::identity(n) + lambdaJk_ * fdk_.mu(t);
        const MatrixC mk = MatrixC::identity(n) + (-lambdaJk_) * fdj_.mu(t);
        return std::abs(det(mj * mk) - cx{1.0, 0.0});
    }

  private:
    FundamentalData fdj_, fdk_;
    MatrixC lambdaJk_;
};

/// Residual of the determinant identity for the pair (rt_j, rt_k) at t.
inline double det_identity_residual(const RiccatiTrajectory& rtj, const RiccatiTrajectory& rtk,
                                    double t, const FundamentalOptions& opt = {}) {
    return SolutionPair(rtj, rtk, t, opt).detIdentityResidual(t);
}

/// Deviation of the two-orientation determinant product from one at t.
inline double reciprocity_residual(const RiccatiTrajectory& rtj, const RiccatiTrajectory& rtk,
                                   double t, const FundamentalOptions& opt = {}) {
    return SolutionPair(rtj, rtk, t, opt).reciprocityResidual(t);
}

}  // namespace riccati
