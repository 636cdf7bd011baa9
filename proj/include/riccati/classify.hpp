#pragma once

/// \file classify.hpp
/// Normal/extremal machinery on top of the solution family:
///
///   * mu_boundedness  — a regular solution is normal exactly when its kernel
///     integral mu stays bounded; decided here by escape / plateau / growth
///     heuristics over a finite horizon, with the horizon reported.
///   * omega_membership — offsets Lambda whose family member is extremal:
///     condition (alpha) det[I + Lambda mu(t)] != 0 on the span, condition
///     (beta) some limit matrix K of mu makes I + Lambda K singular.
///   * nu_tail / build_nu — the tail kernel integral nu(t) = Int_t^inf of
///     phi^{-1} P psi^{-1}, accumulated backward over windows so small tails
///     keep full relative precision.
///   * principal_solution — the smallest solution Z_* = Z0 - [Phi nu Psi]^{-1},
///     built in closed form from the windowed nu data (an initial-value
///     re-integration would amplify errors exponentially along Z_*).
///   * classify_solution / classify_equation — per-solution verdicts and the
///     equation-level normal / irreconcilable / sub- / super-extremal split.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "family.hpp"

namespace riccati {

/// omega_membership requires a normal base solution.
struct BaseNotNormal : std::runtime_error {
    explicit BaseNotNormal(const std::string& what) : std::runtime_error(what) {}
};

/// principal_solution requires a convergent tail integral.
struct NuDivergent : std::runtime_error {
    explicit NuDivergent(const std::string& what) : std::runtime_error(what) {}
};

/// principal_solution requires det nu(t) bounded away from zero on the span.
struct NuSingular : std::runtime_error {
    explicit NuSingular(const std::string& what) : std::runtime_error(what) {}
};

/// classify_equation found no regular solution among its samples.
struct NoRegularSolutionFound : std::runtime_error {
    explicit NoRegularSolutionFound(const std::string& what) : std::runtime_error(what) {}
};

/// Thresholds for the boundedness / membership heuristics. All decisions are
/// taken at these fixed defaults so verdicts are reproducible run to run.
struct ClassifyConfig {
    double mu_escape = 1e6;          ///< sup ||mu|| at or past this => unbounded
    double plateau_tol = 1e-3;       ///< relative growth allowed over the last window
    double plateau_window_frac = 0.2;///< fraction of the span forming the last window
    double growth_ratio = 1.1;       ///< per-doubling increase that counts as growth
    double alpha_tol = 1e-8;         ///< min |det[I + Lambda mu]| for condition alpha
    double beta_tol = 1e-6;          ///< max |det[I + Lambda K]| for condition beta
    double cluster_tol = 1e-4;       ///< limit-point clustering distance for K
    double fundamental_escape = 1e12;///< escape threshold for stacked runs
    int grid_points = 257;           ///< dense sampling resolution for verdicts
    IntegratorConfig integ{};        ///< base-solve and stacked-run tolerances
};

// ---------------------------------------------------------------------------
// mu boundedness

struct BoundednessVerdict {
    enum class Kind { Bounded, Unbounded, Inconclusive };
    Kind kind = Kind::Inconclusive;
    double sup_norm = 0.0;
    double horizon = 0.0;   ///< requested decision horizon
    double covered = 0.0;   ///< span actually backed by data
    bool truncated = false; ///< stacked run escaped before the horizon
    std::string evidence;
    std::vector<std::pair<double, double>> samples;  ///< (t, ||mu||)

    bool bounded() const { return kind == Kind::Bounded; }
    bool unbounded() const { return kind == Kind::Unbounded; }
};

/// Decide whether ||mu|| stays bounded on [t1, T] from the fundamental data.
/// Rules, in order: escape past mu_escape => Unbounded; relative increase over
/// the last plateau window below plateau_tol => Bounded; sup growing by more
/// than growth_ratio across three consecutive doubling checkpoints =>
/// Unbounded; otherwise Inconclusive.
inline BoundednessVerdict mu_boundedness(const FundamentalData& fd, double T,
                                         const ClassifyConfig& cfg = {}) {
    const double t1 = fd.t1();
    if (!(T > t1))
        throw std::invalid_argument("mu_boundedness: need T > t1");
    BoundednessVerdict v;
    v.horizon = T;
    v.covered = std::min(T, fd.coveredEnd());
    v.truncated = fd.truncated() && fd.coveredEnd() < T;

    const int g = std::max(cfg.grid_points, 9);
    v.samples.reserve(static_cast<std::size_t>(g));
    const double span = v.covered - t1;
    for (int i = 0; i < g; ++i) {
        const double t = (i == g - 1) ? v.covered : t1 + span * i / (g - 1);
        v.samples.emplace_back(t, fd.mu(t).opNorm());
    }
    double sup = 0.0;
    for (const auto& s : v.samples)
        sup = std::max(sup, s.second);
    v.sup_norm = sup;

    if (sup >= cfg.mu_escape) {
        v.kind = BoundednessVerdict::Kind::Unbounded;
        v.evidence = "escape: sup ||mu|| = " + std::to_string(sup);
        return v;
    }

    // plateau: compare the sup before the last window with the overall sup
    const double windowStart = t1 + (1.0 - cfg.plateau_window_frac) * span;
    double supBefore = 0.0;
    for (const auto& s : v.samples)
        if (s.first <= windowStart)
            supBefore = std::max(supBefore, s.second);
    const double increase = sup - supBefore;
    if (increase <= cfg.plateau_tol * std::max(sup, 1e-300) && !v.truncated) {
        v.kind = BoundednessVerdict::Kind::Bounded;
        v.evidence = "plateau: last-window increase " + std::to_string(increase);
        return v;
    }

    // growth: sup up to each doubling checkpoint span/8, span/4, span/2, span
    double check[4];
    for (int k = 0; k < 4; ++k) {
        const double tc = t1 + span / (1 << (3 - k));
        double m = 0.0;
        for (const auto& s : v.samples)
            if (s.first <= tc + 1e-12)
                m = std::max(m, s.second);
        check[k] = m;
    }
    bool growing = check[0] > 0.0;
    for (int k = 0; k < 3 && growing; ++k)
        growing = check[k + 1] > cfg.growth_ratio * check[k];
    if (growing) {
        v.kind = BoundednessVerdict::Kind::Unbounded;
        v.evidence = "growth: checkpoint sups " + std::to_string(check[0]) + ", " +
                     std::to_string(check[1]) + ", " + std::to_string(check[2]) + ", " +
                     std::to_string(check[3]);
        return v;
    }

    v.kind = BoundednessVerdict::Kind::Inconclusive;
    v.evidence = v.truncated ? "truncated stacked run without escape or plateau"
                             : "neither plateau nor sustained growth at this horizon";
    return v;
}

// ---------------------------------------------------------------------------
// omega membership (conditions alpha and beta)

struct OmegaCheck {
    MatrixC lambda;
    bool alpha_ok = false;
    double alpha_min_det = 0.0;  ///< min |det[I + Lambda mu(t)]| over the grid
    bool beta_ok = false;
    double beta_min_det = 0.0;   ///< min |det[I + Lambda K]| over limit candidates
    MatrixC K;                   ///< the candidate realizing beta_min_det
    std::vector<MatrixC> candidates;

    bool member() const { return alpha_ok && beta_ok; }
};

/// Test whether the offset Lambda belongs to the extremal-parametrizing set of
/// a normal base: alpha) I + Lambda mu(t) stays nonsingular on [t1, T];
/// beta) some limit matrix K of mu (extracted by clustering tail samples)
/// makes I + Lambda K singular. Throws BaseNotNormal when mu is not bounded.
inline OmegaCheck omega_membership(const FundamentalData& fd, const MatrixC& lambda, double T,
                                   const ClassifyConfig& cfg = {}) {
    const int n = fd.spec().dim;
    if (lambda.dim() != n)
        throw std::invalid_argument("omega_membership: offset dimension mismatch");
    const BoundednessVerdict mb = mu_boundedness(fd, T, cfg);
    if (!mb.bounded())
        throw BaseNotNormal("omega_membership: base solution kernel is not bounded (" +
                            mb.evidence + ")");

    OmegaCheck oc;
    oc.lambda = lambda;
    const double t1 = fd.t1();
    const double covered = std::min(T, fd.coveredEnd());
    const int g = std::max(cfg.grid_points, 9);
    const MatrixC eye = MatrixC::identity(n);

    double minDet = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g; ++i) {
        const double t = (i == g - 1) ? covered : t1 + (covered - t1) * i / (g - 1);
        minDet = std::min(minDet, std::abs(det(eye + lambda * fd.mu(t))));
    }
    oc.alpha_min_det = minDet;
    oc.alpha_ok = minDet > cfg.alpha_tol;

    // limit candidates: cluster mu samples on the tail window
    const double tailStart = t1 + (1.0 - cfg.plateau_window_frac) * (covered - t1);
    const int tailSamples = 33;
    std::vector<MatrixC> centroids;
    std::vector<int> counts;
    for (int i = 0; i < tailSamples; ++i) {
        const double t =
            (i == tailSamples - 1) ? covered : tailStart + (covered - tailStart) * i / (tailSamples - 1);
        const MatrixC m = fd.mu(t);
        bool placed = false;
        for (std::size_t c = 0; c < centroids.size() && !placed; ++c) {
            if ((m - centroids[c]).opNorm() < cfg.cluster_tol) {
                // running mean keeps the centroid centered on its cluster
                const double w = 1.0 / (counts[c] + 1);
                centroids[c] = centroids[c] * (1.0 - w) + m * w;
                ++counts[c];
                placed = true;
            }
        }
        if (!placed) {
            centroids.push_back(m);
            counts.push_back(1);
        }
    }
    oc.candidates = centroids;

    double best = std::numeric_limits<double>::infinity();
    MatrixC bestK = MatrixC::zeros(n);
    for (const MatrixC& K : centroids) {
        const double d = std::abs(det(eye + lambda * K));
        if (d < best) {
            best = d;
            bestK = K;
        }
    }
    oc.beta_min_det = best;
    oc.K = bestK;
    oc.beta_ok = best < cfg.beta_tol;
    return oc;
}

// ---------------------------------------------------------------------------
// tail integral nu

/// Controls for the windowed tail accumulation. The integrator runs in
/// effectively pure-relative mode so window contributions many orders below
/// one keep full relative precision.
struct NuConfig {
    NuConfig() {
        integ.rel_tol = 1e-12;
        integ.abs_tol = 1e-300;  // relative control only; exact zeros are skipped
    }
    double window_width = 1.0;    ///< span window width
    double tail_tol = 1e-8;       ///< convergence threshold on window contributions
    int max_tail_windows = 48;    ///< doubling windows tried past the span
    double escape_threshold = 1e12;
    IntegratorConfig integ;
};

struct NuResult {
    enum class Kind { Convergent, Divergent };
    Kind kind = Kind::Divergent;
    bool horizon_exceeded = false;  ///< ran out of windows/domain without a verdict
    MatrixC value;                  ///< nu(t_eval); partial sum when divergent
    double tail_bound = 0.0;        ///< bound on the neglected remainder (convergent)
    double t_eval = 0.0;
    std::vector<std::pair<double, double>> window_norms;  ///< (window end, ||contribution||)
    std::string evidence;

    bool convergent() const { return kind == Kind::Convergent; }
};

/// Backward-accumulated tail integral along one base solution. The stacked
/// state (base Z unless dense-backed, phi, psi, and a window-local mu) is
/// integrated window by window; phi and psi continue across windows while the
/// mu block restarts from zero, so each window contribution is computed at
/// full relative precision. nu(t) is then a suffix sum of contributions plus
/// the in-window remainder — no large-minus-large cancellation anywhere.
class NuAccumulation {
  public:
    struct Window {
        double t0 = 0.0;
        double t1 = 0.0;
        Trajectory stacked;
        MatrixC contribution;  ///< window-local mu at the window end
        MatrixC nuAfter;       ///< sum of contributions of all later windows
    };

    NuAccumulation() = default;

    double t1() const { return t1_; }
    double spanEnd() const { return spanEnd_; }
    /// Last time actually backed by window data (short of spanEnd on escape).
    double coveredEnd() const { return windows_.empty() ? t1_ : windows_.back().t1; }
    bool convergent() const { return convergent_; }
    bool horizonExceeded() const { return horizonExceeded_; }
    double tailBound() const { return tailBound_; }
    const std::string& evidence() const { return evidence_; }
    const std::vector<Window>& windows() const { return windows_; }

    /// nu(t) for t in [t1, spanEnd].
    MatrixC nu(double t) const {
        const Window& w = windowFor(t);
        return w.nuAfter + (w.contribution - w.stacked.evalBlock(t, muBlock_));
    }

    MatrixC phi(double t) const { return windowFor(t).stacked.evalBlock(t, zOffset_ + 0); }
    MatrixC psi(double t) const { return windowFor(t).stacked.evalBlock(t, zOffset_ + 1); }
    MatrixC Zbase(double t) const {
        return external_ ? source_->Z(t) : windowFor(t).stacked.evalBlock(t, 0);
    }

    const RiccatiTrajectory& source() const { return *source_; }

    // filled by build_nu
    std::vector<Window> windows_;
    std::shared_ptr<const RiccatiTrajectory> source_;
    double t1_ = 0.0;
    double spanEnd_ = 0.0;
    bool external_ = false;
    std::size_t zOffset_ = 1;
    std::size_t muBlock_ = 3;
    bool convergent_ = false;
    bool horizonExceeded_ = false;
    double tailBound_ = 0.0;
    std::string evidence_;

  private:
    const Window& windowFor(double t) const {
        if (windows_.empty())
            throw std::out_of_range("NuAccumulation: no windows");
        if (t < t1_ - 1e-12 || t > coveredEnd() + 1e-12)
            throw std::out_of_range("NuAccumulation: time outside accumulated span");
        std::size_t lo = 0, hi = windows_.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (windows_[mid].t1 >= t)
                hi = mid;
            else
                lo = mid + 1;
        }
        return windows_[lo];
    }
};

/// Accumulate nu along `base` with span windows covering [t1, spanEnd] and
/// doubling windows beyond, until the tail converges, diverges, or the budget
/// or coefficient domain runs out.
inline NuAccumulation build_nu(const RiccatiTrajectory& base, double spanEnd,
                               const NuConfig& cfg = {}) {
    const int n = base.spec().dim;
    const double t1 = base.t1();
    if (!(spanEnd > t1))
        throw std::invalid_argument("build_nu: need spanEnd > t1");
    if (!base.regularOn(std::min(spanEnd, base.coveredEnd())))
        throw std::invalid_argument("build_nu: base solution is not regular on the span");

    NuAccumulation acc;
    acc.source_ = std::make_shared<RiccatiTrajectory>(base);
    acc.t1_ = t1;
    acc.spanEnd_ = spanEnd;
    acc.external_ = base.denseAuthoritative();
    acc.zOffset_ = acc.external_ ? 0 : 1;
    acc.muBlock_ = acc.zOffset_ + 2;

    double hardEnd = base.spec().domainEnd();
    if (acc.external_)
        hardEnd = std::min(hardEnd, base.coveredEnd());
    if (spanEnd > hardEnd + 1e-9)
        throw OutOfDomain("build_nu: span end exceeds usable coefficient/base domain");

    auto field = std::make_shared<detail::FundamentalField>(acc.source_->spec(),
                                                            acc.source_.get(), acc.external_);
    const StateLayout layout = field->layout(n);
    OdeField f = [field](double t, const std::vector<cx>& y, std::vector<cx>& dy) {
        return (*field)(t, y, dy);
    };

    std::vector<cx> y(static_cast<std::size_t>(layout.total));
    if (!acc.external_)
        layout.pack(base.Z(t1), y, 0);
    layout.pack(MatrixC::identity(n), y, acc.zOffset_ + 0);
    layout.pack(MatrixC::identity(n), y, acc.zOffset_ + 1);
    layout.pack(MatrixC::zeros(n), y, acc.muBlock_);

    IntegratorConfig ic = cfg.integ;
    ic.blowup_threshold = cfg.escape_threshold;

    std::vector<double> norms;
    double cur = t1;
    int tailCount = 0;
    bool escaped = false;
    bool exhausted = false;

    while (true) {
        const bool isTail = cur >= spanEnd - 1e-12;
        double nominal = isTail ? t1 + 2.0 * (cur - t1)
                                : std::min(cur + cfg.window_width, spanEnd);
        if (isTail && nominal <= cur + 1e-9)
            nominal = cur + std::max(cfg.window_width, 1.0);
        const double wEnd = std::min(nominal, hardEnd);
        if (wEnd <= cur + 1e-12) {
            exhausted = true;
            break;
        }

        Trajectory tr = integrate(f, y, cur, wEnd, ic, layout);
        const bool died = tr.status() == Trajectory::Status::BlowUp;
        const double reached = tr.tEnd();
        MatrixC contrib = tr.evalBlock(reached, acc.muBlock_);
        norms.push_back(contrib.opNorm());
        acc.windows_.push_back(
            NuAccumulation::Window{cur, reached, std::move(tr), std::move(contrib), MatrixC(n)});

        if (died) {
            // phi/psi may escape while the kernel contributions are already
            // negligible (e.g. P vanishing with a growing linear part): apply
            // the convergence rule to what was collected before giving up
            const std::size_t k = norms.size() - 1;
            if (isTail && tailCount >= 1) {
                const double c = norms[k], p = norms[k - 1];
                if (c <= cfg.tail_tol && c <= p) {
                    double bound = 0.0;
                    if (c > 0.0 && p > 0.0) {
                        const double r = c / p;
                        bound = r < 1.0 ? c * r / (1.0 - r)
                                        : std::numeric_limits<double>::infinity();
                    }
                    if (bound <= cfg.tail_tol) {
                        acc.convergent_ = true;
                        acc.tailBound_ = bound;
                    }
                }
            }
            escaped = !acc.convergent_;
            break;
        }
        cur = reached;

        if (isTail) {
            ++tailCount;
            const std::size_t k = norms.size() - 1;
            if (tailCount >= 2) {
                const double c = norms[k], p = norms[k - 1];
                if (c <= cfg.tail_tol && c <= p) {
                    double bound = 0.0;
                    if (c > 0.0 && p > 0.0) {
                        const double r = c / p;
                        bound = r < 1.0 ? c * r / (1.0 - r)
                                        : std::numeric_limits<double>::infinity();
                    }
                    if (bound <= cfg.tail_tol) {
                        acc.convergent_ = true;
                        acc.tailBound_ = bound;
                        break;
                    }
                }
                if (tailCount >= 3 && norms[k] > 0.0 && norms[k] >= norms[k - 1] &&
                    norms[k - 1] >= norms[k - 2])
                    break;  // contributions refuse to decay
            }
            if (tailCount >= cfg.max_tail_windows) {
                exhausted = true;
                break;
            }
        }

        y = acc.windows_.back().stacked.sampleState(
            acc.windows_.back().stacked.sampleCount() - 1);
        layout.pack(MatrixC::zeros(n), y, acc.muBlock_);
    }

    if (acc.convergent_) {
        const bool atEscape =
            acc.windows_.back().stacked.status() == Trajectory::Status::BlowUp;
        acc.evidence_ = atEscape ? "tail negligible before the stacked state escaped"
                                 : "tail windows decayed below tolerance";
    } else if (escaped) {
        acc.evidence_ = norms.back() >= 0.01 * cfg.escape_threshold
                            ? "kernel escaped along the base"
                            : "stacked state escaped along the base";
    } else {
        const std::size_t m = norms.size();
        const bool growing = m >= 3 && norms[m - 1] > 0.0 && norms[m - 1] >= norms[m - 2] &&
                             norms[m - 2] >= norms[m - 3];
        if (growing && !exhausted) {
            acc.evidence_ = "window contributions non-decaying";
        } else {
            // the only remaining exit paths are exhaustion of the window
            // budget or of the usable coefficient/base domain
            acc.horizonExceeded_ = true;
            acc.evidence_ = growing ? "window contributions non-decaying at the domain end"
                                    : "window budget or coefficient domain exhausted "
                                      "before a verdict";
        }
    }

    // suffix sums: nuAfter[j] = sum of contributions of windows after j
    MatrixC suffix = MatrixC::zeros(n);
    for (std::size_t j = acc.windows_.size(); j-- > 0;) {
        acc.windows_[j].nuAfter = suffix;
        suffix += acc.windows_[j].contribution;
    }
    return acc;
}

/// Tail integral verdict and value at one time along the base of `fd`.
inline NuResult nu_tail(const FundamentalData& fd, double t, const NuConfig& cfg = {}) {
    const double t1 = fd.t1();
    if (t < t1)
        throw std::invalid_argument("nu_tail: need t >= t1");
    const double spanEnd = std::max(t, t1 + cfg.window_width);
    const NuAccumulation acc = build_nu(fd.sourceTrajectory(), spanEnd, cfg);

    NuResult r;
    r.t_eval = t;
    r.kind = acc.convergent() ? NuResult::Kind::Convergent : NuResult::Kind::Divergent;
    r.horizon_exceeded = acc.horizonExceeded();
    r.tail_bound = acc.tailBound();
    r.evidence = acc.evidence();
    for (const auto& w : acc.windows())
        r.window_norms.emplace_back(w.t1, w.contribution.opNorm());
    // clamped when the accumulation stopped short of t (escape along the base)
    r.value = acc.nu(std::min(t, acc.coveredEnd()));
    return r;
}

// ---------------------------------------------------------------------------
// principal solution

struct PrincipalConfig {
    double span_end = 0.0;            ///< 0 => t1 + 20
    double sample_step = 0.01;        ///< dense grid step of the returned trajectory
    double residual_check_span = 10.0;///< residual verified on [t1, t1 + this]
    bool verify = true;
    double classify_horizon = 15.0;   ///< extremality re-check span (from t1)
    NuConfig nu{};
    ClassifyConfig classify{};
};

struct PrincipalResult {
    RiccatiTrajectory trajectory;  ///< dense closed-form evaluation of Z_*
    MatrixC nu_t1;
    MatrixC lambda_star;           ///< -[nu(t1)]^{-1}; Z_*(t1) = Z0(t1) + lambda_star
    double tail_bound = 0.0;
    double min_det_nu_ratio = 0.0; ///< min |det nu| / ||nu||^n over the grid
    double max_residual = 0.0;     ///< dense-trajectory residual / (1 + largest term)
    double family_match_error = 0.0;
    bool verified_extremal = false;
    BoundednessVerdict::Kind verify_kind = BoundednessVerdict::Kind::Inconclusive;
};

/// Construct the principal (smallest/extremal) solution attached to a normal
/// base: Z_*(t) = Z0(t) - [Phi(t) nu(t) Psi(t)]^{-1}. Values and derivatives
/// come from the closed form over the windowed nu data; the returned
/// trajectory carries dense-authoritative samples so downstream integrations
/// read it instead of re-solving an exponentially unstable initial-value
/// problem. `fd` supplies the family cross-check (proof identity
/// Z_* = family member with offset -[nu(t1)]^{-1}).
inline PrincipalResult principal_solution(const RiccatiTrajectory& rt0, const FundamentalData& fd,
                                          const PrincipalConfig& cfg = {}) {
    const int n = rt0.spec().dim;
    const double t1 = rt0.t1();
    const double spanEnd = cfg.span_end > t1 ? cfg.span_end : t1 + 20.0;

    const NuAccumulation acc = build_nu(rt0, spanEnd, cfg.nu);
    if (!acc.convergent())
        throw NuDivergent("principal_solution: tail integral did not converge (" +
                          acc.evidence() + ")");

    const auto& spec = rt0.spec();
    struct Eval {
        MatrixC z, dz, nu;
    };
    double minDetRatio = std::numeric_limits<double>::infinity();
    auto evalStar = [&](double t, bool needDz) -> Eval {
        const MatrixC nu = acc.nu(t);
        const double scale = std::max(std::pow(nu.opNorm(), n), 1e-300);
        minDetRatio = std::min(minDetRatio, std::abs(det(nu)) / scale);
        const MatrixC z0 = acc.Zbase(t);
        const MatrixC m = acc.phi(t) * nu * acc.psi(t);
        MatrixC minv(n);
        try {
            minv = inverse(m);
        } catch (const SingularMatrix&) {
            throw NuSingular("principal_solution: Phi nu Psi singular at t=" +
                             std::to_string(t));
        }
        Eval e{z0 - minv, MatrixC(n), nu};
        if (needDz) {
            const auto q = spec.eval(t);
            const MatrixC dm = (q.P * z0 + q.R) * m + m * (z0 * q.P + q.Q) - q.P;
            const MatrixC dz0 = -(z0 * q.P * z0 + q.Q * z0 + z0 * q.R + q.S);
            e.dz = dz0 + minv * dm * minv;
        }
        return e;
    };

    // dense trajectory on a uniform grid: quartic segments matching value and
    // derivative at both ends plus the value at the segment midpoint
    const int nseg = std::max(1, static_cast<int>(std::ceil((spanEnd - t1) / cfg.sample_step)));
    const double h = (spanEnd - t1) / nseg;
    const StateLayout layout = StateLayout::single(n);
    Trajectory traj(layout, t1);
    traj.reserve(static_cast<std::size_t>(nseg) + 1);

    Eval left = evalStar(t1, true);
    std::vector<cx> yLeft(static_cast<std::size_t>(n) * n);
    layout.pack(left.z, yLeft, 0);
    traj.addSample(t1, yLeft);
    const MatrixC nuT1 = left.nu;

    for (int i = 0; i < nseg; ++i) {
        const double ta = t1 + h * i;
        const double tb = (i == nseg - 1) ? spanEnd : t1 + h * (i + 1);
        const Eval mid = evalStar(0.5 * (ta + tb), false);
        const Eval right = evalStar(tb, true);

        DenseStep ds;
        ds.t0 = ta;
        ds.h = tb - ta;
        const std::size_t sz = static_cast<std::size_t>(n) * n;
        ds.r1.resize(sz);
        ds.r2.resize(sz);
        ds.r3.resize(sz);
        ds.r4.resize(sz);
        ds.r5.resize(sz);
        for (std::size_t k = 0; k < sz; ++k) {
            const cx y0 = left.z.data()[k], y1 = right.z.data()[k];
            const cx d0 = ds.h * left.dz.data()[k], d1 = ds.h * right.dz.data()[k];
            const cx dlt = y1 - y0;
            ds.r1[k] = y0;
            ds.r2[k] = dlt;
            ds.r3[k] = d0 - dlt;
            ds.r4[k] = 2.0 * dlt - d0 - d1;
            ds.r5[k] = 16.0 * (mid.z.data()[k] - y0) - 8.0 * dlt - 4.0 * ds.r3[k] -
                       2.0 * ds.r4[k];
        }
        traj.addStep(std::move(ds));
        std::vector<cx> yR(sz);
        layout.pack(right.z, yR, 0);
        traj.addSample(tb, std::move(yR));
        left = right;
    }

    PrincipalResult res;
    res.trajectory = RiccatiTrajectory(spec, std::move(traj), t1);
    res.trajectory.setDenseAuthoritative(true);
    res.nu_t1 = nuT1;
    try {
        res.lambda_star = -inverse(nuT1);
    } catch (const SingularMatrix&) {
        throw NuSingular("principal_solution: nu(t1) is singular");
    }
    res.tail_bound = acc.tailBound();
    res.min_det_nu_ratio = minDetRatio;
    if (minDetRatio < 1e-10)
        throw NuSingular("principal_solution: det nu degenerates on the span (min ratio " +
                         std::to_string(minDetRatio) + ")");

    if (cfg.verify) {
        // (i) equation residual of the delivered dense trajectory, probed at
        // segment midpoints (the interpolant's worst points). The closed-form
        // derivative identity dz = dz0 + M^{-1} M' M^{-1} holds for any
        // invertible M, so probing it would verify nothing; the dense data
        // actually handed to downstream integrations is what gets tested.
        // The residual is normalized by the largest equation term: principal
        // solutions grow like the reciprocal of the shrinking tail, and an
        // absolute residual on such scales is floored at eps * scale / step by
        // the derivative measurement itself.
        const double resEnd = std::min(spanEnd, t1 + cfg.residual_check_span);
        const int inSpan = static_cast<int>(std::floor((resEnd - t1) / h));
        const int stride = std::max(1, inSpan / 2000);
        double worst = 0.0;
        for (int i = 0; i < inSpan; i += stride) {
            const double t = t1 + (i + 0.5) * h;
            if (t > resEnd)
                break;
            const MatrixC z = res.trajectory.Z(t);
            const MatrixC dz = res.trajectory.dZ(t);
            const auto q = spec.eval(t);
            const MatrixC zpz = z * q.P * z, qz = q.Q * z, zr = z * q.R;
            const double scale = std::max({dz.opNorm(), zpz.opNorm(), qz.opNorm(),
                                           zr.opNorm(), q.S.opNorm()});
            worst = std::max(worst,
                             (dz + zpz + qz + zr + q.S).opNorm() / (1.0 + scale));
        }
        res.max_residual = worst;

        // (ii) proof identity: Z_* is the family member with offset lambda_star
        double match = 0.0;
        for (double dt : {1.0, 2.5, 5.0}) {
            const double t = t1 + dt;
            if (t > spanEnd || t > fd.coveredEnd())
                continue;
            const MatrixC viaFamily = family_solution(fd, res.lambda_star, t);
            const MatrixC direct = res.trajectory.Z(t);
            match = std::max(match, (viaFamily - direct).opNorm() / (1.0 + direct.opNorm()));
        }
        res.family_match_error = match;

        // (iii) the constructed solution must itself classify as extremal
        const double ch = std::min(t1 + cfg.classify_horizon, spanEnd);
        FundamentalOptions fo;
        fo.escape_threshold = cfg.classify.fundamental_escape;
        fo.integ = cfg.classify.integ;
        const FundamentalData fdStar = fundamental_pair(res.trajectory, ch, fo);
        const BoundednessVerdict mb = mu_boundedness(fdStar, ch, cfg.classify);
        res.verify_kind = mb.kind;
        res.verified_extremal = mb.unbounded();
    }
    return res;
}

// ---------------------------------------------------------------------------
// per-solution classification

enum class SolutionClass { Normal, Extremal, NotRegular };

inline const char* to_string(SolutionClass c) {
    switch (c) {
        case SolutionClass::Normal: return "Normal";
        case SolutionClass::Extremal: return "Extremal";
        default: return "NotRegular";
    }
}

struct SolutionClassification {
    SolutionClass verdict = SolutionClass::Normal;
    double confidence = 0.0;   ///< 0..1; inconclusive boundedness lowers it
    double horizon = 0.0;
    BoundednessVerdict mu;     ///< populated for regular solutions
    bool has_blowup = false;
    BlowUpInfo blowup;         ///< populated when verdict is NotRegular
    std::string evidence;
};

/// Classify the solution from Z0 at t1: NotRegular when it escapes before the
/// horizon, otherwise Extremal/Normal by the boundedness of its kernel
/// integral. An inconclusive kernel verdict surfaces as Normal with low
/// confidence, never as an error.
inline SolutionClassification classify_solution(const CoefficientSpec& spec, const MatrixC& Z0,
                                                double t1, double horizon,
                                                const ClassifyConfig& cfg = {}) {
    SolutionClassification out;
    out.horizon = horizon;
    const RiccatiTrajectory rt = solve(spec, Z0, t1, horizon, cfg.integ);
    if (rt.status() == Trajectory::Status::BlowUp) {
        out.verdict = SolutionClass::NotRegular;
        out.has_blowup = true;
        out.blowup = rt.blowUp();
        out.confidence = rt.blowUp().wide_bracket ? 0.7 : 0.95;
        out.evidence = "escape at t = " + std::to_string(rt.blowUp().t_escape);
        return out;
    }
    try {
        FundamentalOptions fo;
        fo.escape_threshold = cfg.fundamental_escape;
        fo.integ = cfg.integ;
        const FundamentalData fd = fundamental_pair(rt, horizon, fo);
        out.mu = mu_boundedness(fd, horizon, cfg);
    } catch (const NearSingularFundamental& e) {
        out.verdict = SolutionClass::Normal;
        out.confidence = 0.1;
        out.evidence = std::string("fundamental data unusable: ") + e.what();
        return out;
    }
    switch (out.mu.kind) {
        case BoundednessVerdict::Kind::Bounded:
            out.verdict = SolutionClass::Normal;
            out.confidence = 0.9;
            break;
        case BoundednessVerdict::Kind::Unbounded:
            out.verdict = SolutionClass::Extremal;
            out.confidence = 0.9;
            break;
        default:
            out.verdict = SolutionClass::Normal;
            out.confidence = 0.25;
            break;
    }
    out.evidence = out.mu.evidence;
    return out;
}

// ---------------------------------------------------------------------------
// equation-level classification

namespace detail {

/// Run body(0..count-1) on up to `threads` workers. Each index is independent
/// and writes only its own slot, so results do not depend on the thread count.
inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t nThreads = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::vector<std::thread> pool;
    pool.reserve(nThreads);
    for (std::size_t k = 0; k < nThreads; ++k)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

inline double unitDraw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Entries drawn uniformly from the complex disk of the given radius, via the
/// polar map so the sequence is identical on every platform.
inline MatrixC randomDiskMatrix(int n, std::mt19937_64& rng, double radius) {
    MatrixC m(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double r = radius * std::sqrt(unitDraw(rng));
            const double th = 2.0 * 3.14159265358979323846 * unitDraw(rng);
            m(i, j) = cx{r * std::cos(th), r * std::sin(th)};
        }
    return m;
}

}  // namespace detail

struct SamplingConfig {
    int sample_count = 200;      ///< random initial matrices drawn
    double radius = 2.0;         ///< complex-disk radius for entries
    std::uint64_t seed = 0;
    int min_regular_quota = 5;   ///< fewer regular samples than this => Unknown
    double orbit_tol = 1e-2;     ///< relative late-time distance within one orbit
    int threads = 1;
    ClassifyConfig classify{};
};

struct EquationSample {
    MatrixC z0;
    SolutionClass verdict{};
    double confidence = 0.0;
    int orbit = -1;  ///< extremal orbit index, -1 otherwise
    bool seeded = false;
};

struct EquationClass {
    enum class Verdict { Normal, Irreconcilable, SubExtremal, SuperExtremal, Unknown };
    Verdict verdict = Verdict::Unknown;
    int normal_count = 0;
    int extremal_count = 0;
    int not_regular_count = 0;
    int extremal_orbits = 0;
    double confidence = 0.0;
    double horizon = 0.0;
    std::vector<EquationSample> samples;
};

inline const char* to_string(EquationClass::Verdict v) {
    switch (v) {
        case EquationClass::Verdict::Normal: return "Normal";
        case EquationClass::Verdict::Irreconcilable: return "Irreconcilable";
        case EquationClass::Verdict::SubExtremal: return "SubExtremal";
        case EquationClass::Verdict::SuperExtremal: return "SuperExtremal";
        default: return "Unknown";
    }
}

/// Map sampled evidence to the equation-level verdict: no extremal solutions
/// found => Normal; only extremal ones among the regular samples =>
/// Irreconcilable; one extremal orbit next to normal solutions => SubExtremal;
/// several => SuperExtremal.
inline EquationClass::Verdict equation_verdict(int normalCount, int extremalCount,
                                               int extremalOrbits) {
    if (extremalCount == 0)
        return EquationClass::Verdict::Normal;
    if (normalCount == 0)
        return EquationClass::Verdict::Irreconcilable;
    return extremalOrbits <= 1 ? EquationClass::Verdict::SubExtremal
                               : EquationClass::Verdict::SuperExtremal;
}

/// Sample initial matrices (scenario seeds first, then random disk draws),
/// classify each, group the extremal ones into orbits by late-time proximity,
/// and aggregate. Throws NoRegularSolutionFound when every sample escapes.
inline EquationClass classify_equation(const CoefficientSpec& spec, double t1, double horizon,
                                       const SamplingConfig& cfg = {}) {
    std::vector<MatrixC> draws;
    draws.reserve(spec.sampleSeeds.size() + static_cast<std::size_t>(cfg.sample_count));
    for (const auto& s : spec.sampleSeeds)
        draws.push_back(s);
    const std::size_t seeded = draws.size();
    std::mt19937_64 rng(cfg.seed);
    for (int i = 0; i < cfg.sample_count; ++i)
        draws.push_back(detail::randomDiskMatrix(spec.dim, rng, cfg.radius));

    EquationClass out;
    out.horizon = horizon;
    out.samples.resize(draws.size());
    detail::parallel_for(draws.size(), cfg.threads, [&](std::size_t i) {
        const SolutionClassification sc =
            classify_solution(spec, draws[i], t1, horizon, cfg.classify);
        out.samples[i] =
            EquationSample{draws[i], sc.verdict, sc.confidence, -1, i < seeded};
    });

    std::vector<std::size_t> extremalIdx;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        switch (out.samples[i].verdict) {
            case SolutionClass::Normal: ++out.normal_count; break;
            case SolutionClass::Extremal:
                ++out.extremal_count;
                extremalIdx.push_back(i);
                break;
            default: ++out.not_regular_count; break;
        }
    }
    const int regular = out.normal_count + out.extremal_count;
    if (regular == 0)
        throw NoRegularSolutionFound(
            "classify_equation: every sampled solution escaped before the horizon");

    // group extremal samples into orbits by their late-time positions
    if (!extremalIdx.empty()) {
        std::vector<RiccatiTrajectory> tr(extremalIdx.size());
        detail::parallel_for(extremalIdx.size(), cfg.threads, [&](std::size_t k) {
            tr[k] = solve(spec, draws[extremalIdx[k]], t1, horizon, cfg.classify.integ);
        });
        double tCmp = horizon;
        for (const auto& rt : tr)
            tCmp = std::min(tCmp, rt.coveredEnd());
        std::vector<MatrixC> at;
        at.reserve(tr.size());
        for (const auto& rt : tr)
            at.push_back(rt.Z(tCmp));
        std::vector<int> orbit(extremalIdx.size(), -1);
        int orbits = 0;
        for (std::size_t a = 0; a < at.size(); ++a) {
            if (orbit[a] >= 0)
                continue;
            orbit[a] = orbits;
            for (std::size_t b = a + 1; b < at.size(); ++b) {
                if (orbit[b] >= 0)
                    continue;
                const double d = (at[a] - at[b]).opNorm() /
                                 (1.0 + std::min(at[a].opNorm(), at[b].opNorm()));
                if (d <= cfg.orbit_tol)
                    orbit[b] = orbits;
            }
            ++orbits;
        }
        out.extremal_orbits = orbits;
        for (std::size_t k = 0; k < extremalIdx.size(); ++k)
            out.samples[extremalIdx[k]].orbit = orbit[k];
    }

    if (regular < cfg.min_regular_quota) {
        out.verdict = EquationClass::Verdict::Unknown;
        out.confidence = 0.2;
        return out;
    }
    out.verdict = equation_verdict(out.normal_count, out.extremal_count, out.extremal_orbits);
    double minConf = 1.0;
    for (const auto& s : out.samples)
        if (s.verdict != SolutionClass::NotRegular)
            minConf = std::min(minConf, s.confidence);
    out.confidence = std::min(0.9, minConf);
    return out;
}

}  // namespace riccati
