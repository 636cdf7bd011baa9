// Principal (extremal) solution of the decaying scalar equation.
//
// For z' + e^{-t} z^2 = 0 every solution has the closed form
// z(t) = k / (1 + k J(t)) with J(t) = 1 - e^{-t}, so the equation carries a
// single extremal solution: the one with k = -1, which stays regular while
// every nearby initial value below it escapes.  This demo classifies a few
// initial values, constructs the extremal solution from the convergent tail
// integral of the kernel, checks the offset-set membership test, and
// evaluates the trace integral that separates the extremal solution from a
// normal one.

#include <riccati/classify.hpp>
#include <riccati/coefficients.hpp>
#include <riccati/family.hpp>

#include <cmath>
#include <cstdio>

using namespace riccati;

int main() {
    const CoefficientSpec spec = builtin_scenario("decay_scalar");
    const double t1 = 0.0;
    const double T = 20.0;

    // The extremal member itself grows like e^t, so the probe horizon must
    // keep its magnitude below the integrator's escape threshold (1e8 by
    // default); t = 15 leaves two orders of headroom.
    std::printf("classification of z' + e^{-t} z^2 = 0 by initial value:\n");
    for (double k : {0.5, 0.0, -1.0, -1.5}) {
        const auto res = classify_solution(spec, MatrixC::scaledIdentity(1, k), t1, 15.0);
        std::printf("  z(0) = %+4.1f   %-10s (confidence %.2f)\n", k,
                    to_string(res.verdict), res.confidence);
    }

    // Construct the extremal solution from the normal base z = 0: the tail
    // integral nu(t) converges, and Z_*(t) = Z(t) - psi^{-1} nu^{-1} phi^{-1}
    // is the distinguished member of its family.
    const RiccatiTrajectory base = solve(spec, MatrixC::zeros(1), t1, T);
    const FundamentalData fd = fundamental_pair(base, T);
    PrincipalConfig pc;
    pc.span_end = T;
    const PrincipalResult pr = principal_solution(base, fd, pc);
    std::printf("\ndistinguished solution from the tail integral:\n");
    std::printf("  z_*(0)            = %+.12f   (closed form -1)\n",
                pr.trajectory.Z(t1)(0, 0).real());
    std::printf("  max residual      = %.2e\n", pr.max_residual);
    std::printf("  verified extremal = %s (kernel integral along z_*: %s)\n",
                pr.verified_extremal ? "yes" : "no",
                pr.verify_kind == BoundednessVerdict::Kind::Unbounded ? "unbounded"
                : pr.verify_kind == BoundednessVerdict::Kind::Bounded ? "bounded"
                                                                      : "inconclusive");

    // Membership in the family's extremal offset set: the offset must keep
    // I + L mu(t) nonsingular for all finite t (condition on the way) yet
    // make it singular in the limit (condition at infinity).  For the true
    // extremal offset the finite-span determinant decays like e^{-t}, so the
    // probe horizon must keep e^{-T} above the finite-span tolerance (1e-8);
    // T = 18 sits just above it.
    std::printf("\noffset-set membership relative to the base z = 0:\n");
    for (double l : {-1.0, -0.5, 0.0, 0.5}) {
        const OmegaCheck oc = omega_membership(fd, MatrixC::scaledIdentity(1, l), 18.0);
        std::printf("  L = %+4.1f   member %-3s   finite-span ok %-3s   limit singular %-3s\n",
                    l, oc.member() ? "yes" : "no", oc.alpha_ok ? "yes" : "no",
                    oc.beta_ok ? "yes" : "no");
    }

    // The integrated real trace of P (Z_* - Z_0) over [0, T] equals -T for
    // the extremal solution against the zero solution.
    std::printf("\ntrace integral against the zero solution (expected -T):\n");
    for (double horizon : {5.0, 10.0, 20.0}) {
        const double v = pair_integral(pr.trajectory, base, horizon);
        std::printf("  T = %4.1f   integral = %+.8f   deviation %.2e\n", horizon, v,
                    std::abs(v + horizon));
    }
    return 0;
}
