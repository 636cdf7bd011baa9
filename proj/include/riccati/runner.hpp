#pragma once

// Batch front end: parse a JSON scenario configuration, run one of the
// pipelines (solve / family / identities / classify-solution /
// classify-equation / principal / system-diagnostics), and leave the results
// in an output directory as a canonical `report.json` plus CSV artifacts.
//
// Exit codes:
//   0  the run completed and produced an answer (a blow-up located by `solve`
//      is an answer, as is a violated identity),
//   2  the command line or configuration was rejected before running,
//   3  a numerical precondition failed during the run (no regular sample
//      found, divergent tail integral, singular fundamental data, ...).
//      A report.json naming the failure is still written.
//
// Everything written is deterministic for a fixed configuration and seed:
// JSON objects serialize with sorted keys, floating-point values use
// shortest-round-trip / %.17g formatting, and equation-level sampling draws
// its initial matrices before any worker threads run, so reruns produce
// byte-identical files regardless of thread count.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "riccati/config.hpp"
#include "riccati/family.hpp"
#include "riccati/linsys.hpp"

namespace riccati {

namespace rundetail {

inline std::string csvNumber(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Uniform sample times over [a, b] with the final point snapped to b.
inline std::vector<double> sampleTimes(double a, double b, double step) {
    std::vector<double> ts;
    const double span = b - a;
    const long long K = static_cast<long long>(std::floor(span / step + 1e-9));
    for (long long k = 0; k <= K; ++k)
        ts.push_back(a + static_cast<double>(k) * step);
    if (ts.back() < b - 1e-12 * std::max(1.0, std::abs(b)))
        ts.push_back(b);
    else
        ts.back() = b;
    return ts;
}

/// CSV of a matrix-valued time series: t, re_0_0, im_0_0, re_0_1, ...
inline void writeMatrixCsv(std::ostream& os, const std::vector<double>& times, int dim,
                           const std::function<MatrixC(double)>& eval) {
    os << "t";
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            os << ",re_" << i << "_" << j << ",im_" << i << "_" << j;
    os << "\n";
    for (double t : times) {
        const MatrixC z = eval(t);
        os << csvNumber(t);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                os << "," << csvNumber(z(i, j).real()) << "," << csvNumber(z(i, j).imag());
        os << "\n";
    }
}

struct Emitter {
    std::filesystem::path outDir;
    std::string command;
    const RunConfig* cfg = nullptr;
    std::ostream* out = nullptr;

    void writeReport(const std::string& verdict, Json evidence,
                     Json artifacts = Json::object()) const {
        Json rpt;
        rpt["command"] = command;
        rpt["verdict"] = verdict;
        rpt["evidence"] = std::move(evidence);
        rpt["artifacts"] = std::move(artifacts);
        rpt["config"] = cfg->resolved;
        std::ofstream f(outDir / "report.json", std::ios::binary);
        if (!f)
            throw ValidationError("cannot write " + (outDir / "report.json").string());
        f << rpt.dump(2) << "\n";
    }

    std::ofstream openCsv(const std::string& name) const {
        std::ofstream f(outDir / name, std::ios::binary);
        if (!f)
            throw ValidationError("cannot write " + (outDir / name).string());
        return f;
    }

    int answer(const std::string& verdict) const {
        *out << command << ": " << verdict << "\n";
        return 0;
    }

    /// A numerical precondition failed: record it and exit 3.
    int numericalFailure(const std::string& kind, const std::string& message) const {
        writeReport(kind, Json{{"message", message}});
        *out << command << ": " << kind << "\n";
        return 3;
    }
};

inline Json blowupJson(const BlowUpInfo& b) {
    return Json{{"t_escape", b.t_escape},
                {"last_norm", b.last_norm},
                {"wide_bracket", b.wide_bracket}};
}

inline const char* to_string(BoundednessVerdict::Kind k) {
    switch (k) {
        case BoundednessVerdict::Kind::Bounded: return "Bounded";
        case BoundednessVerdict::Kind::Unbounded: return "Unbounded";
        default: return "Inconclusive";
    }
}

// ---------------------------------------------------------------------------
// commands

inline int cmdSolve(const RunConfig& cfg, const Emitter& em) {
    const RiccatiTrajectory rt =
        solve(cfg.scenario.riccati, cfg.initial, cfg.t1, cfg.horizon, cfg.integ);
    const double end = rt.coveredEnd();
    const auto times = sampleTimes(cfg.t1, end, cfg.output_step);
    double maxNorm = 0.0;
    {
        auto f = em.openCsv("trajectory.csv");
        writeMatrixCsv(f, times, rt.spec().dim, [&](double t) {
            const MatrixC z = rt.Z(std::min(t, end));
            maxNorm = std::max(maxNorm, z.opNorm());
            return z;
        });
    }
    Json ev{{"t1", cfg.t1},
            {"horizon", cfg.horizon},
            {"covered_end", end},
            {"samples", times.size()},
            {"max_z_norm", maxNorm},
            {"z_end", matrix_to_json(rt.Z(end))}};
    const bool regular = rt.status() == Trajectory::Status::Regular;
    if (!regular)
        ev["blowup"] = blowupJson(rt.blowUp());
    em.writeReport(regular ? "Regular" : "BlowUp", std::move(ev),
                   Json{{"trajectory", "trajectory.csv"}});
    return em.answer(regular ? "Regular" : "BlowUp");
}

inline int cmdFamily(const RunConfig& cfg, const Emitter& em) {
    if (!cfg.has_family)
        throw ValidationError("config: the family command needs a \"family\" block");
    const RiccatiTrajectory rt =
        solve(cfg.scenario.riccati, cfg.initial, cfg.t1, cfg.horizon, cfg.integ);
    if (rt.status() != Trajectory::Status::Regular)
        return em.numericalFailure("BaseEscaped",
                                   "base solution escaped at t=" +
                                       csvNumber(rt.blowUp().t_escape) +
                                       "; the family needs a base regular through the horizon");
    const FundamentalData fd = fundamental_pair(rt, cfg.horizon);
    const std::vector<double> times = cfg.family_times.empty()
                                          ? sampleTimes(cfg.t1, cfg.horizon, cfg.output_step)
                                          : cfg.family_times;
    const int n = cfg.scenario.riccati.dim;
    std::vector<double> evaluated;
    std::vector<MatrixC> members;
    std::optional<double> firstSingular;
    std::string singularNote;
    double maxNorm = 0.0;
    for (double t : times) {
        try {
            MatrixC z = family_solution(fd, cfg.family_lambda, t);
            maxNorm = std::max(maxNorm, z.opNorm());
            evaluated.push_back(t);
            members.push_back(std::move(z));
        } catch (const FamilyBlowUp& e) {
            firstSingular = t;
            singularNote = e.what();
            break;
        }
    }
    {
        auto f = em.openCsv("family.csv");
        std::size_t idx = 0;
        writeMatrixCsv(f, evaluated, n, [&](double) { return members[idx++]; });
    }
    Json ev{{"lambda", matrix_to_json(cfg.family_lambda)},
            {"times_requested", times.size()},
            {"times_evaluated", evaluated.size()},
            {"max_member_norm", maxNorm}};
    std::string verdict = "Regular";
    if (firstSingular) {
        verdict = "MemberBlowUp";
        ev["first_singular_time"] = *firstSingular;
        ev["detail"] = singularNote;
    }
    em.writeReport(verdict, std::move(ev), Json{{"family", "family.csv"}});
    return em.answer(verdict);
}

inline int cmdIdentities(const RunConfig& cfg, const Emitter& em) {
    if (!cfg.has_identities)
        throw ValidationError("config: the identities command needs an \"identities\" block");
    const double tEval = cfg.identities_time;
    const RiccatiTrajectory rt1 =
        solve(cfg.scenario.riccati, cfg.initial, cfg.t1, cfg.horizon, cfg.integ);
    if (rt1.coveredEnd() + 1e-12 < tEval)
        return em.numericalFailure("BaseEscaped", "first solution escaped at t=" +
                                                      csvNumber(rt1.blowUp().t_escape));
    const RiccatiTrajectory rt2 =
        solve(cfg.scenario.riccati, cfg.second_initial, cfg.t1, cfg.horizon, cfg.integ);
    if (rt2.coveredEnd() + 1e-12 < tEval)
        return em.numericalFailure("CompanionEscaped", "second solution escaped at t=" +
                                                           csvNumber(rt2.blowUp().t_escape));
    const double detRes = det_identity_residual(rt1, rt2, tEval);
    const double recRes = reciprocity_residual(rt1, rt2, tEval);
    const double pairInt = pair_integral(rt1, rt2, tEval);
    const bool holds = std::max(detRes, recRes) <= cfg.identities_tol;
    Json ev{{"time", tEval},
            {"tol", cfg.identities_tol},
            {"det_identity_residual", detRes},
            {"reciprocity_residual", recRes},
            {"pair_integral", pairInt}};
    em.writeReport(holds ? "Holds" : "Violated", std::move(ev));
    return em.answer(holds ? "Holds" : "Violated");
}

inline int cmdClassifySolution(const RunConfig& cfg, const Emitter& em) {
    const SolutionClassification sc =
        classify_solution(cfg.scenario.riccati, cfg.initial, cfg.t1, cfg.horizon, cfg.classify);
    Json ev{{"horizon", sc.horizon},
            {"confidence", sc.confidence},
            {"detail", sc.evidence},
            {"has_blowup", sc.has_blowup}};
    if (sc.has_blowup)
        ev["blowup"] = blowupJson(sc.blowup);
    if (sc.verdict != SolutionClass::NotRegular)
        ev["mu"] = Json{{"kind", to_string(sc.mu.kind)},
                        {"sup_norm", sc.mu.sup_norm},
                        {"covered", sc.mu.covered},
                        {"truncated", sc.mu.truncated}};
    em.writeReport(to_string(sc.verdict), std::move(ev));
    return em.answer(to_string(sc.verdict));
}

inline int cmdClassifyEquation(const RunConfig& cfg, const Emitter& em) {
    EquationClass ec;
    try {
        ec = classify_equation(cfg.scenario.riccati, cfg.t1, cfg.horizon, cfg.sampling);
    } catch (const NoRegularSolutionFound& e) {
        return em.numericalFailure("NoRegularSolutionFound", e.what());
    }
    Json samples = Json::array();
    for (const EquationSample& s : ec.samples)
        samples.push_back(Json{{"z0", matrix_to_json(s.z0)},
                               {"verdict", to_string(s.verdict)},
                               {"confidence", s.confidence},
                               {"orbit", s.orbit},
                               {"seeded", s.seeded}});
    Json ev{{"horizon", ec.horizon},
            {"confidence", ec.confidence},
            {"normal_count", ec.normal_count},
            {"extremal_count", ec.extremal_count},
            {"not_regular_count", ec.not_regular_count},
            {"extremal_orbits", ec.extremal_orbits},
            {"samples", std::move(samples)}};
    em.writeReport(to_string(ec.verdict), std::move(ev));
    return em.answer(to_string(ec.verdict));
}

inline int cmdPrincipal(const RunConfig& cfg, const Emitter& em) {
    const RiccatiTrajectory rt0 =
        solve(cfg.scenario.riccati, cfg.initial, cfg.t1, cfg.horizon, cfg.integ);
    if (rt0.status() != Trajectory::Status::Regular)
        return em.numericalFailure("BaseEscaped",
                                   "base solution escaped at t=" +
                                       csvNumber(rt0.blowUp().t_escape) +
                                       "; the construction needs a normal base solution");
    const FundamentalData fd = fundamental_pair(rt0, cfg.horizon);
    PrincipalResult pr;
    try {
        pr = principal_solution(rt0, fd, cfg.principal);
    } catch (const BaseNotNormal& e) {
        return em.numericalFailure("BaseNotNormal", e.what());
    } catch (const NuDivergent& e) {
        return em.numericalFailure("NuDivergent", e.what());
    } catch (const NuSingular& e) {
        return em.numericalFailure("NuSingular", e.what());
    }
    const double end = pr.trajectory.coveredEnd();
    const auto times = sampleTimes(cfg.t1, end, cfg.output_step);
    {
        auto f = em.openCsv("principal.csv");
        writeMatrixCsv(f, times, cfg.scenario.riccati.dim,
                       [&](double t) { return pr.trajectory.Z(std::min(t, end)); });
    }
    Json ev{{"z_star_t1", matrix_to_json(pr.trajectory.Z(cfg.t1))},
            {"lambda_star", matrix_to_json(pr.lambda_star)},
            {"nu_t1", matrix_to_json(pr.nu_t1)},
            {"span_end", end},
            {"tail_bound", pr.tail_bound},
            {"min_det_nu_ratio", pr.min_det_nu_ratio},
            {"max_residual", pr.max_residual},
            {"family_match_error", pr.family_match_error},
            {"verified_extremal", pr.verified_extremal},
            {"verify_kind", to_string(pr.verify_kind)}};
    const std::string verdict = pr.verified_extremal ? "Extremal" : "Unverified";
    em.writeReport(verdict, std::move(ev), Json{{"principal", "principal.csv"}});
    return em.answer(verdict);
}

inline int cmdSystemDiagnostics(const RunConfig& cfg, const Emitter& em) {
    if (!cfg.has_diagnostics)
        throw ValidationError("config: system-diagnostics needs a \"diagnostics\" block");
    const SystemSpec& sys = cfg.scenario.system;
    SystemTrajectory st1, st2;
    try {
        st1 = integrate_system(sys, cfg.initial_phi, cfg.initial_psi, cfg.t1, cfg.horizon,
                               cfg.integ);
        st2 = integrate_system(sys, cfg.second_phi, cfg.second_psi, cfg.t1, cfg.horizon,
                               cfg.integ);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("config: diagnostics pairs: ") + e.what());
    }
    const double needed = cfg.horizon - 1e-9 * std::max(1.0, std::abs(cfg.horizon));
    if (st1.coveredEnd() < needed || st2.coveredEnd() < needed) {
        const bool first = st1.coveredEnd() < needed;
        return em.numericalFailure(
            "PairEscaped", std::string(first ? "first" : "second") +
                               " solution pair escaped at t=" +
                               csvNumber(first ? st1.coveredEnd() : st2.coveredEnd()) +
                               "; raise blowup_threshold or shorten the horizon");
    }
    if (!st1.regular() || !st2.regular())
        return em.numericalFailure(
            "DetVanished", std::string(!st1.regular() ? "first" : "second") +
                               " pair's det phi vanishes inside the window; "
                               "determinant ratios are undefined there");
    std::vector<double> grid;
    const int gp = cfg.diagnostics_grid_points;
    for (int i = 0; i < gp; ++i)
        grid.push_back(cfg.t1 + (cfg.horizon - cfg.t1) * static_cast<double>(i) /
                                    static_cast<double>(gp - 1));
    const RatioDiagnostics diag = ratio_diagnostics(st1, st2, grid);
    {
        auto f = em.openCsv("ratios.csv");
        ratio_csv(diag, f);
    }
    Json ev{{"principal_index", diag.principal_index},
            {"independent_at_start", diag.independent_at_start},
            {"detail", diag.evidence},
            {"det_phi1_start", st1.detPhiAbs(cfg.t1)},
            {"det_phi1_end", st1.detPhiAbs(cfg.horizon)},
            {"det_phi2_start", st2.detPhiAbs(cfg.t1)},
            {"det_phi2_end", st2.detPhiAbs(cfg.horizon)}};
    em.writeReport(to_string(diag.verdict), std::move(ev), Json{{"ratios", "ratios.csv"}});
    return em.answer(to_string(diag.verdict));
}

}  // namespace rundetail

/// Entry point shared by the binary and the tests: `args` holds everything
/// after the program name.  Output and error streams are injectable so tests
/// can capture them.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Toolkit for quadratic matrix differential equations and their companion\n"
                 "linear systems: solve initial-value problems, sweep solution families,\n"
                 "check pairwise determinant identities, classify solutions and equations,\n"
                 "construct the distinguished (extremal) solution, and compare fundamental\n"
                 "pairs of the companion system.",
                 "riccati-kit"};
    app.footer("Exit codes: 0 = answered, 2 = bad usage or configuration, 3 = numerical\n"
               "precondition failed (details in report.json).\n"
               "Builtin scenarios: pure_quadratic_constant, decay_scalar, bounded_support,\n"
               "linear_only.");
    app.require_subcommand(1);

    std::string configPath;
    std::string outDir = ".";
    std::optional<std::uint64_t> seedOverride;
    std::optional<double> horizonOverride, relTolOverride, absTolOverride;

    const auto addCommon = [&](CLI::App* sub) {
        sub->add_option("--config", configPath, "JSON run configuration")->required();
        sub->add_option("--out", outDir, "output directory (default: current)");
        sub->add_option("--seed", seedOverride, "override sampling.seed");
        sub->add_option("--horizon", horizonOverride, "override the decision horizon");
        sub->add_option("--rel-tol", relTolOverride, "override integrator.rel_tol");
        sub->add_option("--abs-tol", absTolOverride, "override integrator.abs_tol");
    };

    struct Cmd {
        const char* name;
        const char* desc;
        int (*fn)(const RunConfig&, const rundetail::Emitter&);
    };
    const Cmd cmds[] = {
        {"solve", "integrate one initial-value problem and emit the trajectory",
         &rundetail::cmdSolve},
        {"family", "sweep the solution with a given initial offset from the base",
         &rundetail::cmdFamily},
        {"identities", "check the pairwise determinant and reciprocity identities",
         &rundetail::cmdIdentities},
        {"classify-solution", "decide whether one solution is normal, extremal, or not regular",
         &rundetail::cmdClassifySolution},
        {"classify-equation", "sample initial values and classify the equation itself",
         &rundetail::cmdClassifyEquation},
        {"principal", "construct the distinguished solution from the tail integral",
         &rundetail::cmdPrincipal},
        {"system-diagnostics", "compare two fundamental pairs of the companion linear system",
         &rundetail::cmdSystemDiagnostics},
    };
    std::vector<CLI::App*> subs;
    for (const Cmd& c : cmds) {
        CLI::App* sub = app.add_subcommand(c.name, c.desc);
        addCommon(sub);
        subs.push_back(sub);
    }

    std::vector<const char*> argv;
    argv.push_back("riccati-kit");
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const Cmd* chosen = nullptr;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed())
            chosen = &cmds[i];
    if (!chosen) {  // unreachable given require_subcommand(1)
        err << "riccati-kit: no command selected\n";
        return 2;
    }

    try {
        Json raw;
        {
            std::ifstream f(configPath, std::ios::binary);
            if (!f)
                throw ValidationError("cannot open config file: " + configPath);
            try {
                raw = Json::parse(f);
            } catch (const Json::parse_error& e) {
                throw ValidationError(std::string("config is not valid JSON: ") + e.what());
            }
        }
        // Apply command-line overrides to the raw document so derived defaults
        // and validation see the final values.
        if (!raw.is_object())
            throw ValidationError("config: top level: expected an object");
        if (seedOverride)
            raw["sampling"]["seed"] = *seedOverride;
        if (horizonOverride)
            raw["horizon"] = *horizonOverride;
        if (relTolOverride)
            raw["integrator"]["rel_tol"] = *relTolOverride;
        if (absTolOverride)
            raw["integrator"]["abs_tol"] = *absTolOverride;

        RunConfig cfg = run_config_from_json(raw);

        if (const char* cap = std::getenv("RICCATI_KIT_THREADS")) {
            const int capVal = std::atoi(cap);
            if (capVal >= 1 && cfg.sampling.threads > capVal)
                cfg.sampling.threads = capVal;
        }

        std::filesystem::path outPath(outDir);
        std::error_code ec;
        std::filesystem::create_directories(outPath, ec);
        if (ec)
            throw ValidationError("cannot create output directory: " + outDir);

        const rundetail::Emitter em{outPath, chosen->name, &cfg, &out};
        try {
            return chosen->fn(cfg, em);
        } catch (const NearSingularFundamental& e) {
            return em.numericalFailure("NearSingularFundamental", e.what());
        } catch (const SingularInitialPhi& e) {
            return em.numericalFailure("SingularInitialPhi", e.what());
        } catch (const SingularMatrix& e) {
            return em.numericalFailure("SingularMatrix", e.what());
        } catch (const FamilyBlowUp& e) {
            return em.numericalFailure("FamilyBlowUp", e.what());
        }
    } catch (const ValidationError& e) {
        err << "riccati-kit: " << e.what() << "\n";
        return 2;
    } catch (const OutOfDomain& e) {
        err << "riccati-kit: config: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "riccati-kit: config: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace riccati
