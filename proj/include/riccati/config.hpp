#pragma once

// JSON run configuration for the command-line front end.
//
// A run is described by a single JSON document.  Parsing is strict: unknown
// keys, wrong types, inconsistent dimensions, and out-of-domain spans are all
// rejected with a ValidationError that names the offending path.  The parsed
// configuration keeps a canonical re-serialization of itself (`resolved`,
// with every default filled in) so reports can embed the exact inputs that
// produced them.
//
// Schema overview (all blocks optional unless noted):
//
//   {
//     "scenario": {                      // required
//       "kind": "riccati" | "system",    // default "riccati"
//       // either a builtin family...
//       "builtin": "decay_scalar", "params": {"dim": 1, "scale": 1, "rate": 1},
//       // ...or explicit coefficients (riccati: P,Q,R,S; system: A,B,C,D)
//       "dim": 2, "t0": 0.0, "label": "free-form",
//       "P": <coefficient>, "Q": <coefficient>, ...
//     },
//     "t1": 0.0,                         // anchor time, default scenario t0
//     "horizon": 20.0,                   // default t1 + 20
//     "output_step": 0.05,               // CSV sampling step, default span/400
//     "initial": <matrix>,               // Z(t1), default zero
//     "initial_phi": <matrix>,           // system runs, default identity
//     "initial_psi": <matrix>,           // system runs, default `initial`
//     "integrator": { "rel_tol": ..., "abs_tol": ..., "max_step": ...,
//                     "fixed_step": ..., "blowup_threshold": ..., "max_steps": ... },
//     "classify":   { "mu_escape": ..., "plateau_tol": ..., "plateau_window_frac": ...,
//                     "growth_ratio": ..., "alpha_tol": ..., "beta_tol": ...,
//                     "cluster_tol": ..., "fundamental_escape": ..., "grid_points": ... },
//     "sampling":   { "sample_count": ..., "radius": ..., "seed": ...,
//                     "min_regular_quota": ..., "orbit_tol": ..., "threads": ... },
//     "principal":  { "span_end": ..., "sample_step": ..., "residual_check_span": ...,
//                     "verify": true, "classify_horizon": ... },
//     "family":     { "lambda": <matrix>, "times": [ ... ] },
//     "identities": { "second_initial": <matrix>, "time": ..., "tol": ... },
//     "diagnostics":{ "second_phi": <matrix>, "second_psi": <matrix>,
//                     "grid_points": 257 }
//   }
//
// <matrix> is an n x n array of rows, each entry a [re, im] pair:
//   [[[1,0],[0,0]],[[0,0],[1,0]]] is the 2x2 identity.
// <coefficient> is one of
//   - a bare <matrix>                          (constant in time),
//   - {"family": "zero"}                       (explicit zero),
//   - {"family": "constant",        "params": {"value": <matrix>}},
//   - {"family": "scalar_exp_decay","params": {"scale": s, "rate": r}},
//   - {"family": "matrix_exp_decay","params": {"value": <matrix>, "rate": r}},
//   - {"family": "smooth_bump",     "params": {"scale": s, "cutoff": c}},
//   - {"table": {"times": [...], "values": [<matrix>, ...]}}  (piecewise linear).

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "riccati/classify.hpp"
#include "riccati/linsys.hpp"
#include "riccati/coefficients.hpp"
#include "riccati/integrate.hpp"
#include "riccati/matrix.hpp"

namespace riccati {

using Json = nlohmann::json;

/// A malformed or inconsistent run configuration.  Front ends report these
/// as usage errors, distinct from numerical failures during the run itself.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
    throw ValidationError("config: " + where + ": " + what);
}

inline void requireObject(const Json& j, const std::string& where) {
    if (!j.is_object())
        fail(where, "expected an object");
}

/// Reject keys outside the allowed set so typos surface instead of being
/// silently ignored.
inline void requireKeys(const Json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
    requireObject(j, where);
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) {
            std::string names;
            for (const char* k : allowed) {
                if (!names.empty())
                    names += ", ";
                names += k;
            }
            fail(where, "unknown key \"" + item.key() + "\" (allowed: " + names + ")");
        }
    }
}

inline double asNumber(const Json& j, const std::string& where) {
    if (!j.is_number())
        fail(where, "expected a number");
    return j.get<double>();
}

inline double numberField(const Json& obj, const char* key, double fallback,
                          const std::string& where) {
    if (!obj.contains(key))
        return fallback;
    return asNumber(obj.at(key), where + "." + key);
}

inline std::int64_t intField(const Json& obj, const char* key, std::int64_t fallback,
                             const std::string& where) {
    if (!obj.contains(key))
        return fallback;
    const Json& j = obj.at(key);
    if (!j.is_number_integer() && !j.is_number_unsigned())
        fail(where + "." + key, "expected an integer");
    return j.get<std::int64_t>();
}

inline bool boolField(const Json& obj, const char* key, bool fallback, const std::string& where) {
    if (!obj.contains(key))
        return fallback;
    const Json& j = obj.at(key);
    if (!j.is_boolean())
        fail(where + "." + key, "expected a boolean");
    return j.get<bool>();
}

inline std::string stringField(const Json& obj, const char* key, const std::string& fallback,
                               const std::string& where) {
    if (!obj.contains(key))
        return fallback;
    const Json& j = obj.at(key);
    if (!j.is_string())
        fail(where + "." + key, "expected a string");
    return j.get<std::string>();
}

}  // namespace cfgdetail

// ---------------------------------------------------------------------------
// matrix and coefficient codecs

/// Decode an n x n matrix from nested arrays of [re, im] pairs.
inline MatrixC matrix_from_json(const Json& j, const std::string& where) {
    using cfgdetail::fail;
    if (!j.is_array() || j.empty())
        fail(where, "expected a non-empty array of rows");
    const int n = static_cast<int>(j.size());
    MatrixC m = MatrixC::zeros(n);
    for (int i = 0; i < n; ++i) {
        const Json& row = j.at(i);
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            fail(where, "row " + std::to_string(i) + " must hold exactly " + std::to_string(n) +
                            " entries (matrix must be square)");
        for (int k = 0; k < n; ++k) {
            const Json& e = row.at(k);
            if (!e.is_array() || e.size() != 2 || !e.at(0).is_number() || !e.at(1).is_number())
                fail(where, "entry (" + std::to_string(i) + "," + std::to_string(k) +
                                ") must be a [re, im] pair of numbers");
            m(i, k) = cx(e.at(0).get<double>(), e.at(1).get<double>());
        }
    }
    return m;
}

/// Encode a matrix in the same nested [re, im] layout the parser accepts.
inline Json matrix_to_json(const MatrixC& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.dim(); ++i) {
        Json row = Json::array();
        for (int k = 0; k < m.dim(); ++k)
            row.push_back(Json::array({m(i, k).real(), m(i, k).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Decode one time-dependent coefficient.  `normalized`, when non-null,
/// receives the canonical object form of whatever shorthand was supplied.
inline CoefficientFunction coefficient_from_json(const Json& j, int dim, const std::string& where,
                                                 Json* normalized = nullptr) {
    using cfgdetail::fail;
    const auto checkDim = [&](const MatrixC& m, const std::string& at) {
        if (m.dim() != dim)
            fail(at, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) +
                         " matrix, got " + std::to_string(m.dim()) + "x" + std::to_string(m.dim()));
    };

    if (j.is_array()) {  // bare matrix: constant coefficient
        const MatrixC m = matrix_from_json(j, where);
        checkDim(m, where);
        if (normalized)
            *normalized = Json{{"family", "constant"}, {"params", Json{{"value", matrix_to_json(m)}}}};
        return CoefficientFunction::constant(m);
    }
    cfgdetail::requireObject(j, where);

    if (j.contains("table")) {
        cfgdetail::requireKeys(j, where, {"table"});
        const Json& tb = j.at("table");
        cfgdetail::requireKeys(tb, where + ".table", {"times", "values"});
        if (!tb.contains("times") || !tb.contains("values"))
            fail(where + ".table", "needs both \"times\" and \"values\"");
        const Json& jt = tb.at("times");
        const Json& jv = tb.at("values");
        if (!jt.is_array() || !jv.is_array() || jt.size() != jv.size() || jt.size() < 2)
            fail(where + ".table", "\"times\" and \"values\" must be equal-length arrays of 2+ knots");
        std::vector<double> times;
        std::vector<MatrixC> values;
        for (std::size_t i = 0; i < jt.size(); ++i) {
            times.push_back(cfgdetail::asNumber(jt.at(i), where + ".table.times[" + std::to_string(i) + "]"));
            MatrixC m = matrix_from_json(jv.at(i), where + ".table.values[" + std::to_string(i) + "]");
            checkDim(m, where + ".table.values[" + std::to_string(i) + "]");
            values.push_back(std::move(m));
        }
        if (normalized)
            *normalized = j;
        try {
            return CoefficientFunction::table(times, values);
        } catch (const std::invalid_argument& e) {
            fail(where + ".table", e.what());
        }
    }

    cfgdetail::requireKeys(j, where, {"family", "params"});
    const std::string family = cfgdetail::stringField(j, "family", "", where);
    if (family.empty())
        fail(where, "coefficient object needs a \"family\" (or \"table\") key");
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    const std::string pwhere = where + ".params";
    cfgdetail::requireObject(params, pwhere);

    const auto paramMatrix = [&](const char* key) {
        if (!params.contains(key))
            fail(pwhere, std::string("family \"") + family + "\" needs \"" + key + "\"");
        MatrixC m = matrix_from_json(params.at(key), pwhere + "." + key);
        checkDim(m, pwhere + "." + std::string(key));
        return m;
    };

    Json canon{{"family", family}};
    if (family == "zero") {
        cfgdetail::requireKeys(params, pwhere, {});
        if (normalized)
            *normalized = canon;
        return CoefficientFunction::zero(dim);
    }
    if (family == "constant") {
        cfgdetail::requireKeys(params, pwhere, {"value"});
        const MatrixC m = paramMatrix("value");
        canon["params"] = Json{{"value", matrix_to_json(m)}};
        if (normalized)
            *normalized = canon;
        return CoefficientFunction::constant(m);
    }
    if (family == "scalar_exp_decay") {
        cfgdetail::requireKeys(params, pwhere, {"scale", "rate"});
        const double scale = cfgdetail::numberField(params, "scale", 1.0, pwhere);
        const double rate = cfgdetail::numberField(params, "rate", 1.0, pwhere);
        canon["params"] = Json{{"scale", scale}, {"rate", rate}};
        if (normalized)
            *normalized = canon;
        return CoefficientFunction::scalarExpDecay(dim, scale, rate);
    }
    if (family == "matrix_exp_decay") {
        cfgdetail::requireKeys(params, pwhere, {"value", "rate"});
        const MatrixC m = paramMatrix("value");
        const double rate = cfgdetail::numberField(params, "rate", 1.0, pwhere);
        canon["params"] = Json{{"value", matrix_to_json(m)}, {"rate", rate}};
        if (normalized)
            *normalized = canon;
        return CoefficientFunction::matrixExpDecay(m, rate);
    }
    if (family == "smooth_bump") {
        cfgdetail::requireKeys(params, pwhere, {"scale", "cutoff"});
        const double scale = cfgdetail::numberField(params, "scale", 1.0, pwhere);
        const double cutoff = cfgdetail::numberField(params, "cutoff", 1.0, pwhere);
        canon["params"] = Json{{"scale", scale}, {"cutoff", cutoff}};
        if (normalized)
            *normalized = canon;
        try {
            return CoefficientFunction::smoothBump(dim, scale, cutoff);
        } catch (const std::invalid_argument& e) {
            fail(pwhere, e.what());
        }
    }
    fail(where, "unknown coefficient family \"" + family +
                    "\" (known: zero, constant, scalar_exp_decay, matrix_exp_decay, smooth_bump, "
                    "or a {\"table\": ...} object)");
}

// ---------------------------------------------------------------------------
// scenario

/// The equation under study, always available in both formulations: the
/// quadratic equation itself and its companion first-order system.
struct ScenarioConfig {
    bool is_system = false;  ///< true when the config specified the linear system
    CoefficientSpec riccati;
    SystemSpec system;
};

inline ScenarioConfig scenario_from_json(const Json& j, Json& resolved) {
    using cfgdetail::fail;
    const std::string where = "scenario";
    cfgdetail::requireObject(j, where);

    const std::string kind = cfgdetail::stringField(j, "kind", "riccati", where);
    if (kind != "riccati" && kind != "system")
        fail(where + ".kind", "expected \"riccati\" or \"system\"");
    const bool isSystem = kind == "system";

    ScenarioConfig sc;
    sc.is_system = isSystem;
    resolved = Json{{"kind", kind}};

    if (j.contains("builtin")) {
        if (isSystem)
            fail(where, "builtin scenarios describe the quadratic equation; use kind \"riccati\"");
        cfgdetail::requireKeys(j, where, {"kind", "builtin", "params"});
        const std::string name = cfgdetail::stringField(j, "builtin", "", where);
        ScenarioParams params;
        Json jp = Json::object();
        if (j.contains("params")) {
            jp = j.at("params");
            cfgdetail::requireObject(jp, where + ".params");
            for (const auto& item : jp.items()) {
                if (!item.value().is_number())
                    fail(where + ".params." + item.key(), "builtin parameters are numbers");
                params[item.key()] = item.value().get<double>();
            }
        }
        try {
            sc.riccati = builtin_scenario(name, params);
        } catch (const UnknownScenario& e) {
            fail(where + ".builtin", e.what());
        } catch (const std::invalid_argument& e) {
            fail(where + ".params", e.what());
        }
        sc.system = riccati_to_system(sc.riccati);
        resolved["builtin"] = name;
        resolved["params"] = jp;
        return sc;
    }

    // explicit coefficients
    const std::int64_t dim64 = cfgdetail::intField(j, "dim", 0, where);
    if (dim64 < 1 || dim64 > 64)
        fail(where + ".dim", "explicit scenarios need \"dim\" between 1 and 64");
    const int dim = static_cast<int>(dim64);
    const double t0 = cfgdetail::numberField(j, "t0", 0.0, where);
    const std::string label =
        cfgdetail::stringField(j, "label", isSystem ? "custom-system" : "custom", where);
    resolved["dim"] = dim;
    resolved["t0"] = t0;
    resolved["label"] = label;

    const auto coeff = [&](const char* key) {
        Json norm{{"family", "zero"}};
        CoefficientFunction f = CoefficientFunction::zero(dim);
        if (j.contains(key))
            f = coefficient_from_json(j.at(key), dim, where + "." + key, &norm);
        resolved[key] = norm;
        return f;
    };

    if (isSystem) {
        cfgdetail::requireKeys(j, where, {"kind", "dim", "t0", "label", "A", "B", "C", "D"});
        sc.system.dim = dim;
        sc.system.t0 = t0;
        sc.system.A = coeff("A");
        sc.system.B = coeff("B");
        sc.system.C = coeff("C");
        sc.system.D = coeff("D");
        sc.riccati = system_to_riccati(sc.system);
        sc.riccati.label = label;
    } else {
        cfgdetail::requireKeys(j, where, {"kind", "dim", "t0", "label", "P", "Q", "R", "S"});
        sc.riccati.dim = dim;
        sc.riccati.t0 = t0;
        sc.riccati.label = label;
        sc.riccati.P = coeff("P");
        sc.riccati.Q = coeff("Q");
        sc.riccati.R = coeff("R");
        sc.riccati.S = coeff("S");
        sc.system = riccati_to_system(sc.riccati);
    }
    return sc;
}

// ---------------------------------------------------------------------------
// full run configuration

struct RunConfig {
    ScenarioConfig scenario;
    double t1 = 0.0;
    double horizon = 0.0;
    double output_step = 0.0;  ///< CSV sampling step

    MatrixC initial;      ///< Z(t1)
    MatrixC initial_phi;  ///< system runs
    MatrixC initial_psi;

    IntegratorConfig integ;
    ClassifyConfig classify;
    SamplingConfig sampling;
    PrincipalConfig principal;

    bool has_family = false;
    MatrixC family_lambda;
    std::vector<double> family_times;  ///< empty: uniform grid over [t1, horizon]

    bool has_identities = false;
    MatrixC second_initial;
    double identities_time = 0.0;
    double identities_tol = 1e-6;

    bool has_diagnostics = false;
    MatrixC second_phi;
    MatrixC second_psi;
    int diagnostics_grid_points = 257;

    Json resolved;  ///< canonical config with defaults filled in
};

inline RunConfig run_config_from_json(const Json& j) {
    using cfgdetail::fail;
    cfgdetail::requireKeys(j, "top level",
                           {"scenario", "t1", "horizon", "output_step", "initial", "initial_phi",
                            "initial_psi", "integrator", "classify", "sampling", "principal",
                            "family", "identities", "diagnostics"});
    if (!j.contains("scenario"))
        fail("top level", "missing required \"scenario\" block");

    RunConfig cfg;
    Json resolvedScenario;
    cfg.scenario = scenario_from_json(j.at("scenario"), resolvedScenario);
    const int n = cfg.scenario.riccati.dim;
    const double t0 = cfg.scenario.riccati.t0;
    const double domainEnd = cfg.scenario.riccati.domainEnd();

    cfg.t1 = cfgdetail::numberField(j, "t1", t0, "top level");
    if (cfg.t1 < t0)
        fail("t1", "anchor time lies before the coefficient domain start " + std::to_string(t0));
    cfg.horizon = cfgdetail::numberField(j, "horizon", cfg.t1 + 20.0, "top level");
    if (!(cfg.horizon > cfg.t1))
        fail("horizon", "must exceed t1");
    if (cfg.horizon > domainEnd)
        fail("horizon", "exceeds the coefficient domain, which ends at " + std::to_string(domainEnd));
    cfg.output_step = cfgdetail::numberField(j, "output_step", (cfg.horizon - cfg.t1) / 400.0,
                                             "top level");
    if (!(cfg.output_step > 0.0))
        fail("output_step", "must be positive");
    if ((cfg.horizon - cfg.t1) / cfg.output_step > 5e6)
        fail("output_step", "produces more than five million output rows");

    const auto matrixField = [&](const char* key, const MatrixC& fallback) {
        if (!j.contains(key))
            return fallback;
        MatrixC m = matrix_from_json(j.at(key), key);
        if (m.dim() != n)
            fail(key, "dimension " + std::to_string(m.dim()) + " does not match the scenario (" +
                          std::to_string(n) + ")");
        return m;
    };
    cfg.initial = matrixField("initial", MatrixC::zeros(n));
    cfg.initial_phi = matrixField("initial_phi", MatrixC::identity(n));
    cfg.initial_psi = matrixField("initial_psi", cfg.initial);

    // integrator
    {
        const std::string w = "integrator";
        const Json blk = j.contains("integrator") ? j.at("integrator") : Json::object();
        cfgdetail::requireKeys(blk, w, {"rel_tol", "abs_tol", "max_step", "fixed_step",
                                        "blowup_threshold", "max_steps"});
        cfg.integ.rel_tol = cfgdetail::numberField(blk, "rel_tol", cfg.integ.rel_tol, w);
        cfg.integ.abs_tol = cfgdetail::numberField(blk, "abs_tol", cfg.integ.abs_tol, w);
        cfg.integ.max_step = cfgdetail::numberField(blk, "max_step", cfg.integ.max_step, w);
        cfg.integ.fixed_step = cfgdetail::numberField(blk, "fixed_step", cfg.integ.fixed_step, w);
        cfg.integ.blowup_threshold =
            cfgdetail::numberField(blk, "blowup_threshold", cfg.integ.blowup_threshold, w);
        const std::int64_t ms = cfgdetail::intField(blk, "max_steps",
                                                    static_cast<std::int64_t>(cfg.integ.max_steps), w);
        if (ms < 1)
            fail(w + ".max_steps", "must be positive");
        cfg.integ.max_steps = static_cast<std::uint64_t>(ms);
        if (!(cfg.integ.rel_tol > 0.0) || !(cfg.integ.abs_tol > 0.0))
            fail(w, "tolerances must be positive");
        if (!(cfg.integ.blowup_threshold > 1.0))
            fail(w + ".blowup_threshold", "must exceed 1");
    }

    // classify thresholds
    {
        const std::string w = "classify";
        const Json blk = j.contains("classify") ? j.at("classify") : Json::object();
        cfgdetail::requireKeys(blk, w,
                               {"mu_escape", "plateau_tol", "plateau_window_frac", "growth_ratio",
                                "alpha_tol", "beta_tol", "cluster_tol", "fundamental_escape",
                                "grid_points"});
        ClassifyConfig& c = cfg.classify;
        c.mu_escape = cfgdetail::numberField(blk, "mu_escape", c.mu_escape, w);
        c.plateau_tol = cfgdetail::numberField(blk, "plateau_tol", c.plateau_tol, w);
        c.plateau_window_frac =
            cfgdetail::numberField(blk, "plateau_window_frac", c.plateau_window_frac, w);
        c.growth_ratio = cfgdetail::numberField(blk, "growth_ratio", c.growth_ratio, w);
        c.alpha_tol = cfgdetail::numberField(blk, "alpha_tol", c.alpha_tol, w);
        c.beta_tol = cfgdetail::numberField(blk, "beta_tol", c.beta_tol, w);
        c.cluster_tol = cfgdetail::numberField(blk, "cluster_tol", c.cluster_tol, w);
        c.fundamental_escape =
            cfgdetail::numberField(blk, "fundamental_escape", c.fundamental_escape, w);
        const std::int64_t gp = cfgdetail::intField(blk, "grid_points", c.grid_points, w);
        if (gp < 8)
            fail(w + ".grid_points", "needs at least 8 points");
        c.grid_points = static_cast<int>(gp);
        c.integ = cfg.integ;  // verdict runs share the run's tolerances
    }

    // sampling
    {
        const std::string w = "sampling";
        const Json blk = j.contains("sampling") ? j.at("sampling") : Json::object();
        cfgdetail::requireKeys(blk, w, {"sample_count", "radius", "seed", "min_regular_quota",
                                        "orbit_tol", "threads"});
        SamplingConfig& s = cfg.sampling;
        const std::int64_t count = cfgdetail::intField(blk, "sample_count", s.sample_count, w);
        if (count < 1)
            fail(w + ".sample_count", "must be positive");
        s.sample_count = static_cast<int>(count);
        s.radius = cfgdetail::numberField(blk, "radius", s.radius, w);
        if (!(s.radius > 0.0))
            fail(w + ".radius", "must be positive");
        const std::int64_t seed = cfgdetail::intField(blk, "seed", 0, w);
        if (seed < 0)
            fail(w + ".seed", "must be non-negative");
        s.seed = static_cast<std::uint64_t>(seed);
        const std::int64_t quota = cfgdetail::intField(blk, "min_regular_quota", s.min_regular_quota, w);
        if (quota < 1)
            fail(w + ".min_regular_quota", "must be positive");
        s.min_regular_quota = static_cast<int>(quota);
        s.orbit_tol = cfgdetail::numberField(blk, "orbit_tol", s.orbit_tol, w);
        const std::int64_t threads = cfgdetail::intField(blk, "threads", s.threads, w);
        if (threads < 1)
            fail(w + ".threads", "must be positive");
        s.threads = static_cast<int>(threads);
        s.classify = cfg.classify;
    }

    // principal
    {
        const std::string w = "principal";
        const Json blk = j.contains("principal") ? j.at("principal") : Json::object();
        cfgdetail::requireKeys(blk, w, {"span_end", "sample_step", "residual_check_span", "verify",
                                        "classify_horizon"});
        PrincipalConfig& p = cfg.principal;
        p.span_end = cfgdetail::numberField(blk, "span_end", cfg.horizon, w);
        if (!(p.span_end > cfg.t1))
            fail(w + ".span_end", "must exceed t1");
        if (p.span_end > domainEnd)
            fail(w + ".span_end", "exceeds the coefficient domain");
        p.sample_step = cfgdetail::numberField(blk, "sample_step", p.sample_step, w);
        if (!(p.sample_step > 0.0))
            fail(w + ".sample_step", "must be positive");
        p.residual_check_span =
            cfgdetail::numberField(blk, "residual_check_span", p.residual_check_span, w);
        p.verify = cfgdetail::boolField(blk, "verify", p.verify, w);
        p.classify_horizon = cfgdetail::numberField(blk, "classify_horizon", p.classify_horizon, w);
        p.classify = cfg.classify;
    }

    // family
    if (j.contains("family")) {
        const std::string w = "family";
        const Json& blk = j.at("family");
        cfgdetail::requireKeys(blk, w, {"lambda", "times"});
        if (!blk.contains("lambda"))
            fail(w, "needs \"lambda\", the initial offset matrix");
        cfg.family_lambda = matrix_from_json(blk.at("lambda"), w + ".lambda");
        if (cfg.family_lambda.dim() != n)
            fail(w + ".lambda", "dimension does not match the scenario");
        if (blk.contains("times")) {
            const Json& jt = blk.at("times");
            if (!jt.is_array() || jt.empty())
                fail(w + ".times", "expected a non-empty array of numbers");
            double prev = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < jt.size(); ++i) {
                const double t =
                    cfgdetail::asNumber(jt.at(i), w + ".times[" + std::to_string(i) + "]");
                if (t < cfg.t1 || t > cfg.horizon)
                    fail(w + ".times[" + std::to_string(i) + "]",
                         "evaluation times must lie in [t1, horizon]");
                if (t <= prev)
                    fail(w + ".times", "must be strictly increasing");
                prev = t;
                cfg.family_times.push_back(t);
            }
        }
        cfg.has_family = true;
    }

    // identities
    if (j.contains("identities")) {
        const std::string w = "identities";
        const Json& blk = j.at("identities");
        cfgdetail::requireKeys(blk, w, {"second_initial", "time", "tol"});
        if (!blk.contains("second_initial"))
            fail(w, "needs \"second_initial\", the companion solution's value at t1");
        cfg.second_initial = matrix_from_json(blk.at("second_initial"), w + ".second_initial");
        if (cfg.second_initial.dim() != n)
            fail(w + ".second_initial", "dimension does not match the scenario");
        cfg.identities_time = cfgdetail::numberField(blk, "time", cfg.horizon, w);
        if (cfg.identities_time <= cfg.t1 || cfg.identities_time > cfg.horizon)
            fail(w + ".time", "must lie in (t1, horizon]");
        cfg.identities_tol = cfgdetail::numberField(blk, "tol", cfg.identities_tol, w);
        if (!(cfg.identities_tol > 0.0))
            fail(w + ".tol", "must be positive");
        cfg.has_identities = true;
    }

    // diagnostics
    if (j.contains("diagnostics")) {
        const std::string w = "diagnostics";
        const Json& blk = j.at("diagnostics");
        cfgdetail::requireKeys(blk, w, {"second_phi", "second_psi", "grid_points"});
        if (!blk.contains("second_phi") || !blk.contains("second_psi"))
            fail(w, "needs \"second_phi\" and \"second_psi\", the second solution pair at t1");
        cfg.second_phi = matrix_from_json(blk.at("second_phi"), w + ".second_phi");
        cfg.second_psi = matrix_from_json(blk.at("second_psi"), w + ".second_psi");
        if (cfg.second_phi.dim() != n || cfg.second_psi.dim() != n)
            fail(w, "pair dimensions do not match the scenario");
        const std::int64_t gp = cfgdetail::intField(blk, "grid_points", 257, w);
        if (gp < 10)
            fail(w + ".grid_points", "needs at least 10 points for a trend verdict");
        cfg.diagnostics_grid_points = static_cast<int>(gp);
        cfg.has_diagnostics = true;
    }

    // canonical resolved form, defaults included
    Json r;
    r["scenario"] = resolvedScenario;
    r["t1"] = cfg.t1;
    r["horizon"] = cfg.horizon;
    r["output_step"] = cfg.output_step;
    r["initial"] = matrix_to_json(cfg.initial);
    r["initial_phi"] = matrix_to_json(cfg.initial_phi);
    r["initial_psi"] = matrix_to_json(cfg.initial_psi);
    r["integrator"] = Json{{"rel_tol", cfg.integ.rel_tol},
                           {"abs_tol", cfg.integ.abs_tol},
                           {"max_step", cfg.integ.max_step},
                           {"fixed_step", cfg.integ.fixed_step},
                           {"blowup_threshold", cfg.integ.blowup_threshold},
                           {"max_steps", cfg.integ.max_steps}};
    r["classify"] = Json{{"mu_escape", cfg.classify.mu_escape},
                         {"plateau_tol", cfg.classify.plateau_tol},
                         {"plateau_window_frac", cfg.classify.plateau_window_frac},
                         {"growth_ratio", cfg.classify.growth_ratio},
                         {"alpha_tol", cfg.classify.alpha_tol},
                         {"beta_tol", cfg.classify.beta_tol},
                         {"cluster_tol", cfg.classify.cluster_tol},
                         {"fundamental_escape", cfg.classify.fundamental_escape},
                         {"grid_points", cfg.classify.grid_points}};
    r["sampling"] = Json{{"sample_count", cfg.sampling.sample_count},
                         {"radius", cfg.sampling.radius},
                         {"seed", cfg.sampling.seed},
                         {"min_regular_quota", cfg.sampling.min_regular_quota},
                         {"orbit_tol", cfg.sampling.orbit_tol},
                         {"threads", cfg.sampling.threads}};
    r["principal"] = Json{{"span_end", cfg.principal.span_end},
                          {"sample_step", cfg.principal.sample_step},
                          {"residual_check_span", cfg.principal.residual_check_span},
                          {"verify", cfg.principal.verify},
                          {"classify_horizon", cfg.principal.classify_horizon}};
    if (cfg.has_family) {
        Json fb{{"lambda", matrix_to_json(cfg.family_lambda)}};
        if (!cfg.family_times.empty())
            fb["times"] = cfg.family_times;
        r["family"] = std::move(fb);
    }
    if (cfg.has_identities)
        r["identities"] = Json{{"second_initial", matrix_to_json(cfg.second_initial)},
                               {"time", cfg.identities_time},
                               {"tol", cfg.identities_tol}};
    if (cfg.has_diagnostics)
        r["diagnostics"] = Json{{"second_phi", matrix_to_json(cfg.second_phi)},
                                {"second_psi", matrix_to_json(cfg.second_psi)},
                                {"grid_points", cfg.diagnostics_grid_points}};
    cfg.resolved = std::move(r);
    return cfg;
}

}  // namespace riccati
