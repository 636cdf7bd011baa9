// Tests for the batch front end: configuration validation, report and CSV
// artifacts, exit-code policy, and byte-identical reruns.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "riccati/runner.hpp"

using namespace riccati;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("riccati_runner_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string writeConfig(const TempDir& dir, const std::string& name, const Json& doc) {
    const fs::path p = dir.path / name;
    std::ofstream f(p, std::ios::binary);
    f << doc.dump(2) << "\n";
    return p.string();
}

struct RunCapture {
    int code = 0;
    std::string out, err;
};

RunCapture runCli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    RunCapture rc;
    rc.code = run(args, out, err);
    rc.out = out.str();
    rc.err = err.str();
    return rc;
}

Json readReport(const TempDir& dir, const std::string& sub) {
    std::ifstream f(dir.path / sub / "report.json", std::ios::binary);
    REQUIRE(f.good());
    return Json::parse(f);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t lineCount(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n')
            ++n;
    return n;
}

Json scalarMatrix(double re, double im = 0.0) {
    return Json::array({Json::array({Json::array({re, im})})});
}

Json decayConfig() {
    Json cfg;
    cfg["scenario"] = Json{{"builtin", "decay_scalar"},
                           {"params", Json{{"dim", 1}, {"scale", 1.0}, {"rate", 1.0}}}};
    cfg["horizon"] = 20.0;
    return cfg;
}

}  // namespace

TEST_CASE("configuration validation rejects malformed documents") {
    TempDir dir("validation");

    SECTION("unknown top-level key") {
        Json cfg = decayConfig();
        cfg["horizn"] = 15.0;
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "a.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("unknown key \"horizn\"") != std::string::npos);
    }
    SECTION("missing config file") {
        const auto rc = runCli({"solve", "--config", (dir.path / "absent.json").string()});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("cannot open config file") != std::string::npos);
    }
    SECTION("config that is not JSON") {
        const fs::path p = dir.path / "garbage.json";
        std::ofstream(p) << "not json {";
        const auto rc = runCli({"solve", "--config", p.string()});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("not valid JSON") != std::string::npos);
    }
    SECTION("matrix entries must be [re, im] pairs") {
        Json cfg = decayConfig();
        cfg["initial"] = Json::array({Json::array({1.0})});
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "b.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("[re, im]") != std::string::npos);
    }
    SECTION("initial dimension must match the scenario") {
        Json cfg = decayConfig();
        cfg["initial"] = Json::parse("[[[0,0],[0,0]],[[0,0],[0,0]]]");
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "c.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("does not match the scenario") != std::string::npos);
    }
    SECTION("builtin scenarios cannot use the system kind") {
        Json cfg = decayConfig();
        cfg["scenario"]["kind"] = "system";
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "d.json", cfg)});
        CHECK(rc.code == 2);
    }
    SECTION("unknown builtin name") {
        Json cfg = decayConfig();
        cfg["scenario"]["builtin"] = "quad";
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "e.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("unknown") != std::string::npos);
    }
    SECTION("unknown coefficient family") {
        Json cfg;
        cfg["scenario"] = Json{{"kind", "riccati"},
                               {"dim", 1},
                               {"P", Json{{"family", "gaussian"}}}};
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "f.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("unknown coefficient family") != std::string::npos);
    }
    SECTION("horizon beyond a table coefficient's domain") {
        Json cfg;
        cfg["scenario"] =
            Json{{"kind", "riccati"},
                 {"dim", 1},
                 {"P", Json{{"table", Json{{"times", Json::array({0.0, 2.0})},
                                           {"values", Json::array({scalarMatrix(1), scalarMatrix(0)})}}}}}};
        cfg["horizon"] = 5.0;
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "g.json", cfg)});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("domain") != std::string::npos);
    }
    SECTION("family command requires the family block") {
        const auto rc = runCli(
            {"family", "--config", writeConfig(dir, "h.json", decayConfig())});
        CHECK(rc.code == 2);
        CHECK(rc.err.find("family") != std::string::npos);
    }
    SECTION("identities command requires the identities block") {
        const auto rc = runCli(
            {"identities", "--config", writeConfig(dir, "i.json", decayConfig())});
        CHECK(rc.code == 2);
    }
    SECTION("system-diagnostics requires the diagnostics block") {
        const auto rc = runCli(
            {"system-diagnostics", "--config", writeConfig(dir, "j.json", decayConfig())});
        CHECK(rc.code == 2);
    }
    SECTION("unknown subcommand and missing required option") {
        CHECK(runCli({"frobnicate"}).code == 2);
        CHECK(runCli({"solve"}).code == 2);
        CHECK(runCli({"--help"}).code == 0);
    }
}

TEST_CASE("solve pipeline writes the trajectory and a faithful report") {
    TempDir dir("solve");

    SECTION("regular run covers the horizon") {
        Json cfg = decayConfig();
        cfg["output_step"] = 0.1;
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "cfg.json", cfg), "--out",
                                (dir.path / "run").string()});
        REQUIRE(rc.code == 0);
        CHECK(rc.out.find("Regular") != std::string::npos);
        const Json rpt = readReport(dir, "run");
        CHECK(rpt.at("command") == "solve");
        CHECK(rpt.at("verdict") == "Regular");
        CHECK(rpt.at("evidence").at("covered_end").get<double>() == Catch::Approx(20.0));
        // z(20) for the zero solution of the decay equation stays zero
        CHECK(std::abs(rpt.at("evidence").at("z_end").at(0).at(0).at(0).get<double>()) < 1e-12);
        CHECK(rpt.at("config").at("horizon").get<double>() == Catch::Approx(20.0));
        const std::string csv = slurp(dir.path / "run" / "trajectory.csv");
        CHECK(csv.rfind("t,re_0_0,im_0_0\n", 0) == 0);
        CHECK(lineCount(csv) == 202);  // header + 201 samples at step 0.1
    }
    SECTION("blow-up is an answer, not an error") {
        Json cfg = decayConfig();
        cfg["horizon"] = 5.0;
        cfg["initial"] = scalarMatrix(-1.5);  // pole of the decay equation at ln 3
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "cfg2.json", cfg), "--out",
                                (dir.path / "run2").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "run2");
        CHECK(rpt.at("verdict") == "BlowUp");
        CHECK(rpt.at("evidence").at("blowup").at("t_escape").get<double>() ==
              Catch::Approx(std::log(3.0)).margin(1e-2));
        CHECK(rpt.at("evidence").at("covered_end").get<double>() < 5.0);
    }
    SECTION("command-line overrides reach the resolved configuration") {
        Json cfg = decayConfig();
        const auto rc = runCli({"solve", "--config", writeConfig(dir, "cfg3.json", cfg), "--out",
                                (dir.path / "run3").string(), "--horizon", "6", "--seed", "42",
                                "--rel-tol", "1e-11"});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "run3");
        CHECK(rpt.at("config").at("horizon").get<double>() == Catch::Approx(6.0));
        CHECK(rpt.at("config").at("sampling").at("seed").get<std::uint64_t>() == 42);
        CHECK(rpt.at("config").at("integrator").at("rel_tol").get<double>() ==
              Catch::Approx(1e-11));
        CHECK(rpt.at("evidence").at("covered_end").get<double>() == Catch::Approx(6.0));
    }
}

TEST_CASE("family and identities pipelines") {
    TempDir dir("famident");

    SECTION("family sweep at explicit times") {
        Json cfg = decayConfig();
        cfg["family"] = Json{{"lambda", scalarMatrix(0.25)},
                             {"times", Json::array({0.0, 1.0, 2.5})}};
        const auto rc = runCli({"family", "--config", writeConfig(dir, "cfg.json", cfg), "--out",
                                (dir.path / "fam").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "fam");
        CHECK(rpt.at("verdict") == "Regular");
        CHECK(rpt.at("evidence").at("times_evaluated") == 3);
        // the member starts at lambda when the base starts at zero
        CHECK(rpt.at("evidence").at("max_member_norm").get<double>() == Catch::Approx(0.25));
        CHECK(lineCount(slurp(dir.path / "fam" / "family.csv")) == 4);
    }
    SECTION("family member with a pole reports its first singular time") {
        Json cfg = decayConfig();
        cfg["horizon"] = 6.0;
        // base z = 0, lambda = -2: 1 + lambda*mu crosses zero at mu = 1/2, t = ln 2.
        // Sampling exactly at the pole must stop the sweep there; times between
        // grid points and the pole merely produce large finite values.
        cfg["family"] = Json{{"lambda", scalarMatrix(-2.0)},
                             {"times", Json::array({0.5, std::log(2.0), 1.0})}};
        const auto rc = runCli({"family", "--config", writeConfig(dir, "cfg2.json", cfg), "--out",
                                (dir.path / "fam2").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "fam2");
        CHECK(rpt.at("verdict") == "MemberBlowUp");
        CHECK(rpt.at("evidence").at("first_singular_time").get<double>() ==
              Catch::Approx(std::log(2.0)).margin(1e-12));
        CHECK(rpt.at("evidence").at("times_evaluated") == 1);
        CHECK(lineCount(slurp(dir.path / "fam2" / "family.csv")) == 2);
    }
    SECTION("identities hold for a regular pair and respect the tolerance") {
        Json cfg = decayConfig();
        cfg["identities"] = Json{{"second_initial", scalarMatrix(0.5)}, {"time", 6.0}};
        const auto rc = runCli({"identities", "--config", writeConfig(dir, "cfg3.json", cfg),
                                "--out", (dir.path / "id").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "id");
        CHECK(rpt.at("verdict") == "Holds");
        CHECK(rpt.at("evidence").at("det_identity_residual").get<double>() < 1e-8);
        CHECK(rpt.at("evidence").at("reciprocity_residual").get<double>() < 1e-8);

        // an absurdly tight tolerance flips the verdict but still answers
        cfg["identities"]["tol"] = 1e-30;
        const auto rc2 = runCli({"identities", "--config", writeConfig(dir, "cfg4.json", cfg),
                                 "--out", (dir.path / "id2").string()});
        CHECK(rc2.code == 0);
        CHECK(readReport(dir, "id2").at("verdict") == "Violated");
    }
}

TEST_CASE("classification and principal pipelines") {
    TempDir dir("classify");

    SECTION("classify-solution labels the zero solution of the decay equation") {
        Json cfg = decayConfig();
        const auto rc = runCli({"classify-solution", "--config", writeConfig(dir, "cfg.json", cfg),
                                "--out", (dir.path / "cs").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "cs");
        CHECK(rpt.at("verdict") == "Normal");
        CHECK(rpt.at("evidence").at("mu").at("kind") == "Bounded");
    }
    SECTION("principal run recovers the closed-form distinguished solution") {
        Json cfg = decayConfig();
        const auto rc = runCli({"principal", "--config", writeConfig(dir, "cfg2.json", cfg),
                                "--out", (dir.path / "pr").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "pr");
        CHECK(rpt.at("verdict") == "Extremal");
        CHECK(rpt.at("evidence").at("verified_extremal") == true);
        // the distinguished solution of the unit decay equation starts at -1
        CHECK(rpt.at("evidence").at("z_star_t1").at(0).at(0).at(0).get<double>() ==
              Catch::Approx(-1.0).margin(1e-6));
        CHECK(rpt.at("evidence").at("max_residual").get<double>() < 1e-6);
        CHECK(fs::exists(dir.path / "pr" / "principal.csv"));
    }
    SECTION("numerical preconditions exit with code three and an honest report") {
        Json cfg;
        cfg["scenario"] = Json{{"builtin", "pure_quadratic_constant"}, {"params", Json{{"dim", 1}}}};
        cfg["horizon"] = 40.0;
        // the zero solution of the pure quadratic equation is extremal: its
        // tail integral diverges, so the construction must refuse
        const auto rc = runCli({"principal", "--config", writeConfig(dir, "cfg3.json", cfg),
                                "--out", (dir.path / "bn").string()});
        CHECK(rc.code == 3);
        const Json rpt = readReport(dir, "bn");
        CHECK((rpt.at("verdict") == "NuDivergent" || rpt.at("verdict") == "BaseNotNormal"));
        CHECK(rpt.at("evidence").contains("message"));

        Json cfg2 = decayConfig();
        cfg2["horizon"] = 5.0;
        cfg2["initial"] = scalarMatrix(-1.5);  // escapes at ln 3, no regular base
        cfg2["family"] = Json{{"lambda", scalarMatrix(0.1)}};
        const auto rc2 = runCli({"family", "--config", writeConfig(dir, "cfg4.json", cfg2),
                                 "--out", (dir.path / "be").string()});
        CHECK(rc2.code == 3);
        CHECK(readReport(dir, "be").at("verdict") == "BaseEscaped");
    }
}

TEST_CASE("classify-equation reruns are byte-identical") {
    TempDir dir("rerun");
    Json cfg = decayConfig();
    cfg["horizon"] = 12.0;
    cfg["sampling"] = Json{{"sample_count", 12}, {"seed", 11}, {"threads", 2}};
    const std::string path = writeConfig(dir, "cfg.json", cfg);

    const auto rc1 = runCli({"classify-equation", "--config", path, "--out",
                             (dir.path / "r1").string()});
    const auto rc2 = runCli({"classify-equation", "--config", path, "--out",
                             (dir.path / "r2").string()});
    REQUIRE(rc1.code == 0);
    REQUIRE(rc2.code == 0);
    const std::string a = slurp(dir.path / "r1" / "report.json");
    const std::string b = slurp(dir.path / "r2" / "report.json");
    CHECK(a == b);

    // capping workers through the environment must not change the result
    setenv("RICCATI_KIT_THREADS", "1", 1);
    const auto rc3 = runCli({"classify-equation", "--config", path, "--out",
                             (dir.path / "r3").string()});
    unsetenv("RICCATI_KIT_THREADS");
    REQUIRE(rc3.code == 0);
    CHECK(slurp(dir.path / "r3" / "report.json") == a);

    const Json rpt = Json::parse(a);
    CHECK(rpt.at("verdict") == "SubExtremal");
    CHECK(rpt.at("evidence").at("extremal_orbits") == 1);
    CHECK(rpt.at("evidence").at("samples").size() >= 12);

    // a different seed draws different samples
    const auto rc4 = runCli({"classify-equation", "--config", path, "--seed", "12", "--out",
                             (dir.path / "r4").string()});
    REQUIRE(rc4.code == 0);
    CHECK(slurp(dir.path / "r4" / "report.json") != a);
}

TEST_CASE("system-diagnostics pipeline compares fundamental pairs") {
    TempDir dir("sysdiag");
    // growth system: phi' = psi, psi' = 0
    Json cfg;
    cfg["scenario"] = Json{{"kind", "system"}, {"dim", 1}, {"B", scalarMatrix(1.0)}};
    cfg["horizon"] = 1000.0;
    cfg["initial_phi"] = scalarMatrix(1.0);
    cfg["initial_psi"] = scalarMatrix(1.0);
    cfg["diagnostics"] = Json{{"second_phi", scalarMatrix(1.0)},
                              {"second_psi", scalarMatrix(0.0)}};

    SECTION("constant pair is flagged as the principal candidate") {
        const auto rc = runCli({"system-diagnostics", "--config", writeConfig(dir, "cfg.json", cfg),
                                "--out", (dir.path / "sd").string()});
        REQUIRE(rc.code == 0);
        const Json rpt = readReport(dir, "sd");
        CHECK(rpt.at("verdict") == "PrincipalVanishing");
        CHECK(rpt.at("evidence").at("principal_index") == 2);
        CHECK(rpt.at("evidence").at("independent_at_start") == true);
        const std::string csv = slurp(dir.path / "sd" / "ratios.csv");
        CHECK(csv.rfind("t,ratio12,ratio21,running_sup,running_inf\n", 0) == 0);
        CHECK(lineCount(csv) == 258);  // header + default 257 grid points
    }
    SECTION("a pair whose determinant vanishes is rejected with code three") {
        cfg["horizon"] = 3.0;
        cfg["diagnostics"] = Json{{"second_phi", scalarMatrix(1.0)},
                                  {"second_psi", scalarMatrix(-1.0)}};  // phi = 1 - t
        const auto rc = runCli({"system-diagnostics", "--config",
                                writeConfig(dir, "cfg2.json", cfg), "--out",
                                (dir.path / "sd2").string()});
        CHECK(rc.code == 3);
        CHECK(readReport(dir, "sd2").at("verdict") == "DetVanished");
    }
}
