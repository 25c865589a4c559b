#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "gqme/bath.hpp"
#include "gqme/discrete_gqme.hpp"
#include "gqme/errors.hpp"
#include "gqme/io.hpp"
#include "gqme_cli/commands.hpp"
#include "gqme_cli/config.hpp"
#include "test_support.hpp"

using namespace gqme;
using namespace gqme::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("gqme_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "gqme");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Values with awkward decimal expansions, subnormals and large exponents.
double awkward(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> e(-300, 300);
    return std::ldexp(u(rng), e(rng) / 4) / 3.0;
}

Superoperator awkward_superop(std::mt19937_64& rng)
{
    Superoperator a;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = cplx(awkward(rng), awkward(rng));
    return a;
}

bool bit_identical(const Superoperator& a, const Superoperator& b)
{
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (a(i, j).real() != b(i, j).real() || a(i, j).imag() != b(i, j).imag()) return false;
    return true;
}

// Oracle for the closed engine: Taylor series of exp(-i t [H, .]).
Superoperator closed_oracle(double eps, double omega, double t)
{
    const Superoperator l = brute_force_commutator(two_level_hamiltonian(eps, omega));
    return taylor_expm(cplx(0.0, -1.0) * l, t, 40);
}

} // namespace

TEST_CASE("format_double round-trips every double exactly")
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 2000; ++i) {
        const double x = awkward(rng);
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(std::strtod(format_double(0.1).c_str(), nullptr) == 0.1);
    CHECK(std::strtod(format_double(-0.0).c_str(), nullptr) == 0.0);
}

TEST_CASE("trajectory, kernel, state and bath files round-trip bit-identically")
{
    TempDir dir;
    std::mt19937_64 rng(5);

    MapTrajectory traj{0.0125, {}};
    for (int n = 0; n < 30; ++n) traj.maps.push_back(awkward_superop(rng));
    FileMetadata meta;
    meta.scheme = "heom";
    meta.dt = traj.dt;
    meta.system = {0.25, -1.0};
    meta.provenance = "unit test";
    meta.seed = 1234567890123ULL;
    meta.notes["k"] = "v";
    write_trajectory(dir / "traj.csv", traj, meta);
    FileMetadata back_meta;
    const MapTrajectory back = read_trajectory(dir / "traj.csv", &back_meta);
    REQUIRE(back.size() == traj.size());
    CHECK(back.dt == traj.dt);
    for (std::size_t n = 0; n < traj.size(); ++n) CHECK(bit_identical(back.maps[n], traj.maps[n]));
    CHECK(back_meta.kind == "TRAJECTORY");
    CHECK(back_meta.scheme == "heom");
    CHECK(back_meta.system.epsilon == 0.25);
    CHECK(back_meta.system.omega == -1.0);
    CHECK(back_meta.seed == meta.seed);
    CHECK(back_meta.notes.at("k") == "v");
    CHECK(back_meta.tool_version == std::string(version()));

    for (KernelKind kind : {KernelKind::Discrete, KernelKind::Continuous, KernelKind::ContinuousHalf}) {
        KernelSeries ks{0.05, kind, {}};
        for (int n = 0; n < 12; ++n) ks.kernels.push_back(awkward_superop(rng));
        write_kernels(dir / "k.csv", ks, {});
        const KernelSeries kb = read_kernels(dir / "k.csv");
        CHECK(kb.kind == kind);
        CHECK(kb.dt == ks.dt);
        REQUIRE(kb.size() == ks.size());
        for (std::size_t n = 0; n < ks.size(); ++n) CHECK(bit_identical(kb.kernels[n], ks.kernels[n]));
    }

    StateSeries states;
    for (int n = 0; n < 9; ++n) {
        Operator r;
        r << cplx(awkward(rng), awkward(rng)), cplx(awkward(rng), awkward(rng)), cplx(awkward(rng), awkward(rng)),
            cplx(awkward(rng), awkward(rng));
        states.push_back(r);
    }
    FileMetadata sm;
    sm.dt = 0.1;
    write_states(dir / "s.csv", states, sm);
    const StateSeries sb = read_states(dir / "s.csv");
    REQUIRE(sb.size() == states.size());
    for (std::size_t n = 0; n < states.size(); ++n) CHECK((sb[n] - states[n]).cwiseAbs().maxCoeff() == 0.0);

    ExpFit fit;
    fit.terms = {{cplx(awkward(rng), awkward(rng)), cplx(3.0, awkward(rng))}, {cplx(0.1, 0.0), cplx(1.0 / 3.0, 0.0)}};
    write_bath_coefficients(dir / "bath.csv", fit);
    const ExpFit fb = read_bath_coefficients(dir / "bath.csv");
    REQUIRE(fb.terms.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(fb.terms[k].alpha == fit.terms[k].alpha);
        CHECK(fb.terms[k].nu == fit.terms[k].nu);
    }
}

TEST_CASE("kernel files without a sidecar are rejected")
{
    TempDir dir;
    KernelSeries ks{0.1, KernelKind::Continuous, {Superoperator::Zero()}};
    write_kernels(dir / "k.csv", ks, {});
    fs::remove(sidecar_path(dir / "k.csv"));
    CHECK_THROWS_AS(read_kernels(dir / "k.csv"), ValidationError);
}

TEST_CASE("rho0 specifications")
{
    CHECK((parse_rho0("pop0").matrix() - (Operator() << 1, 0, 0, 0).finished()).norm() == 0.0);
    CHECK((parse_rho0("pop1").matrix() - (Operator() << 0, 0, 0, 1).finished()).norm() == 0.0);
    CHECK((parse_rho0("plus").matrix() - (Operator() << 0.5, 0.5, 0.5, 0.5).finished()).norm() < 1e-15);
    const Operator r = parse_rho0("0.7 (0.1,0.2) (0.1,-0.2) 0.3").matrix();
    CHECK(r(0, 0) == cplx(0.7, 0.0));
    CHECK(r(0, 1) == cplx(0.1, 0.2));
    CHECK(r(1, 0) == cplx(0.1, -0.2));
    CHECK(r(1, 1) == cplx(0.3, 0.0));
    CHECK(parse_rho0("0.5;0.5;0.5;0.5").matrix()(1, 0) == cplx(0.5, 0.0));
    CHECK_THROWS_AS(parse_rho0("pop2"), ValidationError);
    CHECK_THROWS_AS(parse_rho0("1 2 3"), ValidationError);
}

TEST_CASE("config parsing rejects unknown fields with their path")
{
    using nlohmann::json;
    const auto cfg = cli::parse_simulate_config(json::parse(R"({"engine":"closed","dt":0.02,"steps":5,"system":{"omega":-1}})"));
    CHECK(cfg.engine == "closed");
    CHECK(cfg.dt == 0.02);
    CHECK(cfg.steps == 5);
    CHECK(cfg.system.omega == -1.0);

    try {
        cli::parse_simulate_config(json::parse(R"({"heom":{"depht":4}})"));
        FAIL("accepted an unknown field");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("heom.depht") != std::string::npos);
    }
    CHECK_THROWS_AS(cli::parse_simulate_config(json::parse(R"({"colour":1})")), ValidationError);
    CHECK_THROWS_AS(cli::parse_simulate_config(json::parse(R"({"dt":"fast"})")), ValidationError);
    CHECK_THROWS_AS(cli::parse_sweep_config(json::parse(R"({"dts":[0.1,0.05],"extra":true})")), ValidationError);

    TempDir dir;
    write_text(dir / "bad.json", "{\n  \"dt\": 0.1,\n  \"steps\": \n}\n");
    try {
        cli::load_json(dir / "bad.json");
        FAIL("parsed malformed JSON");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("simulate closed writes exp(-i L t) maps")
{
    TempDir dir;
    const auto r = run_cli({"simulate", "--engine", "closed", "--omega", "-1", "--epsilon", "0.3", "--dt", "0.01",
                            "--steps", "100", "-o", (dir / "c.csv").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    FileMetadata meta;
    const MapTrajectory traj = read_trajectory(dir / "c.csv", &meta);
    REQUIRE(traj.size() == 101);
    double worst = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n)
        worst = std::max(worst, max_abs(traj.maps[n] - closed_oracle(0.3, -1.0, 0.01 * static_cast<double>(n))));
    CHECK(worst < 1e-12);
    CHECK(meta.scheme == "closed");
    CHECK(meta.system.epsilon == 0.3);
    CHECK(!meta.provenance.empty());
}

TEST_CASE("flags override config fields and validation maps to exit code 2")
{
    TempDir dir;
    write_text(dir / "pd.json", R"({"engine":"pure-dephasing","dt":0.05,"steps":4,"system":{"epsilon":0,"omega":-1},
                                   "output":")" + (dir / "pd.csv").string() + "\"}");
    const auto rejected = run_cli({"simulate", "-c", (dir / "pd.json").string()});
    CHECK(rejected.code == 2);
    CHECK(rejected.err.find("omega") != std::string::npos);
    CHECK(!fs::exists(dir / "pd.csv"));

    const auto accepted = run_cli({"simulate", "-c", (dir / "pd.json").string(), "--omega", "0"});
    CHECK_MESSAGE(accepted.code == 0, accepted.err);
    CHECK(read_trajectory(dir / "pd.csv").size() == 5);

    write_text(dir / "unknown.json", R"({"engine":"closed","bogus":1})");
    const auto unknown = run_cli({"simulate", "-c", (dir / "unknown.json").string(), "-o", (dir / "x.csv").string()});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("bogus") != std::string::npos);

    CHECK(run_cli({"simulate", "--engine", "magic", "-o", (dir / "x.csv").string()}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("compare: identical files give zeros, coarse vs fine aligns by stride")
{
    TempDir dir;
    const auto fine = dir / "fine.csv", coarse = dir / "coarse.csv", odd = dir / "odd.csv";
    REQUIRE(run_cli({"simulate", "--engine", "closed", "--omega", "-1", "--dt", "0.0005", "--steps", "200", "-o",
                     fine.string()})
                .code == 0);
    REQUIRE(run_cli({"simulate", "--engine", "closed", "--omega", "-1", "--dt", "0.005", "--steps", "20", "-o",
                     coarse.string()})
                .code == 0);
    REQUIRE(run_cli({"simulate", "--engine", "closed", "--omega", "-1", "--dt", "0.0007", "--steps", "20", "-o",
                     odd.string()})
                .code == 0);

    std::ostringstream log;
    const auto same = cli::cmd_compare({fine, fine, dir / "same.csv", "frobenius"}, log);
    CHECK(same.t.size() == 201);
    CHECK(same.max == 0.0);
    CHECK(same.time_average == 0.0);

    const auto strided = cli::cmd_compare({coarse, fine, {}, "max"}, log);
    REQUIRE(strided.t.size() == 21);
    for (std::size_t i = 0; i < strided.t.size(); ++i) CHECK(strided.t[i] == doctest::Approx(0.005 * static_cast<double>(i)));
    CHECK(strided.max < 1e-12);
    // Argument order does not matter.
    CHECK(cli::cmd_compare({fine, coarse, {}, "max"}, log).t.size() == 21);

    CHECK_THROWS_AS(cli::cmd_compare({odd, fine, {}, "frobenius"}, log), ValidationError);
    CHECK_THROWS_AS(cli::cmd_compare({fine, fine, {}, "l1"}, log), ValidationError);

    std::ifstream table(dir / "same.csv");
    std::string header;
    std::getline(table, header);
    CHECK(header == "t,error,log10_error");

    const auto via_cli = run_cli({"compare", coarse.string(), fine.string()});
    CHECK(via_cli.code == 0);
    CHECK(via_cli.out.find("time_average,") != std::string::npos);
}

TEST_CASE("extract then propagate reproduces the trajectory")
{
    TempDir dir;
    const auto traj_file = dir / "pd.csv";
    // Weak pure dephasing: a genuinely non-Markovian map series with a closed form.
    REQUIRE(run_cli({"simulate", "--engine", "pure-dephasing", "--omega", "0", "--epsilon", "0.5", "--dt", "0.05",
                     "--steps", "40", "-o", traj_file.string()})
                .code == 0);
    const MapTrajectory traj = read_trajectory(traj_file);

    const auto r1 = run_cli({"extract", traj_file.string(), "--scheme", "ttm-discrete", "-o", (dir / "kd.csv").string()});
    REQUIRE_MESSAGE(r1.code == 0, r1.err);
    CHECK(r1.err.find("kernels") != std::string::npos);
    const auto r2 = run_cli({"propagate", (dir / "kd.csv").string(), "--scheme", "ttm-discrete", "--steps", "40",
                             "--maps", (dir / "back.csv").string(), "-o", (dir / "rho.csv").string(), "--rho0", "plus"});
    REQUIRE_MESSAGE(r2.code == 0, r2.err);
    const MapTrajectory back = read_trajectory(dir / "back.csv");
    REQUIRE(back.size() == traj.size());
    double worst = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n) worst = std::max(worst, max_abs(back.maps[n] - traj.maps[n]));
    CHECK(worst < 1e-10);

    // States are U_N rho0 with rho0 = |+><+|.
    const StateSeries rho = read_states(dir / "rho.csv");
    REQUIRE(rho.size() == traj.size());
    const Operator plus = (Operator() << 0.5, 0.5, 0.5, 0.5).finished();
    CHECK((rho[20] - devectorize(traj.maps[20] * vectorize(plus))).norm() < 1e-10);

    // States against the source trajectory: projected with the rho0 recorded in the metadata.
    std::ostringstream log;
    const auto vs_traj = cli::cmd_compare({dir / "rho.csv", traj_file, {}, "max"}, log);
    CHECK(vs_traj.t.size() == traj.size());
    CHECK(vs_traj.max < 1e-10);
    CHECK(log.str().find("rho0 = plus") != std::string::npos);
    CHECK(cli::cmd_compare({dir / "rho.csv", traj_file, {}, "max", "pop0"}, log).max > 1e-3);

    // ttm2 without a fine reference, and scheme/kind mismatches, are validation errors.
    CHECK(run_cli({"extract", traj_file.string(), "--scheme", "ttm2", "-o", (dir / "k2.csv").string()}).code == 2);
    CHECK(run_cli({"propagate", (dir / "kd.csv").string(), "--scheme", "ttm1", "--steps", "5", "-o",
                   (dir / "x.csv").string()})
              .code == 2);
    REQUIRE(run_cli({"extract", traj_file.string(), "--scheme", "mpdi", "-o", (dir / "kh.csv").string()}).code == 0);
    CHECK(read_kernels(dir / "kh.csv").kind == KernelKind::ContinuousHalf);
    CHECK(run_cli({"propagate", (dir / "kh.csv").string(), "--scheme", "fdio", "--steps", "5", "-o",
                   (dir / "x.csv").string()})
              .code == 2);
    CHECK(run_cli({"propagate", (dir / "kh.csv").string(), "--scheme", "mpdi", "--steps", "40", "-o",
                   (dir / "x.csv").string()})
              .code == 0);
}

TEST_CASE("zero continuous kernel propagates close to closed dynamics for every scheme")
{
    TempDir dir;
    auto zero_kernel = [&](double dt) {
        KernelSeries ks{dt, KernelKind::Continuous, std::vector<Superoperator>(200, Superoperator::Zero())};
        FileMetadata meta;
        meta.system = {0.0, -1.0};
        write_kernels(dir / "zero.csv", ks, meta);
    };
    const Operator rho0 = (Operator() << 1, 0, 0, 0).finished();
    for (const std::string scheme : {"fdio", "ttm1", "ttm2", "mpdi"}) {
        std::vector<double> errs;
        for (double dt : {0.02, 0.01}) {
            zero_kernel(dt / 4.0); // fine grid, also serves as the ttm2 auxiliary source
            const auto r = run_cli({"propagate", (dir / "zero.csv").string(), "--scheme", scheme, "--dt",
                                    format_double(dt), "--t-end", "0.4", "-o", (dir / "z.csv").string()});
            REQUIRE_MESSAGE(r.code == 0, (scheme + ": " + r.err));
            const StateSeries rho = read_states(dir / "z.csv");
            double worst = 0.0;
            for (std::size_t n = 0; n < rho.size(); ++n) {
                const Operator exact = devectorize(closed_oracle(0.0, -1.0, dt * static_cast<double>(n)) * vectorize(rho0));
                worst = std::max(worst, (rho[n] - exact).norm());
            }
            errs.push_back(worst);
        }
        INFO(scheme, " errors ", errs[0], " ", errs[1]);
        CHECK(errs[0] < 0.05);
        if (scheme == "mpdi")
            CHECK(errs[1] < 1e-12); // G_1 carries the closed part exactly
        else
            CHECK(errs[1] < errs[0]);
    }
}

TEST_CASE("sweep needs two time steps; manufactured sweep is second order")
{
    TempDir dir;
    write_text(dir / "one.json", R"({"mode":"manufactured","dts":[0.01]})");
    const auto one = run_cli({"sweep", "-c", (dir / "one.json").string()});
    CHECK(one.code == 2);
    CHECK(one.err.find("at least 2") != std::string::npos);

    const auto report = dir / "report.json";
    const auto r = run_cli({"sweep", "--mode", "manufactured", "--dts", "0.02,0.01,0.005", "--report", report.string(),
                            "--output-dir", (dir / "tables").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::ifstream in(report);
    const auto doc = nlohmann::json::parse(in);
    const double order = doc["fits"]["volterra"]["order"].get<double>();
    INFO("manufactured order ", order);
    CHECK(order >= 1.8);
    CHECK(order <= 2.2);
    CHECK(doc["fits"]["volterra"]["r_squared"].get<double>() > 0.99);
    CHECK(doc["runs"].size() == 3);
    std::size_t tables = 0;
    for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir / "tables")) ++tables;
    CHECK(tables == 3);
}

#ifdef GQME_CLI_PATH
TEST_CASE("the installed binary returns the documented exit codes")
{
    TempDir dir;
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    const std::string bin = GQME_CLI_PATH;
    CHECK(status(bin + " --version") == 0);
    CHECK(status(bin + " simulate --engine closed --omega -1 --dt 0.1 --steps 3 -o " + (dir / "c.csv").string()) == 0);
    CHECK(fs::exists(dir / "c.csv"));
    CHECK(status(bin + " simulate --engine pure-dephasing --omega -1 -o " + (dir / "p.csv").string()) == 2);
    CHECK(status(bin + " sweep --mode manufactured --dts 0.01") == 2);
}
#endif
