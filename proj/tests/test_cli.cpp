// End-to-end checks of the command line binary: output shapes, JSON
// round-trips, and the exit code contract (0 conclusive, 1 config,
// 2 inconclusive, 3 numeric failure).
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "json.hpp"

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run_cli_redirect(const std::string& args, const char* redirect) {
    const std::string cmd = std::string(DIFFMART_CLI_PATH) + " " + args + " " + redirect;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult res;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, n);
    const int status = pclose(pipe);
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

RunResult run_cli(const std::string& args) { return run_cli_redirect(args, "2>/dev/null"); }

// stdout and stderr together, for checking diagnostic text
RunResult run_cli_all(const std::string& args) { return run_cli_redirect(args, "2>&1"); }

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

// reciprocal Bessel(3): zero drift, volatility x^2 on (0, inf)
std::string write_custom_config() {
    const std::string path = "/tmp/diffmart_cli_test_config.json";
    std::ofstream out(path);
    out << R"({
  "diffusion": {"custom": {"drift": "0", "volatility": "x^2",
                            "interval": [0, "inf"], "reference_point": 1.0}},
  "rates": [0.5, 1.0],
  "simulation": {"horizon": 0.05, "step": 0.00002, "paths": 300, "seed": 42}
})";
    return path;
}

} // namespace

TEST_CASE("classify prints a two row endpoint report") {
    const RunResult r = run_cli("classify --family brownian");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("alpha") != std::string::npos);
    CHECK(r.out.find("beta") != std::string::npos);
    CHECK(r.out.find("InaccessibleNatural") != std::string::npos);
    CHECK(r.out.find("points to x =") != std::string::npos);

    const RunResult cir = run_cli("classify --family cir --param kappa=1 --param theta=1 "
                                  "--param sigma=2");
    REQUIRE(cir.code == 0);
    CHECK(cir.out.find("Accessible") != std::string::npos);
    CHECK(cir.out.find("InaccessibleNatural") != std::string::npos);
}

TEST_CASE("json output parses and reserializes byte identically") {
    for (const std::string args :
         {std::string("classify --family bessel --param delta=3 --json"),
          std::string("table --family gbm --param mu=0.1 --param sigma=0.3 --json"),
          std::string("verdict --family ou --param kappa=1 --param sigma=1 --json")}) {
        const RunResult r = run_cli(args);
        REQUIRE(r.code == 0);
        const auto doc = nlohmann::ordered_json::parse(r.out);
        const std::string round = doc.dump(2) + "\n";
        CHECK(round == r.out);
    }
}

TEST_CASE("classify json carries the truncation diagnostics") {
    const RunResult r = run_cli("classify --family bessel --param delta=3 --json");
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::ordered_json::parse(r.out);
    REQUIRE(doc.at("endpoints").size() == 2);
    const auto& alpha = doc.at("endpoints")[0];
    CHECK(alpha.at("side") == "alpha");
    CHECK(alpha.at("kind") == "InaccessibleEntrance");
    CHECK(alpha.at("access").at("diverged").get<bool>());
    CHECK(alpha.at("access").at("partial_sums").size() >= 4);
    CHECK(alpha.at("access").at("truncation_points").size() >= 4);
    // inaccessible endpoints carry the follow-up integral as well
    CHECK(alpha.at("nature").at("diverged").get<bool>() == false);
    CHECK(alpha.at("nature").at("value").get<double>() == Catch::Approx(1.0 / 3.0).margin(1e-9));
    const auto& beta = doc.at("endpoints")[1];
    CHECK(beta.at("kind") == "InaccessibleNatural");
}

TEST_CASE("solve emits the documented CSV columns") {
    // node count is the cell count: the grid carries both hull endpoints
    const RunResult r = run_cli("solve --family brownian --r 0.5 --nodes 64");
    REQUIRE(r.code == 0);
    REQUIRE(r.out.rfind("x,p(x),value,dvalue_dp\n", 0) == 0);
    CHECK(count_lines(r.out) == 66);

    const RunResult lg =
        run_cli("solve --family bessel --param delta=3 --r 0.5 --direction decreasing "
                "--nodes 64 --log-space");
    REQUIRE(lg.code == 0);
    REQUIRE(lg.out.rfind("x,p(x),log_value,log_abs_dvalue_dp\n", 0) == 0);
    CHECK(count_lines(lg.out) == 66);

    // same row count regardless of mode, and every row has three commas
    std::size_t commas = 0;
    const std::string first_row = r.out.substr(r.out.find('\n') + 1);
    for (char c : first_row.substr(0, first_row.find('\n')))
        if (c == ',') ++commas;
    CHECK(commas == 3);
}

TEST_CASE("table reports six diagnostics per side with agreement") {
    const RunResult r = run_cli("table --family bessel --param delta=3");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rate ratio") != std::string::npos);
    CHECK(r.out.find("scale-affine ratio") != std::string::npos);
    CHECK(r.out.find("slope ratio") != std::string::npos);
    CHECK(r.out.find("scale slope") != std::string::npos);
    CHECK(r.out.find("speed integral") != std::string::npos);
    CHECK(r.out.find("agreement: yes") != std::string::npos);
    CHECK(r.out.find("agreement: NO") == std::string::npos);

    const RunResult one = run_cli("table --family bessel --param delta=3 --side alpha --json");
    REQUIRE(one.code == 0);
    const auto doc = nlohmann::ordered_json::parse(one.out);
    REQUIRE(doc.at("sides").size() == 1);
    CHECK(doc.at("sides")[0].at("implied_kind") == "InaccessibleEntrance");
    CHECK(doc.at("sides")[0].at("agreement").get<bool>());
}

TEST_CASE("verdict names all three processes") {
    const RunResult r = run_cli("verdict --family bessel --param delta=3");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("phi_side_alpha") != std::string::npos);
    CHECK(r.out.find("StrictLocalMartingale") != std::string::npos);
    CHECK(r.out.find("psi_side_beta") != std::string::npos);
    CHECK(r.out.find("Submartingale") != std::string::npos);

    const RunResult j = run_cli("verdict --family brownian --r 0.5 --r 1.0 --json");
    REQUIRE(j.code == 0);
    const auto doc = nlohmann::ordered_json::parse(j.out);
    for (const auto& v : doc.at("verdicts")) CHECK(v.at("verdict") == "Martingale");
}

TEST_CASE("verify reaches a martingale consistent verdict on a true martingale") {
    const RunResult r =
        run_cli("verify --family brownian --r 0.5 --t 1 --dt 0.002 --paths 2000 --seed 7");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("verdict: martingale-consistent") != std::string::npos);

    const RunResult j = run_cli("verify --family bessel --param delta=3 --side alpha --r 0.5 "
                                "--t 1 --dt 0.002 --paths 4000 --seed 11 --json");
    REQUIRE(j.code == 0);
    const auto doc = nlohmann::ordered_json::parse(j.out);
    CHECK(doc.at("verdict") == "strict-consistent");
    CHECK(doc.at("deficit").at("mean").get<double>() > 0.5);
    CHECK(doc.at("deficit").at("half_width").get<double>() < 0.1);
}

TEST_CASE("verify writes per time estimates when the ratio identity runs") {
    const std::string csv = "/tmp/diffmart_cli_test_ratio.csv";
    std::remove(csv.c_str());
    const RunResult r = run_cli("verify --family brownian --r 0.5 --s 1.0 --t 20 --dt 0.01 "
                                "--paths 1500 --seed 5 --csv " + csv);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("ratio identity") != std::string::npos);
    std::ifstream in(csv);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,discounted_value_estimate");
    std::string first;
    std::getline(in, first);
    CHECK(first == "0,1");
}

TEST_CASE("config files drive the run and flags override them") {
    const std::string path = write_custom_config();
    const RunResult v = run_cli("verdict --config " + path);
    REQUIRE(v.code == 0);
    // reciprocal Bessel: entrance at the top end, strict on the psi side
    CHECK(v.out.find("alpha InaccessibleNatural") != std::string::npos);
    CHECK(v.out.find("beta InaccessibleEntrance") != std::string::npos);
    CHECK(v.out.find("StrictLocalMartingale") != std::string::npos);
    CHECK(v.out.find("Supermartingale") != std::string::npos);

    // simulation block is honored when no flags are passed
    const RunResult mc = run_cli("verify --config " + path + " --r 0.5");
    REQUIRE(mc.code == 0);
    CHECK(mc.out.find("horizon 0.05") != std::string::npos);
    CHECK(mc.out.find("paths 300") != std::string::npos);

    // an explicit flag wins over the file
    const RunResult ov = run_cli("verify --config " + path + " --r 0.5 --paths 200");
    REQUIRE(ov.code == 0);
    CHECK(ov.out.find("paths 200") != std::string::npos);
}

TEST_CASE("report consolidates theory and simulation") {
    const RunResult r = run_cli("report --family brownian --paths 800 --dt 0.002 --seed 9");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("verdicts") != std::string::npos);
    CHECK(r.out.find("monte carlo") != std::string::npos);
    std::size_t hits = 0;
    for (std::size_t pos = 0; (pos = r.out.find("(consistent)", pos)) != std::string::npos;
         ++pos)
        ++hits;
    CHECK(hits == 3);

    const RunResult j =
        run_cli("report --family bessel --param delta=3 --paths 1500 --dt 0.002 --seed 9 "
                "--json");
    REQUIRE(j.code == 0);
    const auto doc = nlohmann::ordered_json::parse(j.out);
    const auto& mc = doc.at("monte_carlo");
    CHECK(mc.at("phi_side_alpha").at("verdict") == "strict-consistent");
    CHECK(mc.at("psi_side_beta").at("verdict") == "martingale-consistent");
    CHECK(mc.at("scale_process").at("verdict") == "strict-consistent");
    for (const char* k : {"phi_side_alpha", "psi_side_beta", "scale_process"})
        CHECK(mc.at(k).at("agreement") == "consistent");
}

TEST_CASE("configuration mistakes exit with code one") {
    CHECK(run_cli("classify --family nosuch").code == 1);
    CHECK(run_cli("classify").code == 1);              // no diffusion given
    CHECK(run_cli("").code == 1);                      // no subcommand
    CHECK(run_cli("classify --family brownian --bogus-flag").code == 1);
    CHECK(run_cli("classify --family gbm --param mu=abc").code == 1);
    CHECK(run_cli("classify --param mu=1").code == 1); // param without family
    CHECK(run_cli("verify --family brownian --side gamma").code == 1);
    CHECK(run_cli("solve --family brownian --nodes 4").code == 1);
    CHECK(run_cli("verify --family brownian --csv /tmp/x.csv").code == 1); // csv needs --s
    CHECK(run_cli("classify --config /tmp/does_not_exist_diffmart.json").code == 1);

    // a config missing a required custom field names it and exits 1
    const std::string path = "/tmp/diffmart_cli_test_bad_config.json";
    {
        std::ofstream out(path);
        out << R"({"diffusion": {"custom": {"drift": "0", "interval": [0, "inf"]}}})";
    }
    const RunResult bad = run_cli_all("classify --config " + path);
    CHECK(bad.code == 1);
    CHECK(bad.out.find("volatility") != std::string::npos);
}

TEST_CASE("undecidable runs exit with code two") {
    // horizon far too short for the ratio identity truncation bound
    const RunResult r = run_cli("verify --family brownian --r 0.5 --s 1.0 --t 1 --dt 0.01 "
                                "--paths 500 --seed 3");
    CHECK(r.code == 2);
}

TEST_CASE("numeric failures exit with code three") {
    // plain-space output overflows at a deep hull; log space handles it
    CHECK(run_cli("solve --family brownian --hull-beta 800 --nodes 64").code == 3);
    CHECK(run_cli("solve --family brownian --hull-beta 800 --nodes 64 --log-space").code == 0);
    // explosive volatility growth makes the explicit scheme overflow
    const std::string path = write_custom_config();
    const RunResult r = run_cli("verify --config " + path + " --r 0.5 --t 1 --dt 0.001 "
                                "--paths 3000");
    CHECK(r.code == 3);
}

TEST_CASE("help exits cleanly") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("classify --help").code == 0);
}
