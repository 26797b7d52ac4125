#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <diffmart/simulate.hpp>

using namespace diffmart;

namespace {

DiffusionSpec family(const std::string& name) {
    if (name == "brownian") return catalog("brownian");
    if (name == "bessel") return catalog("bessel", {{"delta", 3.0}});
    if (name == "cir2") return catalog("cir", {{"kappa", 1.0}, {"theta", 1.0}, {"sigma", 2.0}});
    throw std::runtime_error("unknown test family " + name);
}

SimulationConfig base_config(double x, double horizon, double step, std::size_t paths,
                             std::uint64_t seed) {
    SimulationConfig cfg;
    cfg.initial_state = x;
    cfg.horizon = horizon;
    cfg.step = step;
    cfg.paths = paths;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("path streams are reproducible and well ranged") {
    PathStream a(7, 3);
    PathStream b(7, 3);
    for (int i = 0; i < 64; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
    PathStream c(7, 4);
    CHECK(c.stream_id != a.stream_id);
    CHECK(PathStream(8, 3).stream_id != PathStream(7, 3).stream_id);
}

TEST_CASE("first step reproduces the seeded gaussian increment") {
    ScaleSpeed ss((family("brownian")));
    const double dt = 0.01;
    auto cfg = base_config(0.0, 0.02, dt, 100, 42);
    const auto ens = simulate(ss, cfg, {dt});

    PathStream gen(cfg.seed, 0);
    const double u1 = gen.uniform();
    const double u2 = gen.uniform();
    (void)gen.uniform(); // bridge slot, discarded without a barrier
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(detail::kTwoPi * u2);
    const double expected = 0.0 + 0.0 * dt + 1.0 * std::sqrt(dt) * z;
    CHECK(ens.states[0][0] == expected);
}

TEST_CASE("ensembles and estimates are bit identical across runs") {
    ScaleSpeed ss((family("brownian")));
    auto cfg = base_config(0.0, 0.5, 0.01, 300, 99);
    const auto a = simulate(ss, cfg, {0.0, 0.25, 0.5});
    const auto b = simulate(ss, cfg, {0.0, 0.25, 0.5});
    REQUIRE(a.states.size() == 3);
    for (std::size_t j = 0; j < a.states.size(); ++j) CHECK(a.states[j] == b.states[j]);
    CHECK(a.rng_stream_ids == b.rng_stream_ids);
    for (std::size_t i = 0; i < cfg.paths; ++i)
        CHECK(a.rng_stream_ids[i] == PathStream(cfg.seed, i).stream_id);

    const auto f = solve_excessive(ss, 0.5, Direction::increasing, {});
    const auto d1 = martingale_deficit(f, cfg);
    const auto d2 = martingale_deficit(f, cfg);
    CHECK(d1.mean == d2.mean);
    CHECK(d1.half_width == d2.half_width);
    CHECK(d1.n_effective == cfg.paths);
}

TEST_CASE("degenerate horizons are handled exactly") {
    ScaleSpeed ss((family("brownian")));
    const auto f = solve_excessive(ss, 0.5, Direction::increasing, {});

    auto cfg = base_config(0.0, 0.0, 0.01, 500, 1);
    const auto d = martingale_deficit(f, cfg);
    CHECK(d.mean == 0.0);
    CHECK(d.half_width > 0.0);

    auto hcfg = base_config(0.0, 2.0, 0.01, 500, 1);
    const auto h = hitting_laplace(ss, 0.7, 0.7, 0.5, hcfg);
    CHECK(h.mean == 1.0);
    CHECK(h.half_width > 0.0);
}

TEST_CASE("simulation configs are validated") {
    ScaleSpeed ss((family("bessel")));
    const auto f = solve_excessive(ss, 0.5, Direction::increasing, {});

    auto cfg = base_config(1.0, 1.0, 0.01, 50, 1);
    CHECK_THROWS_AS(martingale_deficit(f, cfg), ConfigError);
    cfg = base_config(1.0, 1.0, 2.0, 500, 1);
    CHECK_THROWS_AS(martingale_deficit(f, cfg), ConfigError);
    cfg = base_config(0.0, 1.0, 0.01, 500, 1); // on the endpoint, not interior
    CHECK_THROWS_AS(martingale_deficit(f, cfg), ConfigError);
    cfg = base_config(1.0, 1.0, 0.01, 500, 1);
    cfg.confidence = 0.8;
    CHECK_THROWS_AS(martingale_deficit(f, cfg), ConfigError);

    auto good = base_config(1.0, 1.0, 0.01, 500, 1);
    CHECK_THROWS_AS(simulate(ss, good, {0.0123}), ConfigError);
    CHECK_THROWS_AS(simulate(ss, good, {0.5, 0.25}), ConfigError);
    CHECK_THROWS_AS(simulate(ss, good, {2.0}), ConfigError);
    CHECK_THROWS_AS(hitting_laplace(ss, 1.0, -1.0, 0.5, good), ConfigError);
    CHECK_THROWS_AS(ratio_identity_check(ss, 1.0, 0.5, 1.0, good), ConfigError);
}

TEST_CASE("accessible endpoint absorbs and freezes the paths") {
    ScaleSpeed ss((family("cir2")));
    auto cfg = base_config(0.2, 4.0, 1e-3, 500, 2024);
    const auto ens = simulate(ss, cfg, {0.0, 2.0, 4.0});

    std::size_t absorbed = 0;
    for (std::size_t i = 0; i < cfg.paths; ++i) {
        if (ens.absorbed[i]) {
            ++absorbed;
            CHECK(ens.absorption_state[i] == 0.0);
            CHECK(ens.absorption_time[i] <= cfg.horizon);
            CHECK(ens.states[2][i] == 0.0);
        } else {
            CHECK(ens.absorption_time[i] == kInf);
            CHECK(ens.states[2][i] > 0.0);
        }
        CHECK(ens.states[0][i] == 0.2);
    }
    // a sub-Feller squeeze from x = 0.2 reaches the origin often
    CHECK(absorbed > 100);
}

TEST_CASE("martingale deficit vanishes for the conservative family") {
    ScaleSpeed ss((family("brownian")));
    const auto f = solve_excessive(ss, 0.5, Direction::increasing, {});
    auto cfg = base_config(0.0, 0.5, 5e-3, 4000, 11);
    const auto d = martingale_deficit(f, cfg);
    CHECK(std::abs(d.mean) <= 4.0 * d.half_width);
    CHECK(d.half_width < 0.05);
}

TEST_CASE("strict local deficit is positive and grows with the horizon") {
    ScaleSpeed ss((family("bessel")));
    const auto f = solve_excessive(ss, 0.5, Direction::decreasing, {});
    const double oracle = 0.5 + 0.5 * std::exp(2.0) * std::erfc(std::sqrt(2.0));

    std::vector<EstimateWithCI> d;
    for (double t : {0.25, 0.5, 1.0}) {
        auto cfg = base_config(1.0, t, 1e-3, 4000, 314159);
        d.push_back(martingale_deficit(f, cfg));
    }
    CHECK(d[2].mean > 5.0 * d[2].half_width);
    CHECK(d[1].mean >= d[0].mean - (d[0].half_width + d[1].half_width));
    CHECK(d[2].mean >= d[1].mean - (d[1].half_width + d[2].half_width));
    // discretization slack on top of the MC band
    CHECK(std::abs(d[2].mean - oracle) <= 4.0 * d[2].half_width + 0.02);
}

TEST_CASE("scale deficit separates the martingale from the submartingale") {
    ScaleSpeed bm((family("brownian")));
    auto cfg = base_config(0.0, 1.0, 2e-3, 4000, 7);
    const auto db = scale_deficit(bm, cfg);
    CHECK(std::abs(db.mean) <= 4.0 * db.half_width);

    ScaleSpeed bes((family("bessel")));
    auto cfg2 = base_config(1.0, 1.0, 1e-3, 4000, 7);
    const auto ds = scale_deficit(bes, cfg2);
    const double oracle = std::erfc(std::sqrt(0.5)); // 1 - erf(1/sqrt(2))
    CHECK(ds.mean > 5.0 * ds.half_width);
    CHECK(std::abs(ds.mean - oracle) <= 4.0 * ds.half_width + 0.01);
}

TEST_CASE("hitting laplace matches the closed forms") {
    ScaleSpeed bm((family("brownian")));
    auto cfg = base_config(0.0, 12.0, 2e-3, 5000, 271828);
    const auto eb = hitting_laplace(bm, 0.0, 1.0, 0.5, cfg);
    CHECK(std::abs(eb.mean - std::exp(-1.0)) <= 4.0 * eb.half_width);
    CHECK(eb.warning.empty());

    ScaleSpeed bes((family("bessel")));
    const auto es = hitting_laplace(bes, 1.0, 2.0, 0.5, cfg);
    const double oracle = 2.0 * std::sinh(1.0) / std::sinh(2.0);
    CHECK(std::abs(es.mean - oracle) <= 4.0 * es.half_width);
}

TEST_CASE("censoring bias stays within the discount bound") {
    ScaleSpeed bm((family("brownian")));
    auto short_cfg = base_config(0.0, 3.0, 2e-3, 5000, 5);
    auto long_cfg = base_config(0.0, 12.0, 2e-3, 5000, 5);
    const auto e3 = hitting_laplace(bm, 0.0, 1.0, 0.5, short_cfg);
    const auto e12 = hitting_laplace(bm, 0.0, 1.0, 0.5, long_cfg);

    const double noise = 4.0 * (e3.half_width + e12.half_width);
    CHECK(e12.mean - e3.mean >= -noise);
    CHECK(e12.mean - e3.mean <= std::exp(-0.5 * 3.0) + noise);

    auto tight = base_config(0.0, 2.0, 2e-3, 2000, 5);
    const auto e2 = hitting_laplace(bm, 0.0, 1.0, 0.5, tight);
    CHECK_FALSE(e2.warning.empty());
}

TEST_CASE("ratio identity closes for the free endpoint") {
    ScaleSpeed bm((family("brownian")));
    auto cfg = base_config(0.0, 20.0, 0.01, 2000, 314);
    const auto out = ratio_identity_check(bm, 0.5, 1.0, 0.0, cfg);
    CHECK(out.lhs == 0.0);
    CHECK(std::abs(out.rhs.mean - out.lhs) <= 4.0 * out.rhs.half_width);
    CHECK(out.truncation_bound <= out.rhs.half_width);
    REQUIRE(out.times.size() == out.time_means.size());
    CHECK(out.times.front() == 0.0);
    CHECK(out.times.back() == Catch::Approx(20.0));
}

TEST_CASE("ratio identity closes at the squeezed endpoint") {
    ScaleSpeed bes((family("bessel")));
    auto cfg = base_config(1.0, 15.0, 5e-3, 3000, 1618);
    const auto out = ratio_identity_check(bes, 0.5, 1.0, 1.0, cfg, Side::alpha);
    CHECK(out.lhs == Catch::Approx(std::exp(1.0 - std::sqrt(2.0))).epsilon(1e-5));
    CHECK(std::abs(out.rhs.mean - out.lhs) <= 4.0 * out.rhs.half_width);
}

TEST_CASE("ratio identity refuses an unresolvable truncation") {
    ScaleSpeed bm((family("brownian")));
    auto cfg = base_config(0.0, 1.0, 0.01, 200, 1);
    CHECK_THROWS_AS(ratio_identity_check(bm, 0.5, 1.0, 0.0, cfg), InconclusiveError);
}

TEST_CASE("runaway paths outside the hull reject the estimate") {
    ScaleSpeed bm((family("brownian")));
    GridSpec gs;
    gs.hull_alpha = -1.0;
    gs.hull_beta = 1.0;
    const auto f = solve_excessive(bm, 0.5, Direction::increasing, gs);
    auto cfg = base_config(0.0, 1.0, 0.01, 200, 77);
    CHECK_THROWS_AS(martingale_deficit(f, cfg), SolverError);
}
