#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ivbounds/bounds.hpp"
#include "ivbounds/rng.hpp"
#include "ivbounds/simulate.hpp"
#include "oracle.hpp"

using namespace ivbounds;

TEST_CASE("sampling moments") {
    DgpConfig c;
    c.n = 100000;
    const Dataset d = sample(c, 61);
    const double mx = d.x.mean();
    const double vx = (d.x.array() - mx).square().sum() / (c.n - 1.0);
    // Var of the sample variance of a normal: 2 sigma^4 / (n - 1).
    CHECK(std::abs(vx - 3.0) <= 3.0 * std::sqrt(2.0 * 9.0 / (c.n - 1.0)));
    CHECK(d.w.isOnes());

    DgpConfig clean;
    clean.n = 100000;
    clean.sigma_eps = 0.0;
    const Dataset e = sample(clean, 62);
    const double zx = (e.x.array() - e.x.mean()).matrix().dot((e.z.col(0).array() - e.z.col(0).mean()).matrix());
    const double corr = zx / std::sqrt((e.x.array() - e.x.mean()).square().sum() *
                                       (e.z.col(0).array() - e.z.col(0).mean()).square().sum());
    CHECK(std::abs(corr - 1.0 / std::sqrt(2.0)) <= 3.0 * (1.0 - 0.5) / std::sqrt(100000.0));

    DgpConfig empty;
    empty.n = 0;
    CHECK(sample(empty, 1).n() == 0);

    DgpConfig bad;
    bad.rho_star = 1.0;
    CHECK_THROWS_AS(sample(bad, 1), std::invalid_argument);
}

TEST_CASE("population reduced form and truths") {
    const ReducedFormFit f = population_reduced_form(DgpConfig{});
    CHECK(f.sigma_u2 == 5.0);
    CHECK(f.sigma_v2 == 2.0);
    CHECK(f.sigma_uv == -2.0);
    const auto comps = population_components(DgpConfig{});
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].sigma_u2 == 5.0);

    Eigen::VectorXd h(2);
    h << 0.0, 1.0;
    CHECK(true_effect(DgpConfig{}, {EffectKind::pe_tobit_mean, 0, h}) == doctest::Approx(1.68269).epsilon(1e-5));
    CHECK(true_effect(DgpConfig{}, {EffectKind::ape_tobit_mean, 0, {}}) == doctest::Approx(1.26112).epsilon(1e-5));
    DgpConfig flat;
    flat.theta2 = 0.0;
    CHECK(true_effect(flat, {EffectKind::ape_tobit_mean, 1, {}}) == 0.0);

    DgpConfig probit;
    probit.kind = ModelKind::probit;
    const ReducedFormFit p = population_reduced_form(probit);
    CHECK(p.sigma_u2 == 1.0);
    CHECK(p.theta1 == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-14));
}

TEST_CASE("mixture design truths") {
    DgpConfig m;
    m.mixture = MixtureSpec{{{0.4, 1.5, 1.0, 0.3}, {0.6, -1.0, 0.8, -0.2}}, {{0.5, 0.3, 0.5}, {0.5, -0.3, 1.0}}};
    const auto comps = population_components(m);
    REQUIRE(comps.size() == 4);
    CHECK(comps[1].sigma_u2 == doctest::Approx(1.0 + 4.0 * 1.0).epsilon(1e-14));
    CHECK(comps[2].sigma_v2 == doctest::Approx(0.64 + 0.25).epsilon(1e-14));
    const Interval set = intersect_component_intervals(comps, m.theta1);
    CHECK(set.lo <= 1.0);
    CHECK(set.hi >= 1.0);

    // Monte Carlo check of the APE integral over the V* mixture.
    const double truth = true_effect(m, {EffectKind::ape_tobit_mean, 0, {}});
    Rng rng(64);
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < 400000; ++i) {
        const bool first = rng.uniform() < 0.4;
        const double vs = first ? 1.5 + 1.0 * rng.normal() : -1.0 + 0.8 * rng.normal();
        const double xs = rng.normal() + vs;
        const double v = oracle::Phi(2.0 * xs + 1.0) * 2.0;
        acc += v;
        acc2 += v * v;
    }
    const double mean = acc / 400000, se = std::sqrt((acc2 / 400000 - mean * mean) / 400000);
    CHECK(std::abs(mean - truth) <= 3.0 * se);
}

TEST_CASE("Monte Carlo harness") {
    McConfig cfg;
    cfg.rho_grid = {0.0};
    cfg.reps = 10;
    cfg.seed = 7;
    cfg.design.n = 500;
    const McResult r = run_mc(cfg);
    CHECK(r.records.size() == 10);
    CHECK(r.aggregates.size() == 1);

    cfg.threads = 3;
    const McResult r3 = run_mc(cfg);
    std::ostringstream a, b;
    write_replications_csv(a, r, false);
    write_replications_csv(b, r3, false);
    CHECK(a.str() == b.str());
    std::ostringstream agg;
    write_aggregate_csv(agg, r, false);
    int lines = 0;
    for (char ch : agg.str()) lines += ch == '\n';
    CHECK(lines == 2);
    std::ostringstream plot;
    write_plot_csv(plot, r, "pe-mean");
    CHECK(plot.str().rfind("rho,series,value\n", 0) == 0);
    for (const char* s : {",true,", ",true_lb,", ",true_ub,", ",median_lb,", ",median_ub,", ",naive,", ",ci_lo,",
                          ",ci_hi,", ",naive_ci_lo,", ",naive_ci_hi,"}) {
        CHECK(plot.str().find(s) != std::string::npos);
    }
}

TEST_CASE("population bounds at large n") {
    for (double rho : {-0.6, 0.0, 0.6}) {
        DgpConfig c;
        c.rho_star = rho;
        c.n = 100000;
        const Interval truth = sigma_ustar_interval(population_reduced_form(c)).interval;
        McConfig mc;
        mc.design = c;
        mc.rho_grid = {rho};
        mc.reps = 1;
        mc.seed = 65;
        const McResult r = run_mc(mc);
        REQUIRE(r.records[0].ok);
        CHECK(std::abs(r.records[0].sigma_lb - truth.lo) < 0.05);
        CHECK(std::abs(r.records[0].sigma_ub - truth.hi) < 0.05);
    }
}
