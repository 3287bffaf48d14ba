#include <doctest.h>

#include <cmath>
#include <random>

#include "ivbounds/bounds.hpp"
#include "ivbounds/error.hpp"
#include "oracle.hpp"

using namespace ivbounds;

TEST_CASE("identified set hand examples") {
    const SigmaUstarSet a = sigma_ustar_interval(2.0, 5.0, 2.0, -2.0);
    CHECK(a.xi1 == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(a.xi2 == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(a.interval.lo == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(a.interval.hi == 5.0);

    const SigmaUstarSet b = sigma_ustar_interval(2.0, 5.0, 2.0, -1.5);
    CHECK(b.xi1 == doctest::Approx(4.0 / 7.0).epsilon(1e-14));
    CHECK(b.interval.lo == doctest::Approx(4.0 / 7.0).epsilon(1e-14));

    const SigmaUstarSet z = sigma_ustar_interval(0.0, 5.0, 2.0, -2.0);
    CHECK(z.interval.degenerate());
    CHECK(z.interval.lo == 5.0);

    CHECK_THROWS_AS(sigma_ustar_interval(1.0, -1.0, 2.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sigma_ustar_interval(1.0, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("identified set agrees with a brute-force scan") {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> var(0.2, 6.0), corr(-0.9, 0.9), slope(-3.0, 3.0);
    for (int r = 0; r < 200; ++r) {
        const double su2 = var(gen), sv2 = var(gen), suv = corr(gen) * std::sqrt(su2 * sv2);
        double th = slope(gen);
        if (std::abs(th) < 0.05) th = 0.5;
        const Interval set = sigma_ustar_interval(th, su2, sv2, suv).interval;
        // Smallest admissible s on a fine grid over (0, su2].
        double first = std::nan("");
        const int grid = 200000;
        for (int i = 1; i <= grid; ++i) {
            const double s = su2 * i / grid;
            if (oracle::admissible(oracle::structural_at(s, th, su2, sv2, suv), 1e-12)) {
                first = s;
                break;
            }
        }
        INFO("draw " << r);
        CHECK(std::abs(first - set.lo) <= su2 / grid + 1e-12);
        CHECK(set.hi == su2);
    }
}

TEST_CASE("measurement error ceiling") {
    CHECK(epsilon_upper(2.0, 5.0, 2.0, -2.0) == doctest::Approx(1.2).epsilon(1e-14));
    const double su2 = 3.0, sv2 = 2.0, suv = std::sqrt(su2 * sv2 * (1 - 1e-9));
    CHECK(std::abs(epsilon_upper(1.0, su2, sv2, suv)) < 1e-7);
    CHECK(epsilon_upper(0.0, 5.0, 2.0, -2.0) == doctest::Approx(std::min((10.0 - 4.0) / 5.0, 2.0)).epsilon(1e-14));
}

TEST_CASE("implied structural parameters") {
    const StructuralParams s = implied_structural(1.0, 2.0, 5.0, 2.0, -2.0);
    CHECK(s.sigma_eps2 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.sigma_vstar2 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(s.sigma_ustar_vstar) < 1e-14);

    const StructuralParams top = implied_structural(5.0, 2.0, 5.0, 2.0, -2.0);
    CHECK(top.sigma_eps2 == 0.0);
    CHECK(top.sigma_vstar2 == 2.0);
    CHECK(top.sigma_ustar_vstar == -2.0);

    const StructuralParams low = implied_structural(0.2, 2.0, 5.0, 2.0, -2.0);
    CHECK(std::abs(low.sigma_ustar2 * low.sigma_vstar2 - low.sigma_ustar_vstar * low.sigma_ustar_vstar) < 1e-10);

    CHECK_THROWS_AS(implied_structural(0.1, 2.0, 5.0, 2.0, -2.0), std::invalid_argument);
    CHECK_THROWS_AS(implied_structural(1.0, 0.0, 5.0, 2.0, -2.0), std::invalid_argument);
    CHECK(implied_structural_unchecked(0.1, 2.0, 5.0, 2.0, -2.0).violation() > 0.0);

    const ComponentVariances back = forward_map(s, 2.0);
    CHECK(back.sigma_u2 == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(back.sigma_v2 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(back.sigma_uv == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("component intersection") {
    const Interval single = intersect_component_intervals({{5.0, 2.0, -2.0}}, 2.0);
    CHECK(single.lo == sigma_ustar_interval(2.0, 5.0, 2.0, -2.0).interval.lo);
    CHECK(single.hi == 5.0);

    const SigmaUstarSet i2 = sigma_ustar_interval(2.0, 4.0, 2.0, -1.5);
    CHECK(i2.interval.lo == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
    const Interval both = intersect_component_intervals({{5.0, 2.0, -2.0}, {4.0, 2.0, -1.5}}, 2.0);
    CHECK(std::abs(both.lo - 0.2) < 1e-12);
    CHECK(std::abs(both.hi - 4.0) < 1e-12);

    CHECK_THROWS_AS(intersect_component_intervals({{5.0, 2.0, -2.0}, {0.1, 2.0, 0.0}}, 2.0), EmptyIntersectionError);
}

TEST_CASE("intersection contains the truth for mixture designs") {
    std::mt19937_64 gen(22);
    std::uniform_real_distribution<double> pos(0.3, 2.0), cor(-0.8, 0.8), slope(0.3, 2.5);
    for (int r = 0; r < 300; ++r) {
        const double th = slope(gen), su_star2 = pos(gen);
        std::vector<ComponentVariances> comps;
        std::vector<std::pair<double, double>> vstar;  // (var V*, cov U*V*)
        std::vector<double> eps;
        for (int j = 0; j < 2; ++j) {
            const double sv = pos(gen);
            vstar.emplace_back(sv * sv, cor(gen) * std::sqrt(su_star2) * sv);
        }
        for (int l = 0; l < 2; ++l) eps.push_back(pos(gen) * 0.5);
        for (const auto& [vv, cv] : vstar) {
            for (double e2 : eps) comps.push_back({su_star2 + th * th * e2, vv + e2, cv - th * e2});
        }
        const Interval set = intersect_component_intervals(comps, th);
        CHECK(set.lo <= su_star2 + 1e-12);
        CHECK(su_star2 <= set.hi + 1e-12);
        // Interior points give structural triplets that agree along j and l.
        const double s = 0.5 * (set.lo + set.hi);
        std::vector<StructuralParams> st;
        for (const auto& c : comps) st.push_back(implied_structural(s, th, c.sigma_u2, c.sigma_v2, c.sigma_uv));
        // comps are j-major: (j0,l0), (j0,l1), (j1,l0), (j1,l1)
        CHECK(std::abs(st[0].sigma_eps2 - st[2].sigma_eps2) < 1e-10);
        CHECK(std::abs(st[1].sigma_eps2 - st[3].sigma_eps2) < 1e-10);
        CHECK(std::abs(st[0].sigma_vstar2 - st[1].sigma_vstar2) < 1e-10);
        CHECK(std::abs(st[0].sigma_ustar_vstar - st[1].sigma_ustar_vstar) < 1e-10);
        CHECK(std::abs(st[2].sigma_vstar2 - st[3].sigma_vstar2) < 1e-10);
    }
}
