#include <doctest.h>

#include <cmath>
#include <random>

#include "ivbounds/bounds.hpp"
#include "ivbounds/effects.hpp"
#include "ivbounds/estimate.hpp"
#include "ivbounds/inference.hpp"
#include "ivbounds/simulate.hpp"
#include "oracle.hpp"

using namespace ivbounds;

namespace {

ReducedFormFit with_zero_vcov(ReducedFormFit f) {
    f.vcov = Eigen::MatrixXd::Zero(f.size(), f.size());
    return f;
}

Eigen::VectorXd h01() {
    Eigen::VectorXd h(2);
    h << 0.0, 1.0;
    return h;
}

}  // namespace

TEST_CASE("configuration checks") {
    CHECK_NOTHROW(BonferroniConfig{}.check());
    CHECK(BonferroniConfig::with_alpha(0.1).alpha1 == doctest::Approx(0.01));
    CHECK_THROWS_AS((BonferroniConfig{0.05, 0.05}.check()), std::invalid_argument);
    CHECK_THROWS_AS((BonferroniConfig{1.2, 0.01}.check()), std::invalid_argument);
}

TEST_CASE("delta method") {
    Eigen::VectorXd at(3);
    at << 0.3, -1.0, 2.0;
    const auto lin = [](const Eigen::VectorXd& x) { return 2.0 * x(0) - 3.0 * x(1) + 6.0 * x(2); };
    CHECK(delta_se(lin, at, Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(7.0).epsilon(1e-9));
    Eigen::VectorXd x(1);
    x << 3.0;
    CHECK(delta_se([](const Eigen::VectorXd& v) { return v(0) * v(0); }, x, Eigen::MatrixXd::Constant(1, 1, 4.0)) ==
          doctest::Approx(12.0).epsilon(1e-8));
}

TEST_CASE("zero sampling noise gives the identified set") {
    const ReducedFormFit f = with_zero_vcov(population_reduced_form(DgpConfig{}));
    const Interval ci = ci_sigma_ustar2(f, {});
    const SigmaUstarSet set = sigma_ustar_interval(f);
    CHECK(ci.lo == set.interval.lo);
    CHECK(ci.hi == set.interval.hi);

    const EffectQuery q{EffectKind::pe_tobit_mean, 0, h01()};
    const Interval ce = ci_effect(q, f, nullptr, {});
    const EffectBounds b = pe_bounds(q, f, set.interval);
    CHECK(ce.lo == doctest::Approx(b.lower).epsilon(1e-12));
    CHECK(ce.hi == doctest::Approx(b.upper).epsilon(1e-12));

    const EffectQuery p{EffectKind::pe_probability, 0, h01()};
    const Interval cp = ci_effect(p, f, nullptr, {});
    const EffectBounds bp = pe_bounds(p, f, set.interval);
    CHECK(cp.lo == doctest::Approx(bp.lower).epsilon(1e-10));
    CHECK(cp.hi == doctest::Approx(bp.upper).epsilon(1e-10));
}

TEST_CASE("perfectly correlated bounds use the normal quantile") {
    ReducedFormFit f = population_reduced_form(DgpConfig{});
    f.vcov = Eigen::MatrixXd::Zero(f.size(), f.size());
    f.vcov(f.index_sigma_u2(), f.index_sigma_u2()) = 0.01;
    const SigmaUstarCi d = ci_sigma_ustar2_detail(f, {});
    CHECK(d.rho_xi == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.critical == doctest::Approx(oracle::quantile(1.0 - 0.005 / 2.0)).epsilon(1e-6));
}

TEST_CASE("singleton first step reduces to a delta-method interval") {
    const DgpConfig c;
    const Dataset d = sample(c, 41);
    const ReducedFormFit f = fit_two_step(d, ModelKind::tobit);
    const EffectQuery q{EffectKind::pe_tobit_mean, 0, h01()};
    const BonferroniConfig cfg{};
    const double s = 1.0;
    const Interval ci = ci_effect(q, f, &d, cfg, Interval(s, s));
    const double e = effect_value(q, f, &d, s);
    const double se = effect_se(q, f, &d, s);
    const double z = oracle::quantile(1.0 - (cfg.alpha - cfg.alpha1) / 2.0);
    CHECK(ci.lo == doctest::Approx(e - z * se).epsilon(1e-10));
    CHECK(ci.hi == doctest::Approx(e + z * se).epsilon(1e-10));
}

TEST_CASE("confidence intervals contain the estimated bounds") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        DgpConfig c;
        c.rho_star = -0.9 + 0.15 * static_cast<double>(seed);
        const Dataset d = sample(c, 100 + seed);
        const ReducedFormFit f = fit_two_step(d, ModelKind::tobit);
        const SigmaUstarSet set = sigma_ustar_interval(f);
        const Interval sci = ci_sigma_ustar2(f, {});
        CHECK(sci.lo <= set.interval.lo);
        CHECK(sci.hi >= set.interval.hi);
        CHECK(sci.lo >= 0.0);
        Eigen::VectorXd h(2);
        h << d.x.mean(), 1.0;
        for (EffectKind k : {EffectKind::pe_tobit_mean, EffectKind::pe_probability, EffectKind::ape_tobit_mean,
                             EffectKind::ape_probability}) {
            const EffectQuery q{k, 0, h};
            const EffectBounds b = effect_bounds(q, f, &d, set.interval);
            const Interval ci = ci_effect(q, f, &d, {}, sci);
            INFO("seed " << seed << " kind " << to_string(k));
            CHECK(ci.lo <= b.lower);
            CHECK(ci.hi >= b.upper);
            const Interval naive = naive_ci(q, f, &d, {});
            CHECK(naive.lo <= b.naive);
            CHECK(naive.hi >= b.naive);
        }
    }
}

TEST_CASE("delta-method SE of xi1 against a parametric bootstrap") {
    DgpConfig c;
    c.rho_star = 0.3;
    const ReducedFormFit f = fit_two_step(sample(c, 42), ModelKind::tobit);
    const Eigen::VectorXd p0 = f.packed();
    const auto xi1 = [&](const Eigen::VectorXd& p) {
        const ReducedFormFit g = f.with_packed(p);
        return xi1_value(g.theta1, g.sigma_u2, g.sigma_v2, g.sigma_uv);
    };
    const double se = delta_se(xi1, p0, f.vcov);
    const Eigen::LLT<Eigen::MatrixXd> llt(f.vcov + 1e-14 * Eigen::MatrixXd::Identity(f.size(), f.size()));
    REQUIRE(llt.info() == Eigen::Success);
    const Eigen::MatrixXd l = llt.matrixL();
    std::mt19937_64 gen(43);
    std::normal_distribution<double> nrm(0.0, 1.0);
    double m = 0.0, m2 = 0.0;
    const int reps = 100000;
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXd e(f.size());
        for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = nrm(gen);
        const double v = xi1(p0 + l * e);
        m += v / reps;
        m2 += v * v / reps;
    }
    const double boot = std::sqrt(m2 - m * m);
    INFO("delta " << se << " bootstrap " << boot);
    CHECK(se / boot > 0.9);
    CHECK(se / boot < 1.1);
}
