#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ivbounds/error.hpp"
#include "ivbounds/normal.hpp"
#include "ivbounds/optimize.hpp"
#include "ivbounds/parallel.hpp"
#include "ivbounds/rng.hpp"
#include "oracle.hpp"

using namespace ivbounds;

namespace {

// P(max(eta1, eta2) <= c) by integrating over eta1.
double max2_cdf_oracle(double c, double rho) {
    const double s = std::sqrt(1.0 - rho * rho);
    auto f = [&](double x) { return oracle::phi(x) * oracle::Phi((c - rho * x) / s); };
    using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
    return Q::integrate(f, -std::numeric_limits<double>::infinity(), c, 20, 1e-14);
}

}  // namespace

TEST_CASE("normal primitives") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(std::abs(norm_quantile(0.975) - 1.959964) < 1e-5);
    for (double x = -30.0; x <= 8.0; x += 0.37) {
        CHECK(norm_cdf(x) == doctest::Approx(oracle::Phi(x)).epsilon(1e-12));
        CHECK(norm_pdf(x) == doctest::Approx(oracle::phi(x)).epsilon(1e-13));
        CHECK(norm_log_cdf(x) == doctest::Approx(std::log(oracle::Phi(x))).epsilon(1e-12));
        CHECK(inverse_mills(x) == doctest::Approx(oracle::phi(x) / oracle::Phi(x)).epsilon(1e-11));
    }
    CHECK(std::isfinite(norm_log_cdf(-60.0)));
    CHECK(std::isfinite(inverse_mills(-60.0)));
    for (double p : {1e-10, 0.001, 0.3, 0.5, 0.8, 0.9975, 1 - 1e-10}) {
        CHECK(norm_quantile(p) == doctest::Approx(oracle::quantile(p)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
}

TEST_CASE("norm_cdf is monotone") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        double a = u(gen), b = u(gen);
        if (a > b) std::swap(a, b);
        if (a < b && !(norm_cdf(a) <= norm_cdf(b))) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("max of two correlated normals") {
    CHECK(std::abs(max2_normal_quantile(0.9975, 1.0) - 2.8070) < 1e-3);
    CHECK(std::abs(max2_normal_quantile(0.9975, 0.0) - 3.0233) < 1e-3);
    CHECK(max2_normal_quantile(0.9975, 0.0) == doctest::Approx(oracle::quantile(std::sqrt(0.9975))).epsilon(1e-9));
    // P(|eta| <= c) = 0.5
    CHECK(max2_normal_quantile(0.5, -1.0) == doctest::Approx(oracle::quantile(0.75)).epsilon(1e-9));
    for (double rho : {-0.9, -0.4, 0.3, 0.8, 0.99}) {
        for (double p : {0.5, 0.95, 0.9975}) {
            const double c = max2_normal_quantile(p, rho);
            CHECK(max2_cdf_oracle(c, rho) == doctest::Approx(p).epsilon(1e-9));
            CHECK(bivariate_diagonal_cdf(c, rho) == doctest::Approx(max2_cdf_oracle(c, rho)).epsilon(1e-10));
        }
    }
}

TEST_CASE("golden-section search") {
    const auto q = golden_minimize([](double x) { return (x - 1.0) * (x - 1.0); }, Interval(0.0, 5.0));
    CHECK(std::abs(q.argument - 1.0) < 1e-8);
    // phi(a / s) / s with a = 1 peaks at s^2 = 1.
    const auto pe = golden_maximize([](double s2) { return oracle::phi(1.0 / std::sqrt(s2)) / std::sqrt(s2); },
                                    Interval(0.2, 5.0));
    CHECK(std::abs(pe.argument - 1.0) < 1e-6);
    const auto deg = golden_minimize([](double x) { return x * x + 3.0; }, Interval(2.0, 2.0));
    CHECK(deg.argument == 2.0);
    CHECK(deg.value == 7.0);
    // Two separated minima: the grid finds the global one.
    const auto two = golden_minimize([](double x) { return std::min((x - 0.5) * (x - 0.5), (x - 4.0) * (x - 4.0) - 0.1); },
                                     Interval(0.0, 5.0));
    CHECK(std::abs(two.argument - 4.0) < 1e-6);
    CHECK_THROWS_AS(golden_minimize([](double) { return std::nan(""); }, Interval(0.0, 1.0)), NumericalError);
}

TEST_CASE("quasi-Newton maximization") {
    Eigen::VectorXd start(2);
    start << 1.0, 1.0;
    const auto r = quasi_newton_maximize(ObjectiveFn([](const Eigen::VectorXd& x) { return -x.squaredNorm(); }), start);
    CHECK(r.argmax.norm() < 1e-8);
    CHECK(r.hessian(0, 0) == doctest::Approx(-2.0).epsilon(1e-5));

    const ObjectiveGradFn rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        if (g) {
            g->resize(2);
            (*g)(0) = 2.0 * a + 400.0 * x(0) * b;
            (*g)(1) = -200.0 * b;
        }
        return -(a * a + 100.0 * b * b);
    };
    Eigen::VectorXd s2(2);
    s2 << -1.2, 1.0;
    QuasiNewtonOptions o;
    o.relative_tol = false;
    o.grad_tol = 1e-9;
    o.max_iterations = 2000;
    const auto rr = quasi_newton_maximize(rosen, s2, o);
    CHECK(std::abs(rr.argmax(0) - 1.0) < 1e-6);
    CHECK(std::abs(rr.argmax(1) - 1.0) < 1e-6);

    // A constant objective has no strict maximum.
    CHECK_THROWS_AS(quasi_newton_maximize(ObjectiveFn([](const Eigen::VectorXd&) { return 3.0; }), start),
                    ConvergenceError);
}

TEST_CASE("numerical derivatives") {
    const ObjectiveFn f = [](const Eigen::VectorXd& x) { return x(0) * x(0) * x(1) + std::sin(x(1)); };
    Eigen::VectorXd x(2);
    x << 0.7, -1.3;
    const Eigen::VectorXd g = numerical_gradient(f, x);
    CHECK(g(0) == doctest::Approx(2 * 0.7 * -1.3).epsilon(1e-8));
    CHECK(g(1) == doctest::Approx(0.49 + std::cos(-1.3)).epsilon(1e-8));
    const Eigen::MatrixXd h = numerical_hessian(f, x);
    CHECK(h(0, 0) == doctest::Approx(-2.6).epsilon(1e-5));
    CHECK(h(0, 1) == doctest::Approx(1.4).epsilon(1e-5));
    CHECK(h(1, 1) == doctest::Approx(-std::sin(-1.3)).epsilon(1e-5));
}

TEST_CASE("seeded streams") {
    CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
    std::set<std::uint64_t> seeds;
    for (std::uint64_t a = 0; a < 20; ++a) {
        for (std::uint64_t b = 0; b < 20; ++b) seeds.insert(derive_seed(0, {a, b}));
    }
    CHECK(seeds.size() == 400);
    Rng r1(5), r2(5);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < 200000; ++i) {
        const double z = r1.normal();
        CHECK_EQ(z, r2.normal());
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / 200000) < 0.01);
    CHECK(std::abs(sq / 200000 - 1.0) < 0.02);
}

TEST_CASE("parallel_for visits every index once") {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
        CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
    }
    CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                        if (i == 5) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
}
