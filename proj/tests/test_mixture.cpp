#include <doctest.h>

#include <cmath>
#include <random>

#include "ivbounds/bounds.hpp"
#include "ivbounds/error.hpp"
#include "ivbounds/estimate.hpp"
#include "ivbounds/mixture.hpp"
#include "ivbounds/simulate.hpp"
#include "oracle.hpp"

using namespace ivbounds;

namespace {

MixtureParams gaussian_params(const ReducedFormFit& f) {
    MixtureParams p;
    p.theta1 = f.theta1;
    p.theta2 = f.theta2;
    p.pi1 = f.pi1;
    p.pi2 = f.pi2;
    p.weights = {1.0};
    p.means = {Eigen::Vector2d::Zero()};
    Eigen::Matrix2d s;
    s << f.sigma_u2, f.sigma_uv, f.sigma_uv, f.sigma_v2;
    p.covs = {s};
    return p;
}

MixtureParams two_components() {
    MixtureParams p;
    p.theta1 = 1.5;
    p.theta2 = Eigen::VectorXd::Constant(1, 0.4);
    p.pi1 = Eigen::VectorXd::Constant(1, 0.9);
    p.pi2 = Eigen::VectorXd::Constant(1, -0.1);
    p.weights = {0.3, 0.7};
    p.means = {Eigen::Vector2d(0.7, -1.4), Eigen::Vector2d(-0.3, 0.6)};
    Eigen::Matrix2d a, b;
    a << 1.2, -0.4, -0.4, 0.8;
    b << 2.0, 0.5, 0.5, 1.5;
    p.covs = {a, b};
    return p;
}

Dataset tobit_data(std::uint64_t seed, Eigen::Index n = 800) {
    DgpConfig c;
    c.n = n;
    c.rho_star = 0.4;
    return sample(c, seed);
}

}  // namespace

TEST_CASE("single component equals the Gaussian likelihood") {
    const Dataset d = tobit_data(51);
    ReducedFormFit f = population_reduced_form(DgpConfig{.rho_star = 0.4});
    f.theta1 = 1.8;
    f.sigma_uv = -1.1;
    const double mix = mixed_tobit_loglik(gaussian_params(f), d);
    const double joint = joint_loglik(ModelKind::tobit, joint_free_parameters(f), d);
    CHECK(mix == doctest::Approx(joint).epsilon(1e-12));
    CHECK(std::abs(mix - joint) < 1e-10);
}

TEST_CASE("one censored observation by hand") {
    Dataset d;
    d.y = Eigen::VectorXd::Zero(1);
    d.x = Eigen::VectorXd::Zero(1);
    d.w = Eigen::MatrixXd::Zero(1, 1);
    d.z = Eigen::MatrixXd::Zero(1, 1);
    MixtureParams p;
    p.theta1 = 0.0;
    p.theta2 = Eigen::VectorXd::Zero(1);
    p.pi1 = Eigen::VectorXd::Zero(1);
    p.pi2 = Eigen::VectorXd::Zero(1);
    p.weights = {1.0};
    p.means = {Eigen::Vector2d::Zero()};
    p.covs = {Eigen::Matrix2d::Identity()};
    CHECK(mixed_tobit_loglik(p, d) == doctest::Approx(std::log(oracle::phi(0.0) * 0.5)).epsilon(1e-14));
    CHECK(mixed_tobit_loglik(p, d) == doctest::Approx(-1.61209).epsilon(1e-5));
}

TEST_CASE("censored branch against quadrature") {
    const MixtureParams p = two_components();
    const Dataset d = tobit_data(52, 60);
    double oracle_ll = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double xb = p.theta1 * d.x(i) + p.theta2(0) * d.w(i, 0);
        const double v = d.x(i) - p.pi1(0) * d.z(i, 0) - p.pi2(0) * d.w(i, 0);
        double f = 0.0;
        for (int c = 0; c < 2; ++c) {
            f += p.weights[c] * (d.y(i) > 0.0 ? oracle::biv_pdf(d.y(i) - xb, v, p.means[c], p.covs[c])
                                              : oracle::censored_mass(-xb, v, p.means[c], p.covs[c]));
        }
        oracle_ll += std::log(f);
    }
    CHECK(std::abs(mixed_tobit_loglik(p, d) - oracle_ll) < 1e-8);
}

TEST_CASE("parameterization") {
    const MixtureParams p = two_components();
    CHECK(mixture_free_size(2, 1, 1) == 1 + 2 + 1 + 3 + 6);
    const Eigen::VectorXd free = mixture_to_free(p);
    CHECK(free.size() == mixture_free_size(2, 1, 1));
    const MixtureParams back = mixture_from_free(free, 2, 1, 1);
    CHECK((mixture_natural(back) - mixture_natural(p)).lpNorm<Eigen::Infinity>() < 1e-12);

    std::mt19937_64 gen(53);
    std::normal_distribution<double> nrm(0.0, 1.0);
    for (int r = 0; r < 50; ++r) {
        Eigen::VectorXd x(mixture_free_size(3, 1, 1));
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = nrm(gen);
        const MixtureParams m = mixture_from_free(x, 3, 1, 1);
        Eigen::Vector2d centre = Eigen::Vector2d::Zero();
        double total = 0.0;
        for (int c = 0; c < 3; ++c) {
            centre += m.weights[c] * m.means[c];
            total += m.weights[c];
            CHECK(m.covs[c].determinant() > 0.0);
        }
        CHECK(centre.lpNorm<Eigen::Infinity>() < 1e-10);
        CHECK(std::abs(total - 1.0) < 1e-14);
    }

    MixtureParams bad = p;
    bad.means[0](0) += 0.1;
    CHECK_THROWS_AS(bad.check(), std::invalid_argument);
}

TEST_CASE("component order does not matter") {
    const MixtureParams p = two_components();
    MixtureParams q = p;
    std::swap(q.weights[0], q.weights[1]);
    std::swap(q.means[0], q.means[1]);
    std::swap(q.covs[0], q.covs[1]);
    const Dataset d = tobit_data(54);
    CHECK(mixed_tobit_loglik(p, d) == doctest::Approx(mixed_tobit_loglik(q, d)).epsilon(1e-13));
}

TEST_CASE("analytic score") {
    const Dataset d = tobit_data(55, 300);
    std::mt19937_64 gen(56);
    std::normal_distribution<double> nrm(0.0, 0.3);
    for (int r = 0; r < 10; ++r) {
        const int k = 1 + r % 3;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(mixture_free_size(k, 1, 1));
        x(0) = 2.0;
        x(1) = 1.0;
        x(2) = 1.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += nrm(gen);
        Eigen::VectorXd g;
        mixture_loglik_free(x, k, d, &g);
        const Eigen::VectorXd n =
            oracle::central_gradient([&](const Eigen::VectorXd& p) { return mixture_loglik_free(p, k, d); }, x);
        CHECK(oracle::gradient_error(g, n) < 1e-5);
    }
}

TEST_CASE("fitting") {
    const Dataset small = tobit_data(57, 200);
    try {
        fit_mixture(small, 3);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(e.code() == DataErrorCode::too_few_rows);
    }

    DgpConfig m;
    m.n = 3000;
    m.mixture = MixtureSpec{{{0.5, 1.2, 0.8, 0.2}, {0.5, -1.2, 0.8, -0.2}}, {{1.0, 0.0, 0.7}}};
    const Dataset d = sample(m, 58);
    MixtureOptions o1;
    o1.starts = 4;
    o1.seed = 3;
    o1.threads = 1;
    MixtureOptions o4 = o1;
    o4.threads = 4;
    const MixtureFit a = fit_mixture(d, 2, o1);
    const MixtureFit b = fit_mixture(d, 2, o4);
    CHECK(a.loglik == b.loglik);
    CHECK(a.free == b.free);
    CHECK(a.start_index == b.start_index);
    CHECK(a.loglik > fit_mixture(d, 1).loglik);
    CHECK(a.natural_vcov.rows() == mixture_natural(a.params).size());
    CHECK(std::abs(a.params.theta1 - 2.0) < 0.3);
}

TEST_CASE("mixture identified set") {
    const ReducedFormFit f = population_reduced_form(DgpConfig{});
    const Interval one = mixture_sigma_ustar_interval(gaussian_params(f));
    CHECK(one.lo == sigma_ustar_interval(f).interval.lo);
    CHECK(one.hi == f.sigma_u2);

    MixtureParams p = gaussian_params(f);
    p.weights = {0.5, 0.5};
    p.means = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    Eigen::Matrix2d a, b;
    a << 5.0, -2.0, -2.0, 2.0;
    b << 0.1, 0.0, 0.0, 2.0;
    p.covs = {a, b};
    CHECK_THROWS_AS(mixture_sigma_ustar_interval(p), EmptyIntersectionError);
}
