#pragma once

// Reference computations for the tests. Nothing here calls the library.

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double phi(double x) { return boost::math::pdf(boost::math::normal_distribution<double>(), x); }
inline double Phi(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }
inline double quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double biv_pdf(double u, double v, const Eigen::Vector2d& mu, const Eigen::Matrix2d& s) {
    const double du = u - mu(0), dv = v - mu(1);
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(0, 1);
    const double q = (s(1, 1) * du * du - 2.0 * s(0, 1) * du * dv + s(0, 0) * dv * dv) / det;
    return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

// Integral of biv_pdf(u, v) over u in (-inf, b).
inline double censored_mass(double b, double v, const Eigen::Vector2d& mu, const Eigen::Matrix2d& s) {
    auto f = [&](double u) { return biv_pdf(u, v, mu, s); };
    using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
    return Q::integrate(f, -std::numeric_limits<double>::infinity(), b, 20, 1e-14);
}

inline Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double rel = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = rel * (1.0 + std::abs(x(i)));
        Eigen::VectorXd a = x, b = x;
        a(i) += h;
        b(i) -= h;
        g(i) = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

// max |a - b| / max(1, max |b|)
inline double gradient_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    return (analytic - numeric).lpNorm<Eigen::Infinity>() / std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
}

// Identified set for sigma_ustar2 by brute force: the structural triple at
// s is admissible iff all variances are non-negative and Cauchy-Schwarz holds.
struct Structural {
    double su2, sv2, suv, se2;
};

inline Structural structural_at(double s, double theta1, double su2, double sv2, double suv) {
    const double se2 = (su2 - s) / (theta1 * theta1);
    return {s, sv2 - se2, suv + theta1 * se2, se2};
}

inline bool admissible(const Structural& t, double tol = 0.0) {
    return t.su2 >= -tol && t.sv2 >= -tol && t.se2 >= -tol && t.suv * t.suv <= t.su2 * t.sv2 + tol;
}

}  // namespace oracle
