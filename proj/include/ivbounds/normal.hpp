#pragma once

// Univariate and bivariate normal primitives.

#include <Eigen/Dense>

namespace ivbounds {

struct NormalParams {
    double mean = 0.0;
    double variance = 1.0;

    double pdf(double x) const;
    double cdf(double x) const;
};

struct BivariateNormalParams {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();

    // Symmetric and PSD up to 1e-12 on the eigenvalues.
    bool valid() const;
    double log_pdf(const Eigen::Vector2d& x) const;
};

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double norm_pdf(double x);
double norm_log_pdf(double x);
double norm_cdf(double x);
// log Phi(x), accurate far into the lower tail.
double norm_log_cdf(double x);
// phi(x) / Phi(x) without overflow for very negative x.
double inverse_mills(double x);

// Throws std::domain_error unless 0 < p < 1.
double norm_quantile(double p);

// P(eta1 <= c, eta2 <= c) for standard bivariate normals with correlation rho.
double bivariate_diagonal_cdf(double c, double rho);

// c such that P(max(eta1, eta2) <= c) = p, eta standard bivariate normal
// with correlation rho in [-1, 1].
double max2_normal_quantile(double p, double rho);

}  // namespace ivbounds
