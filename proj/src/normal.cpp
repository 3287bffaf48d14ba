#include "ivbounds/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ivbounds {

namespace {

constexpr double kSqrt1_2 = 0.70710678118654752440;

// Lower-tail quantile for 0 < p <= 0.5: Acklam's rational start, then
// Halley steps against erfc.
double lower_quantile(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};

    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    for (int it = 0; it < 3; ++it) {
        const double e = norm_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x = x - u / (1.0 + 0.5 * x * u);
    }
    return x;
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double NormalParams::pdf(double x) const {
    const double sd = std::sqrt(variance);
    return norm_pdf((x - mean) / sd) / sd;
}

double NormalParams::cdf(double x) const {
    return norm_cdf((x - mean) / std::sqrt(variance));
}

bool BivariateNormalParams::valid() const {
    if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * (1.0 + std::abs(cov(0, 1)))) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    return es.eigenvalues().minCoeff() >= -1e-12;
}

double BivariateNormalParams::log_pdf(const Eigen::Vector2d& x) const {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    const Eigen::Vector2d e = x - mean;
    const double quad =
        (cov(1, 1) * e(0) * e(0) - 2.0 * cov(0, 1) * e(0) * e(1) + cov(0, 0) * e(1) * e(1)) /
        det;
    return -2.0 * kLogSqrt2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_log_pdf(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kSqrt1_2); }

double norm_log_cdf(double x) {
    if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kSqrt1_2));
    if (x > -30.0) return std::log(0.5 * std::erfc(-x * kSqrt1_2));
    // Asymptotic series of the Mills ratio.
    const double z2 = 1.0 / (x * x);
    const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
    return norm_log_pdf(x) - std::log(-x) + std::log(series);
}

double inverse_mills(double x) {
    if (x > -30.0) return norm_pdf(x) / norm_cdf(x);
    return std::exp(norm_log_pdf(x) - norm_log_cdf(x));
}

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("norm_quantile: probability must lie in (0, 1)");
    }
    if (p > 0.5) return -lower_quantile(1.0 - p);
    return lower_quantile(p);
}

double bivariate_diagonal_cdf(double c, double rho) {
    // Plackett's identity with r = sin(t) removes the endpoint singularity:
    // Phi2(c, c; rho) = Phi(c)^2 + (1/2pi) * int_0^asin(rho) exp(-c^2 / (1 + sin t)) dt.
    rho = std::clamp(rho, -1.0, 1.0);
    const double base = norm_cdf(c);
    if (rho == 1.0) return base;
    if (rho == -1.0) return std::max(0.0, 2.0 * base - 1.0);
    const double upper = std::asin(rho);
    if (upper == 0.0) return base * base;
    const double c2 = c * c;
    auto integrand = [c2](double t) {
        const double s = 1.0 + std::sin(t);
        if (s <= 0.0) return 0.0;
        return std::exp(-c2 / s);
    };
    const double integral = integrate(integrand, 0.0, upper, 1e-15);
    const double value = base * base + integral / (2.0 * std::numbers::pi);
    return std::clamp(value, 0.0, 1.0);
}

double max2_normal_quantile(double p, double rho) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("max2_normal_quantile: probability must lie in (0, 1)");
    }
    if (!(rho >= -1.0 - 1e-12 && rho <= 1.0 + 1e-12)) {
        throw std::domain_error("max2_normal_quantile: correlation must lie in [-1, 1]");
    }
    rho = std::clamp(rho, -1.0, 1.0);
    if (rho == 1.0) return norm_quantile(p);
    if (rho == -1.0) return norm_quantile(0.5 * (1.0 + p));

    // Phi2(c,c) <= Phi(c) and Phi2(c,c) >= 2 Phi(c) - 1 bracket the root.
    double lo = norm_quantile(p);
    double hi = norm_quantile(0.5 * (1.0 + p));
    const double slope_factor = std::sqrt((1.0 - rho) / (1.0 + rho));
    double c = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double f = bivariate_diagonal_cdf(c, rho) - p;
        if (f > 0.0) {
            hi = c;
        } else {
            lo = c;
        }
        if (hi - lo < 1e-13) break;
        const double deriv = 2.0 * norm_pdf(c) * norm_cdf(c * slope_factor);
        double next = c - f / deriv;
        if (!(deriv > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - c) < 1e-14 * (1.0 + std::abs(c))) {
            c = next;
            break;
        }
        c = next;
    }
    return c;
}

}  // namespace ivbounds
