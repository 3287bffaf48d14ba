#include "ivbounds/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ivbounds/error.hpp"

namespace ivbounds {

namespace {

void check_reduced_form(double sigma_u2, double sigma_v2, double sigma_uv) {
    if (!(sigma_u2 > 0.0) || !(sigma_v2 > 0.0)) {
        throw std::invalid_argument("reduced-form variances must be positive");
    }
    if (!(sigma_uv * sigma_uv < sigma_u2 * sigma_v2)) {
        throw std::invalid_argument("|rho_UV| must be below 1");
    }
}

double xi1_denominator(double theta1, double sigma_u2, double sigma_v2, double sigma_uv) {
    return sigma_v2 * theta1 * theta1 + 2.0 * sigma_uv * theta1 + sigma_u2;
}

}  // namespace

double xi1_value(double theta1, double sigma_u2, double sigma_v2, double sigma_uv) {
    const double num = theta1 * sigma_uv + sigma_u2;
    return num * num / xi1_denominator(theta1, sigma_u2, sigma_v2, sigma_uv);
}

SigmaUstarSet sigma_ustar_interval(double theta1, double sigma_u2, double sigma_v2, double sigma_uv) {
    check_reduced_form(sigma_u2, sigma_v2, sigma_uv);
    if (theta1 == 0.0) return {Interval(sigma_u2, sigma_u2), sigma_u2, sigma_u2};
    const double den = xi1_denominator(theta1, sigma_u2, sigma_v2, sigma_uv);
    if (!(den > 0.0)) throw std::invalid_argument("sigma_ustar_interval: non-positive xi1 denominator");
    const double num = theta1 * sigma_uv + sigma_u2;
    const double xi1 = num * num / den;
    const double xi2 = sigma_u2 - theta1 * theta1 * sigma_v2;
    // xi1 <= sigma_u2 analytically; guard against rounding at |rho| near 1.
    const double lo = std::min(std::max(xi1, xi2), sigma_u2);
    return {Interval(lo, sigma_u2), xi1, xi2};
}

SigmaUstarSet sigma_ustar_interval(const ReducedFormFit& fit) {
    return sigma_ustar_interval(fit.theta1, fit.sigma_u2, fit.sigma_v2, fit.sigma_uv);
}

double epsilon_upper(double theta1, double sigma_u2, double sigma_v2, double sigma_uv) {
    check_reduced_form(sigma_u2, sigma_v2, sigma_uv);
    const double den = xi1_denominator(theta1, sigma_u2, sigma_v2, sigma_uv);
    return std::min((sigma_u2 * sigma_v2 - sigma_uv * sigma_uv) / den, sigma_v2);
}

StructuralParams implied_structural_unchecked(double sigma_ustar2, double theta1, double sigma_u2,
                                              double sigma_v2, double sigma_uv) {
    StructuralParams s;
    const double gap = sigma_u2 - sigma_ustar2;
    s.sigma_ustar2 = sigma_ustar2;
    s.sigma_eps2 = gap / (theta1 * theta1);
    s.sigma_vstar2 = sigma_v2 - s.sigma_eps2;
    s.sigma_ustar_vstar = sigma_uv + gap / theta1;
    return s;
}

StructuralParams implied_structural(double sigma_ustar2, double theta1, double sigma_u2,
                                    double sigma_v2, double sigma_uv) {
    if (theta1 == 0.0) {
        throw std::invalid_argument("implied_structural: sigma_eps2 is not identified when theta1 = 0");
    }
    const SigmaUstarSet set = sigma_ustar_interval(theta1, sigma_u2, sigma_v2, sigma_uv);
    const double tol = 1e-12 * std::max(1.0, sigma_u2);
    if (sigma_ustar2 < set.interval.lo - tol || sigma_ustar2 > set.interval.hi + tol) {
        throw std::invalid_argument("implied_structural: sigma_ustar2 = " + std::to_string(sigma_ustar2) +
                                    " lies outside the identified set");
    }
    return implied_structural_unchecked(sigma_ustar2, theta1, sigma_u2, sigma_v2, sigma_uv);
}

ComponentVariances forward_map(const StructuralParams& s, double theta1) {
    ComponentVariances c;
    c.sigma_u2 = s.sigma_ustar2 + theta1 * theta1 * s.sigma_eps2;
    c.sigma_v2 = s.sigma_vstar2 + s.sigma_eps2;
    c.sigma_uv = s.sigma_ustar_vstar - theta1 * s.sigma_eps2;
    return c;
}

Interval intersect_component_intervals(const std::vector<ComponentVariances>& components,
                                       double theta1) {
    if (components.empty()) throw std::invalid_argument("intersect_component_intervals: no components");
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& c : components) {
        const SigmaUstarSet s = sigma_ustar_interval(theta1, c.sigma_u2, c.sigma_v2, c.sigma_uv);
        lo = std::max(lo, s.interval.lo);
        hi = std::min(hi, s.interval.hi);
    }
    if (lo > hi) {
        throw EmptyIntersectionError("mixture components incompatible (misspecification or sampling noise): "
                                     "lower bound " + std::to_string(lo) + " exceeds upper bound " +
                                     std::to_string(hi));
    }
    return Interval(lo, hi);
}

}  // namespace ivbounds
