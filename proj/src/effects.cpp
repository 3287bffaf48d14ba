#include "ivbounds/effects.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivbounds/normal.hpp"
#include "ivbounds/optimize.hpp"

namespace ivbounds {

namespace {

void check_index(Eigen::Index j, Eigen::Index size) {
    if (j < 0 || j >= size) {
        throw std::invalid_argument("covariate index " + std::to_string(j) + " out of range");
    }
}

EffectBounds from_candidates(const std::vector<double>& points, const std::vector<double>& values,
                             double naive) {
    EffectBounds b;
    b.naive = naive;
    b.lower = b.upper = values[0];
    b.argmin_sigma2 = b.argmax_sigma2 = points[0];
    for (std::size_t k = 1; k < points.size(); ++k) {
        if (values[k] < b.lower) {
            b.lower = values[k];
            b.argmin_sigma2 = points[k];
        }
        if (values[k] > b.upper) {
            b.upper = values[k];
            b.argmax_sigma2 = points[k];
        }
    }
    return b;
}

}  // namespace

double pe_tobit_mean(const Eigen::VectorXd& h, Eigen::Index j, const Eigen::VectorXd& theta,
                     double sigma_ustar2) {
    check_index(j, theta.size());
    if (!(sigma_ustar2 >= 0.0)) throw std::invalid_argument("pe_tobit_mean: sigma_ustar2 must be non-negative");
    const double a = theta.dot(h);
    if (sigma_ustar2 == 0.0) return (a > 0.0 ? 1.0 : a < 0.0 ? 0.0 : 0.5) * theta(j);
    return norm_cdf(a / std::sqrt(sigma_ustar2)) * theta(j);
}

double pe_probability(const Eigen::VectorXd& h, Eigen::Index j, const Eigen::VectorXd& theta,
                      double sigma_ustar2) {
    check_index(j, theta.size());
    if (!(sigma_ustar2 >= 0.0)) throw std::invalid_argument("pe_probability: sigma_ustar2 must be non-negative");
    const double a = theta.dot(h);
    if (sigma_ustar2 == 0.0) {
        if (a != 0.0 || theta(j) == 0.0) return 0.0;
        return std::copysign(std::numeric_limits<double>::infinity(), theta(j));
    }
    const double s = std::sqrt(sigma_ustar2);
    return norm_pdf(a / s) * theta(j) / s;
}

Eigen::VectorXd ape_index(const ReducedFormFit& fit, const Dataset& d) {
    return fit.theta1 * (d.z * fit.pi1) + d.w * (fit.theta1 * fit.pi2 + fit.theta2);
}

double ape_scale2(const ReducedFormFit& fit, double sigma_ustar2) {
    return 2.0 * sigma_ustar2 - fit.sigma_u2 + fit.theta1 * fit.theta1 * fit.sigma_v2;
}

Eigen::VectorXd ape_terms(EffectKind kind, const ReducedFormFit& fit, const Dataset& d, Eigen::Index j,
                          double sigma_ustar2) {
    const Eigen::VectorXd theta = fit.theta();
    check_index(j, theta.size());
    const double s2 = ape_scale2(fit, sigma_ustar2);
    if (!(s2 > 0.0)) {
        throw std::invalid_argument("APE: 2 sigma_ustar2 - sigma_u2 + theta1^2 sigma_v2 must be positive");
    }
    const double s = std::sqrt(s2);
    const Eigen::VectorXd idx = ape_index(fit, d) / s;
    Eigen::VectorXd out(idx.size());
    if (kind == EffectKind::ape_tobit_mean) {
        for (Eigen::Index i = 0; i < idx.size(); ++i) out(i) = norm_cdf(idx(i)) * theta(j);
    } else if (kind == EffectKind::ape_probability) {
        for (Eigen::Index i = 0; i < idx.size(); ++i) out(i) = norm_pdf(idx(i)) * theta(j) / s;
    } else {
        throw std::invalid_argument("ape_terms: not an average effect kind");
    }
    return out;
}

double ape_tobit_mean(const ReducedFormFit& fit, const Dataset& d, Eigen::Index j, double sigma_ustar2) {
    return ape_terms(EffectKind::ape_tobit_mean, fit, d, j, sigma_ustar2).mean();
}

double ape_probability(const ReducedFormFit& fit, const Dataset& d, Eigen::Index j, double sigma_ustar2) {
    return ape_terms(EffectKind::ape_probability, fit, d, j, sigma_ustar2).mean();
}

double effect_value(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                    double sigma_ustar2) {
    switch (query.kind) {
        case EffectKind::pe_tobit_mean:
            return pe_tobit_mean(query.h, query.covariate_index, fit.theta(), sigma_ustar2);
        case EffectKind::pe_probability:
            return pe_probability(query.h, query.covariate_index, fit.theta(), sigma_ustar2);
        case EffectKind::ape_tobit_mean:
        case EffectKind::ape_probability:
            if (!d) throw std::invalid_argument("average partial effects need the estimation sample");
            return ape_terms(query.kind, fit, *d, query.covariate_index, sigma_ustar2).mean();
    }
    return 0.0;
}

EffectBounds pe_bounds(const EffectQuery& query, const ReducedFormFit& fit, const Interval& interval) {
    if (is_average(query.kind)) throw std::invalid_argument("pe_bounds: query is an average effect");
    std::vector<double> points{interval.lo, interval.hi};
    if (query.kind == EffectKind::pe_probability) {
        const double a = fit.theta().dot(query.h);
        if (interval.contains(a * a)) points.push_back(a * a);
    }
    std::vector<double> values;
    for (double s : points) values.push_back(effect_value(query, fit, nullptr, s));
    return from_candidates(points, values, effect_value(query, fit, nullptr, fit.sigma_u2));
}

EffectBounds ape_bounds(EffectKind kind, const ReducedFormFit& fit, const Dataset& d, Eigen::Index j,
                        const Interval& interval) {
    if (!is_average(kind)) throw std::invalid_argument("ape_bounds: query is not an average effect");
    check_index(j, 1 + fit.dw());
    const Eigen::VectorXd idx = ape_index(fit, d);
    const double theta_j = fit.theta()(j);
    auto f = [&](double s2) {
        const double scale2 = ape_scale2(fit, s2);
        if (!(scale2 > 0.0)) throw std::invalid_argument("APE scale is not positive inside the interval");
        const double s = std::sqrt(scale2);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < idx.size(); ++i) {
            acc += kind == EffectKind::ape_tobit_mean ? norm_cdf(idx(i) / s) : norm_pdf(idx(i) / s) / s;
        }
        return acc / static_cast<double>(idx.size()) * theta_j;
    };
    const ScalarOptimum lo = golden_minimize(f, interval);
    const ScalarOptimum hi = golden_maximize(f, interval);
    EffectBounds b;
    b.lower = lo.value;
    b.upper = hi.value;
    b.argmin_sigma2 = lo.argument;
    b.argmax_sigma2 = hi.argument;
    b.naive = f(fit.sigma_u2);
    return b;
}

EffectBounds effect_bounds(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                           const Interval& interval) {
    if (!is_average(query.kind)) return pe_bounds(query, fit, interval);
    if (!d) throw std::invalid_argument("average partial effects need the estimation sample");
    return ape_bounds(query.kind, fit, *d, query.covariate_index, interval);
}

}  // namespace ivbounds
