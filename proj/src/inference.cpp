#include "ivbounds/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "ivbounds/bounds.hpp"
#include "ivbounds/effects.hpp"
#include "ivbounds/error.hpp"
#include "ivbounds/normal.hpp"
#include "ivbounds/optimize.hpp"

namespace ivbounds {

namespace {

void require_vcov(const ReducedFormFit& fit) {
    if (!fit.has_vcov()) throw std::invalid_argument("the fit carries no covariance matrix");
}

double quadratic_form(const Eigen::VectorXd& g, const Eigen::MatrixXd& v) {
    const double q = g.dot(v * g);
    if (q < -1e-12) throw NumericalError("delta method: negative variance estimate", q);
    return std::max(q, 0.0);
}

// Variance of a sample mean of `terms`.
double mean_variance(const Eigen::VectorXd& terms) {
    const double n = static_cast<double>(terms.size());
    if (n < 2) return 0.0;
    return (terms.array() - terms.mean()).square().sum() / (n - 1.0) / n;
}

}  // namespace

void BonferroniConfig::check() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (!(alpha1 > 0.0 && alpha1 < alpha)) throw std::invalid_argument("alpha1 must lie in (0, alpha)");
}

Eigen::VectorXd delta_gradient(const std::function<double(const Eigen::VectorXd&)>& g,
                               const Eigen::VectorXd& at) {
    Eigen::VectorXd grad(at.size());
    Eigen::VectorXd p = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        const double h = 1e-5 * (1.0 + std::abs(at(i)));
        p(i) = at(i) + h;
        const double up = g(p);
        p(i) = at(i) - h;
        const double down = g(p);
        p(i) = at(i);
        grad(i) = (up - down) / (2.0 * h);
    }
    return grad;
}

double delta_se(const std::function<double(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& at,
                const Eigen::MatrixXd& vcov) {
    return std::sqrt(quadratic_form(delta_gradient(g, at), vcov));
}

SigmaUstarCi ci_sigma_ustar2_detail(const ReducedFormFit& fit, const BonferroniConfig& cfg) {
    cfg.check();
    require_vcov(fit);
    const Eigen::VectorXd p = fit.packed();
    const Eigen::Index it = fit.index_theta1(), iu = fit.index_sigma_u2(), iv = fit.index_sigma_v2(),
                       iuv = fit.index_sigma_uv();
    auto xi1 = [=](const Eigen::VectorXd& q) { return xi1_value(q(it), q(iu), q(iv), q(iuv)); };
    auto xi2 = [=](const Eigen::VectorXd& q) { return q(iu) - q(it) * q(it) * q(iv); };

    SigmaUstarCi out;
    out.se_sigma_u2 = std::sqrt(std::max(0.0, fit.vcov(iu, iu)));
    const Eigen::VectorXd g1 = delta_gradient(xi1, p);
    const Eigen::VectorXd g2 = delta_gradient(xi2, p);
    out.se_xi1 = std::sqrt(quadratic_form(g1, fit.vcov));
    out.se_xi2 = std::sqrt(quadratic_form(g2, fit.vcov));
    if (out.se_xi1 > 0.0 && out.se_xi2 > 0.0) {
        out.rho_xi = std::clamp(g1.dot(fit.vcov * g2) / (out.se_xi1 * out.se_xi2), -1.0, 1.0);
    }
    const double z = norm_quantile(1.0 - cfg.alpha1 / 2.0);
    out.critical = max2_normal_quantile(1.0 - cfg.alpha1 / 2.0, out.rho_xi);

    const SigmaUstarSet set = sigma_ustar_interval(fit);
    double lo = std::max(set.xi1 - out.critical * out.se_xi1, set.xi2 - out.critical * out.se_xi2);
    lo = std::min(lo, set.interval.lo);
    if (lo < 0.0) {
        lo = 0.0;
        out.clamped = true;
    }
    out.ci = Interval(lo, fit.sigma_u2 + z * out.se_sigma_u2);
    return out;
}

Interval ci_sigma_ustar2(const ReducedFormFit& fit, const BonferroniConfig& cfg) {
    return ci_sigma_ustar2_detail(fit, cfg).ci;
}

double effect_se(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                 double sigma_ustar2) {
    require_vcov(fit);
    auto g = [&](const Eigen::VectorXd& q) {
        return effect_value(query, fit.with_packed(q), d, sigma_ustar2);
    };
    double var = quadratic_form(delta_gradient(g, fit.packed()), fit.vcov);
    if (is_average(query.kind)) {
        var += mean_variance(ape_terms(query.kind, fit, *d, query.covariate_index, sigma_ustar2));
    }
    return std::sqrt(var);
}

Interval ci_effect(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                   const BonferroniConfig& cfg) {
    return ci_effect(query, fit, d, cfg, ci_sigma_ustar2(fit, cfg));
}

Interval ci_effect(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                   const BonferroniConfig& cfg, const Interval& sigma_ci) {
    cfg.check();
    require_vcov(fit);
    if (is_average(query.kind) && !d) {
        throw std::invalid_argument("average partial effects need the estimation sample");
    }
    const double z = norm_quantile(1.0 - (cfg.alpha - cfg.alpha1) / 2.0);

    // Effects need a positive variance, and the APE a positive index scale
    // under small perturbations of the parameters.
    double floor = 1e-6 * fit.sigma_u2;
    if (is_average(query.kind)) {
        const double xi2 = fit.sigma_u2 - fit.theta1 * fit.theta1 * fit.sigma_v2;
        floor = std::max(floor, 0.5 * xi2 + 1e-3 * fit.sigma_u2);
    }
    const Interval domain(std::min(std::max(sigma_ci.lo, floor), sigma_ci.hi), sigma_ci.hi);

    // The extremizers of the point bounds are always evaluated, so the
    // interval contains [LB, UB] whenever they fall inside the domain.
    const EffectBounds eb = effect_bounds(query, fit, d, sigma_ustar_interval(fit).interval);
    const std::array<double, 2> extra{eb.argmin_sigma2, eb.argmax_sigma2};

    auto lower = [&](double s) { return effect_value(query, fit, d, s) - z * effect_se(query, fit, d, s); };
    auto upper = [&](double s) { return effect_value(query, fit, d, s) + z * effect_se(query, fit, d, s); };
    const double lo = golden_minimize(lower, domain, 1e-8, extra).value;
    const double hi = golden_maximize(upper, domain, 1e-8, extra).value;
    return Interval(lo, hi);
}

Interval naive_ci(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                  const BonferroniConfig& cfg) {
    cfg.check();
    require_vcov(fit);
    const Eigen::Index iu = fit.index_sigma_u2();
    auto g = [&](const Eigen::VectorXd& q) {
        return effect_value(query, fit.with_packed(q), d, q(iu));
    };
    double var = quadratic_form(delta_gradient(g, fit.packed()), fit.vcov);
    if (is_average(query.kind)) {
        var += mean_variance(ape_terms(query.kind, fit, *d, query.covariate_index, fit.sigma_u2));
    }
    const double z = norm_quantile(1.0 - cfg.alpha / 2.0);
    const double e = effect_value(query, fit, d, fit.sigma_u2);
    const double half = z * std::sqrt(var);
    return Interval(e - half, e + half);
}

}  // namespace ivbounds
