#include "ivbounds/estimate.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ivbounds/error.hpp"
#include "ivbounds/normal.hpp"
#include "ivbounds/rng.hpp"

namespace ivbounds {

namespace {

// One observation's contribution given the conditional index mu and
// log sigma of the conditional error, with its derivatives.
struct CondTerm {
    double ll;
    double d_mu;
    double d_log_sigma;
};

CondTerm conditional_term(ModelKind kind, double y, double mu, double log_sigma) {
    const double sigma = std::exp(log_sigma);
    if (kind == ModelKind::tobit) {
        if (y > 0.0) {
            const double e = (y - mu) / sigma;
            return {-kLogSqrt2Pi - log_sigma - 0.5 * e * e, e / sigma, e * e - 1.0};
        }
        const double a = -mu / sigma;
        const double lambda = inverse_mills(a);
        return {norm_log_cdf(a), -lambda / sigma, -lambda * a};
    }
    const double s = mu / sigma;
    const double q = y > 0.5 ? 1.0 : -1.0;
    const double g = q * inverse_mills(q * s);
    return {norm_log_cdf(q * s), g / sigma, -g * s};
}

void throw_row(const char* who, Eigen::Index i) {
    throw NumericalError(std::string(who) + ": non-finite contribution at row " + std::to_string(i),
                         static_cast<double>(i));
}

// Second-stage log-likelihood; optionally the total score and the per-row
// score matrix (rows = observations).
double second_stage_eval(ModelKind kind, const Eigen::VectorXd& params, const Dataset& d,
                         const Eigen::VectorXd& vhat, Eigen::VectorXd* grad,
                         Eigen::MatrixXd* scores) {
    const Eigen::Index dw = d.dw();
    const Eigen::Index nb = 2 + dw;
    const Eigen::Index k = kind == ModelKind::tobit ? nb + 1 : nb;
    if (params.size() != k) throw std::invalid_argument("second-stage parameter vector has wrong length");
    const double b1 = params(0);
    const auto b2 = params.segment(1, dw);
    const double bv = params(1 + dw);
    const double log_sigma = kind == ModelKind::tobit ? params(nb) : 0.0;
    const Eigen::VectorXd wb = d.w * b2;

    if (grad) grad->setZero(k);
    if (scores) scores->resize(d.n(), k);
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double mu = b1 * d.x(i) + wb(i) + bv * vhat(i);
        const CondTerm t = conditional_term(kind, d.y(i), mu, log_sigma);
        if (!std::isfinite(t.ll)) throw_row(kind == ModelKind::tobit ? "tobit_loglik" : "probit_loglik", i);
        total += t.ll;
        if (grad || scores) {
            Eigen::VectorXd s(k);
            s(0) = t.d_mu * d.x(i);
            s.segment(1, dw) = t.d_mu * d.w.row(i).transpose();
            s(1 + dw) = t.d_mu * vhat(i);
            if (kind == ModelKind::tobit) s(nb) = t.d_log_sigma;
            if (grad) *grad += s;
            if (scores) scores->row(i) = s.transpose();
        }
    }
    return total;
}

// The optimizer rejects non-finite trial points, so evaluation failures map to -inf.
ObjectiveGradFn guarded(ObjectiveGradFn f) {
    return [f = std::move(f)](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
        try {
            return f(p, g);
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
}

QuasiNewtonResult maximize_with_restarts(const ObjectiveGradFn& f, const Eigen::VectorXd& start,
                                         const FitOptions& options, std::uint64_t stream) {
    try {
        return quasi_newton_maximize(f, start, options.optimizer);
    } catch (const ConvergenceError&) {
        if (options.restarts <= 0) throw;
    }
    for (int attempt = 1;; ++attempt) {
        Rng rng(derive_seed(options.seed, {stream, static_cast<std::uint64_t>(attempt)}));
        Eigen::VectorXd s = start;
        for (Eigen::Index i = 0; i < s.size(); ++i) s(i) += 0.1 * (1.0 + std::abs(s(i))) * rng.normal();
        try {
            return quasi_newton_maximize(f, s, options.optimizer);
        } catch (const ConvergenceError&) {
            if (attempt >= options.restarts) throw;
        }
    }
}

double log_cosh(double t) {
    const double a = std::abs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

SecondStageFit fit_second_stage(const Dataset& d, ModelKind kind, const Eigen::VectorXd& vhat,
                                const FitOptions& options, Eigen::VectorXd& params_out) {
    const Eigen::Index dw = d.dw();
    Eigen::MatrixXd r(d.n(), 2 + dw);
    r << d.x, d.w, vhat;
    const Eigen::Index k = kind == ModelKind::tobit ? 3 + dw : 2 + dw;
    Eigen::VectorXd start = Eigen::VectorXd::Zero(k);
    if (kind == ModelKind::tobit) {
        const Eigen::VectorXd b = r.colPivHouseholderQr().solve(d.y);
        start.head(2 + dw) = b;
        const double rss = (d.y - r * b).squaredNorm() / static_cast<double>(d.n());
        start(2 + dw) = 0.5 * std::log(std::max(rss, 1e-8));
    }
    const ObjectiveGradFn f = guarded([&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
        return second_stage_eval(kind, p, d, vhat, g, nullptr);
    });
    const QuasiNewtonResult res = maximize_with_restarts(f, start, options, 1);
    params_out = res.argmax;

    SecondStageFit out;
    out.b1 = res.argmax(0);
    out.b2 = res.argmax.segment(1, dw);
    out.bv = res.argmax(1 + dw);
    out.sigma_e2 = kind == ModelKind::tobit ? std::exp(2.0 * res.argmax(2 + dw)) : 1.0;
    out.loglik = res.value;
    out.iterations = res.iterations;
    return out;
}

}  // namespace

FirstStageFit first_stage(const Dataset& d) {
    const Eigen::MatrixXd q = d.first_stage_design();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(q);
    qr.setThreshold(1e-10);
    if (qr.rank() < q.cols()) {
        throw DataError(DataErrorCode::rank_deficient, "first stage: [z w] is rank deficient");
    }
    const Eigen::VectorXd pi = qr.solve(d.x);
    FirstStageFit fs;
    fs.pi1 = pi.head(d.dz());
    fs.pi2 = pi.tail(d.dw());
    fs.residuals = d.x - q * pi;
    fs.sigma_v2_hat = fs.residuals.squaredNorm() / static_cast<double>(d.n());
    return fs;
}

double tobit_loglik(const Eigen::VectorXd& params, const Dataset& d, const Eigen::VectorXd& vhat,
                    Eigen::VectorXd* grad) {
    return second_stage_eval(ModelKind::tobit, params, d, vhat, grad, nullptr);
}

double probit_loglik(const Eigen::VectorXd& params, const Dataset& d, const Eigen::VectorXd& vhat,
                     Eigen::VectorXd* grad) {
    return second_stage_eval(ModelKind::probit, params, d, vhat, grad, nullptr);
}

double joint_loglik(ModelKind kind, const Eigen::VectorXd& free, const Dataset& d,
                    Eigen::VectorXd* grad) {
    const Eigen::Index dw = d.dw(), dz = d.dz();
    const Eigen::Index p = dz + dw;
    const Eigen::Index base = 1 + dw + p;
    const Eigen::Index k = kind == ModelKind::tobit ? base + 3 : base + 2;
    if (free.size() != k) throw std::invalid_argument("joint_loglik: parameter vector has wrong length");

    const double theta1 = free(0);
    const auto theta2 = free.segment(1, dw);
    const auto pi = free.segment(1 + dw, p);
    const double a = free(base);
    const double t = free(base + 1);
    const double c = kind == ModelKind::tobit ? free(base + 2) : 0.0;
    const double rho = std::tanh(t);
    const double one_minus_rho2 = std::exp(-2.0 * log_cosh(t));
    const double sigma_v = std::exp(a);
    const double sigma_u = std::exp(c);
    const double theta_v = rho * sigma_u / sigma_v;
    const double log_sigma_e = c - log_cosh(t);

    const Eigen::MatrixXd q = d.first_stage_design();
    const Eigen::VectorXd v = d.x - q * pi;
    const Eigen::VectorXd wt = d.w * theta2;

    if (grad) grad->setZero(k);
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double vi = v(i);
        const double zv = vi / sigma_v;
        const double mu = theta1 * d.x(i) + wt(i) + theta_v * vi;
        const CondTerm ct = conditional_term(kind, d.y(i), mu, log_sigma_e);
        const double ll = ct.ll - kLogSqrt2Pi - a - 0.5 * zv * zv;
        if (!std::isfinite(ll)) throw_row("joint_loglik", i);
        total += ll;
        if (!grad) continue;
        Eigen::VectorXd& g = *grad;
        g(0) += ct.d_mu * d.x(i);
        g.segment(1, dw) += ct.d_mu * d.w.row(i).transpose();
        g.segment(1 + dw, p) += (vi / (sigma_v * sigma_v) - ct.d_mu * theta_v) * q.row(i).transpose();
        g(base) += -ct.d_mu * vi * theta_v + zv * zv - 1.0;
        g(base + 1) += ct.d_mu * vi * one_minus_rho2 * sigma_u / sigma_v - ct.d_log_sigma * rho;
        if (kind == ModelKind::tobit) g(base + 2) += ct.d_mu * vi * theta_v + ct.d_log_sigma;
    }
    return total;
}

Eigen::VectorXd joint_free_parameters(const ReducedFormFit& fit) {
    const Eigen::Index dw = fit.dw(), dz = fit.dz();
    const Eigen::Index base = 1 + 2 * dw + dz;
    Eigen::VectorXd free(fit.kind == ModelKind::tobit ? base + 3 : base + 2);
    free << fit.theta1, fit.theta2, fit.pi1, fit.pi2, Eigen::VectorXd::Zero(free.size() - base);
    free(base) = 0.5 * std::log(fit.sigma_v2);
    free(base + 1) = std::atanh(fit.rho_uv());
    if (fit.kind == ModelKind::tobit) free(base + 2) = 0.5 * std::log(fit.sigma_u2);
    return free;
}

ReducedFormFit reduced_form_from_joint(ModelKind kind, const Eigen::VectorXd& free, Eigen::Index dw,
                                       Eigen::Index dz) {
    const Eigen::Index base = 1 + 2 * dw + dz;
    ReducedFormFit fit;
    fit.kind = kind;
    fit.theta1 = free(0);
    fit.theta2 = free.segment(1, dw);
    fit.pi1 = free.segment(1 + dw, dz);
    fit.pi2 = free.segment(1 + dw + dz, dw);
    const double sigma_v = std::exp(free(base));
    const double rho = std::tanh(free(base + 1));
    const double sigma_u = kind == ModelKind::tobit ? std::exp(free(base + 2)) : 1.0;
    fit.sigma_v2 = sigma_v * sigma_v;
    fit.sigma_u2 = kind == ModelKind::tobit ? sigma_u * sigma_u : 1.0;
    fit.sigma_uv = rho * sigma_u * sigma_v;
    return fit;
}

void check_endogeneity(const ReducedFormFit& fit) {
    const double r = fit.rho_uv();
    if (!std::isfinite(r) || std::abs(r) >= 1.0 - 1e-6) {
        throw EstimationError("degenerate endogeneity: |rho_UV| = " + std::to_string(std::abs(r)));
    }
}

ReducedFormFit fit_two_step(const Dataset& d, ModelKind kind, const FitOptions& options) {
    const FirstStageFit fs = first_stage(d);
    const double scale = std::max(1.0, d.x.squaredNorm() / static_cast<double>(d.n()));
    if (!(fs.sigma_v2_hat > 1e-12 * scale)) {
        throw DataError(DataErrorCode::degenerate_first_stage,
                        "first-stage residual variance is zero; x is an exact function of (z, w)");
    }

    Eigen::VectorXd beta;
    const SecondStageFit ss = fit_second_stage(d, kind, fs.residuals, options, beta);

    const Eigen::Index dw = d.dw(), dz = d.dz();
    const Eigen::Index p = dz + dw;
    const Eigen::Index k = beta.size();
    const Eigen::Index dim = p + 1 + k;
    const double s2v = fs.sigma_v2_hat;

    ReducedFormFit fit;
    fit.kind = kind;
    fit.estimator = "two-step";
    fit.loglik = ss.loglik;
    fit.iterations = ss.iterations;
    fit.pi1 = fs.pi1;
    fit.pi2 = fs.pi2;
    fit.sigma_v2 = s2v;
    double sigma_e = 1.0;
    if (kind == ModelKind::tobit) {
        fit.theta1 = ss.b1;
        fit.theta2 = ss.b2;
        fit.sigma_uv = ss.bv * s2v;
        fit.sigma_u2 = ss.sigma_e2 + ss.bv * ss.bv * s2v;
    } else {
        sigma_e = 1.0 / std::sqrt(1.0 + ss.bv * ss.bv * s2v);
        fit.theta1 = ss.b1 * sigma_e;
        fit.theta2 = ss.b2 * sigma_e;
        fit.sigma_uv = ss.bv * sigma_e * s2v;
        fit.sigma_u2 = 1.0;
    }
    check_endogeneity(fit);

    // Stacked moments in gamma = (pi, sigma_v2, beta).
    const Eigen::MatrixXd q = d.first_stage_design();
    Eigen::VectorXd gamma(dim);
    gamma << fs.pi1, fs.pi2, s2v, beta;
    auto moments = [&](const Eigen::VectorXd& g) {
        const Eigen::VectorXd v = d.x - q * g.head(p);
        Eigen::MatrixXd m(d.n(), dim);
        m.leftCols(p) = q.array().colwise() * v.array();
        m.col(p) = v.array().square() - g(p);
        Eigen::MatrixXd sc;
        second_stage_eval(kind, g.tail(k), d, v, nullptr, &sc);
        m.rightCols(k) = sc;
        return m;
    };
    const double n = static_cast<double>(d.n());
    const Eigen::MatrixXd m0 = moments(gamma);
    const Eigen::MatrixXd omega = m0.transpose() * m0 / n;
    Eigen::MatrixXd jac(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(gamma(j)));
        Eigen::VectorXd gp = gamma, gm = gamma;
        gp(j) += h;
        gm(j) -= h;
        jac.col(j) = (moments(gp).colwise().mean() - moments(gm).colwise().mean()).transpose() /
                     (gp(j) - gm(j));
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw EstimationError("two-step covariance: singular moment Jacobian");
    const Eigen::MatrixXd jinv = lu.inverse();
    const Eigen::MatrixXd v_gamma = jinv * omega * jinv.transpose() / n;

    // Delta method from gamma to the packed reduced form.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(fit.size(), dim);
    const Eigen::Index ib1 = p + 1, ibv = p + 2 + dw, ic = p + 3 + dw;
    a.block(fit.index_pi1(), 0, p, p).setIdentity();
    a(fit.index_sigma_v2(), p) = 1.0;
    const double bv = ss.bv;
    if (kind == ModelKind::tobit) {
        a.block(0, ib1, 1 + dw, 1 + dw).setIdentity();
        a(fit.index_sigma_u2(), ic) = 2.0 * ss.sigma_e2;
        a(fit.index_sigma_u2(), ibv) = 2.0 * bv * s2v;
        a(fit.index_sigma_u2(), p) = bv * bv;
        a(fit.index_sigma_uv(), ibv) = s2v;
        a(fit.index_sigma_uv(), p) = bv;
    } else {
        const double se3 = sigma_e * sigma_e * sigma_e;
        const double dse_dbv = -bv * s2v * se3;
        const double dse_ds2v = -0.5 * bv * bv * se3;
        for (Eigen::Index j = 0; j < 1 + dw; ++j) {
            const double bj = beta(j);
            a(j, ib1 + j) = sigma_e;
            a(j, ibv) = bj * dse_dbv;
            a(j, p) = bj * dse_ds2v;
        }
        a(fit.index_sigma_uv(), ibv) = sigma_e * s2v + bv * s2v * dse_dbv;
        a(fit.index_sigma_uv(), p) = bv * sigma_e + bv * s2v * dse_ds2v;
    }
    fit.vcov = symmetrize(a * v_gamma * a.transpose());
    return fit;
}

ReducedFormFit fit_joint_mle(const Dataset& d, ModelKind kind, const FitOptions& options) {
    const ReducedFormFit start_fit = fit_two_step(d, kind, options);
    const Eigen::VectorXd start = joint_free_parameters(start_fit);
    const ObjectiveGradFn f = guarded([&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
        return joint_loglik(kind, p, d, g);
    });
    const QuasiNewtonResult res = maximize_with_restarts(f, start, options, 2);

    const Eigen::Index dw = d.dw(), dz = d.dz();
    ReducedFormFit fit = reduced_form_from_joint(kind, res.argmax, dw, dz);
    fit.estimator = "mle";
    fit.loglik = res.value;
    fit.iterations = res.iterations;
    check_endogeneity(fit);

    const Eigen::MatrixXd v_free = symmetrize((-res.hessian).inverse());
    const Eigen::Index base = 1 + 2 * dw + dz;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(fit.size(), res.argmax.size());
    a.block(0, 0, base, base).setIdentity();
    const double rho = fit.rho_uv();
    const double su = std::sqrt(fit.sigma_u2), sv = std::sqrt(fit.sigma_v2);
    a(fit.index_sigma_v2(), base) = 2.0 * fit.sigma_v2;
    a(fit.index_sigma_uv(), base) = fit.sigma_uv;
    a(fit.index_sigma_uv(), base + 1) = (1.0 - rho * rho) * su * sv;
    if (kind == ModelKind::tobit) {
        a(fit.index_sigma_u2(), base + 2) = 2.0 * fit.sigma_u2;
        a(fit.index_sigma_uv(), base + 2) = fit.sigma_uv;
    }
    fit.vcov = symmetrize(a * v_free * a.transpose());
    return fit;
}

}  // namespace ivbounds
