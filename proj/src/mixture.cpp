#include "ivbounds/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "ivbounds/error.hpp"
#include "ivbounds/estimate.hpp"
#include "ivbounds/normal.hpp"
#include "ivbounds/parallel.hpp"
#include "ivbounds/rng.hpp"

namespace ivbounds {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

struct Component {
    double p, log_p;
    Eigen::Vector2d mu;
    double l11, l21, l22;
    double zeta, kappa, omega;  // sigma_U^2, sigma_UV, sigma_V^2
    Eigen::Matrix2d inv;
    double log_det;
    double beta, s;  // E[U|V] slope and conditional SD
};

struct Unpacked {
    double theta1;
    Eigen::VectorXd theta2, pi;
    std::vector<Component> comps;
};

Unpacked unpack(const Eigen::VectorXd& free, int k, Eigen::Index dw, Eigen::Index dz) {
    if (k < 1) throw std::invalid_argument("mixture: K must be at least 1");
    if (free.size() != mixture_free_size(k, dw, dz)) {
        throw std::invalid_argument("mixture: parameter vector has wrong length");
    }
    Unpacked u;
    Eigen::Index pos = 0;
    u.theta1 = free(pos++);
    u.theta2 = free.segment(pos, dw);
    pos += dw;
    u.pi = free.segment(pos, dz + dw);
    pos += dz + dw;

    std::vector<double> logits(static_cast<std::size_t>(k), 0.0);
    for (int c = 0; c + 1 < k; ++c) logits[c] = free(pos++);
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - top);
    const double log_denom = top + std::log(denom);

    u.comps.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        u.comps[c].log_p = logits[c] - log_denom;
        u.comps[c].p = std::exp(u.comps[c].log_p);
    }
    Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
    for (int c = 0; c + 1 < k; ++c) {
        u.comps[c].mu = free.segment<2>(pos);
        pos += 2;
        weighted += u.comps[c].p * u.comps[c].mu;
    }
    u.comps[k - 1].mu = -weighted / u.comps[k - 1].p;
    for (int c = 0; c < k; ++c) {
        Component& m = u.comps[c];
        m.l11 = std::exp(free(pos));
        m.l21 = free(pos + 1);
        m.l22 = std::exp(free(pos + 2));
        m.log_det = 2.0 * (free(pos) + free(pos + 2));
        pos += 3;
        m.zeta = m.l11 * m.l11;
        m.kappa = m.l11 * m.l21;
        m.omega = m.l21 * m.l21 + m.l22 * m.l22;
        const double det = m.l11 * m.l11 * m.l22 * m.l22;
        m.inv << m.omega / det, -m.kappa / det, -m.kappa / det, m.zeta / det;
        m.beta = m.kappa / m.omega;
        m.s = m.l11 * m.l22 / std::sqrt(m.omega);
    }
    return u;
}

}  // namespace

Eigen::VectorXd MixtureParams::theta() const {
    Eigen::VectorXd t(1 + theta2.size());
    t << theta1, theta2;
    return t;
}

void MixtureParams::check() const {
    const int kk = k();
    if (kk < 1 || means.size() != weights.size() || covs.size() != weights.size()) {
        throw std::invalid_argument("mixture: inconsistent component counts");
    }
    double total = 0.0;
    Eigen::Vector2d centre = Eigen::Vector2d::Zero();
    for (int c = 0; c < kk; ++c) {
        if (!(weights[c] > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
        total += weights[c];
        centre += weights[c] * means[c];
        const Eigen::Matrix2d& s = covs[c];
        if (std::abs(s(0, 1) - s(1, 0)) > 1e-12 * (1.0 + std::abs(s(0, 1))) || !(s(0, 0) > 0.0) ||
            !(s.determinant() > 0.0)) {
            throw std::invalid_argument("mixture: component covariance must be symmetric positive definite");
        }
    }
    if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("mixture: weights must sum to 1");
    if (centre.lpNorm<Eigen::Infinity>() > 1e-10) {
        throw std::invalid_argument("mixture: weighted component means must be zero");
    }
}

std::vector<ComponentVariances> MixtureParams::components() const {
    std::vector<ComponentVariances> out;
    for (const auto& s : covs) out.push_back({s(0, 0), s(1, 1), s(0, 1)});
    return out;
}

double MixtureParams::sigma_u2() const {
    double v = 0.0;
    for (int c = 0; c < k(); ++c) v += weights[c] * (covs[c](0, 0) + means[c](0) * means[c](0));
    return v;
}

Eigen::Index mixture_free_size(int k, Eigen::Index dw, Eigen::Index dz) {
    return 1 + 2 * dw + dz + 3 * (k - 1) + 3 * k;
}

Eigen::VectorXd mixture_to_free(const MixtureParams& params) {
    const int k = params.k();
    const Eigen::Index dw = params.theta2.size(), dz = params.pi1.size();
    Eigen::VectorXd free(mixture_free_size(k, dw, dz));
    Eigen::Index pos = 0;
    free(pos++) = params.theta1;
    free.segment(pos, dw) = params.theta2;
    pos += dw;
    free.segment(pos, dz) = params.pi1;
    pos += dz;
    free.segment(pos, dw) = params.pi2;
    pos += dw;
    const double log_last = std::log(params.weights[k - 1]);
    for (int c = 0; c + 1 < k; ++c) free(pos++) = std::log(params.weights[c]) - log_last;
    for (int c = 0; c + 1 < k; ++c) {
        free.segment<2>(pos) = params.means[c];
        pos += 2;
    }
    for (int c = 0; c < k; ++c) {
        const Eigen::Matrix2d& s = params.covs[c];
        const double l11 = std::sqrt(s(0, 0));
        const double l21 = s(0, 1) / l11;
        const double l22 = std::sqrt(s(1, 1) - l21 * l21);
        free(pos++) = std::log(l11);
        free(pos++) = l21;
        free(pos++) = std::log(l22);
    }
    return free;
}

MixtureParams mixture_from_free(const Eigen::VectorXd& free, int k, Eigen::Index dw, Eigen::Index dz) {
    const Unpacked u = unpack(free, k, dw, dz);
    MixtureParams p;
    p.theta1 = u.theta1;
    p.theta2 = u.theta2;
    p.pi1 = u.pi.head(dz);
    p.pi2 = u.pi.tail(dw);
    for (const Component& c : u.comps) {
        p.weights.push_back(c.p);
        p.means.push_back(c.mu);
        Eigen::Matrix2d s;
        s << c.zeta, c.kappa, c.kappa, c.omega;
        p.covs.push_back(s);
    }
    return p;
}

double mixture_loglik_free(const Eigen::VectorXd& free, int k, const Dataset& d, Eigen::VectorXd* grad) {
    const Eigen::Index dw = d.dw(), dz = d.dz();
    const Unpacked u = unpack(free, k, dw, dz);
    const Eigen::MatrixXd q = d.first_stage_design();
    const Eigen::VectorXd v_all = d.x - q * u.pi;
    const Eigen::VectorXd index = u.theta1 * d.x + d.w * u.theta2;

    const auto kk = static_cast<std::size_t>(k);
    std::vector<double> ell(kk), du(kk), dv(kk);
    std::vector<Eigen::Vector2d> dmu(kk);
    std::vector<Eigen::Vector3d> dsig(kk);  // d/d(zeta, kappa, omega)

    // Accumulators.
    Eigen::VectorXd g_theta = Eigen::VectorXd::Zero(1 + dw);
    Eigen::VectorXd g_pi = Eigen::VectorXd::Zero(dz + dw);
    std::vector<double> n_k(kk, 0.0);
    std::vector<Eigen::Vector2d> g_mu(kk, Eigen::Vector2d::Zero());
    std::vector<Eigen::Vector3d> g_sig(kk, Eigen::Vector3d::Zero());

    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double v = v_all(i);
        const bool uncensored = d.y(i) > 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            const Component& m = u.comps[c];
            if (uncensored) {
                const Eigen::Vector2d e(d.y(i) - index(i) - m.mu(0), v - m.mu(1));
                const Eigen::Vector2d a = m.inv * e;
                ell[c] = m.log_p - kLog2Pi - 0.5 * m.log_det - 0.5 * e.dot(a);
                if (grad) {
                    du[c] = -a(0);
                    dv[c] = -a(1);
                    dmu[c] = a;
                    const Eigen::Matrix2d mm = 0.5 * (a * a.transpose() - m.inv);
                    dsig[c] = Eigen::Vector3d(mm(0, 0), 2.0 * mm(0, 1), mm(1, 1));
                }
            } else {
                const double r = v - m.mu(1);
                const double cond_mean = m.mu(0) + m.beta * r;
                const double t = (-index(i) - cond_mean) / m.s;
                ell[c] = m.log_p + norm_log_pdf(r / std::sqrt(m.omega)) - 0.5 * std::log(m.omega) +
                         norm_log_cdf(t);
                if (grad) {
                    const double lam = inverse_mills(t);
                    const double s2 = m.s * m.s;
                    const double w2 = m.omega * m.omega;
                    du[c] = lam / m.s;
                    dv[c] = -r / m.omega - lam * m.beta / m.s;
                    dmu[c] = Eigen::Vector2d(-lam / m.s, r / m.omega + lam * m.beta / m.s);
                    dsig[c] = Eigen::Vector3d(
                        -lam * t / (2.0 * s2),
                        lam * (-r / (m.omega * m.s) + t * m.kappa / (m.omega * s2)),
                        -1.0 / (2.0 * m.omega) + r * r / (2.0 * w2) +
                            lam * (m.kappa * r / (w2 * m.s) - t * m.kappa * m.kappa / (2.0 * w2 * s2)));
                }
            }
        }
        const double top = *std::max_element(ell.begin(), ell.end());
        double acc = 0.0;
        for (double l : ell) acc += std::exp(l - top);
        const double li = top + std::log(acc);
        if (!std::isfinite(li)) {
            throw NumericalError("mixed_tobit_loglik: non-finite contribution at row " + std::to_string(i),
                                 static_cast<double>(i));
        }
        total += li;
        if (!grad) continue;
        double s_u = 0.0, s_v = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            const double tau = std::exp(ell[c] - li);
            s_u += tau * du[c];
            s_v += tau * dv[c];
            n_k[c] += tau;
            g_mu[c] += tau * dmu[c];
            g_sig[c] += tau * dsig[c];
        }
        g_theta(0) -= s_u * d.x(i);
        g_theta.tail(dw) -= s_u * d.w.row(i).transpose();
        g_pi -= s_v * q.row(i).transpose();
    }

    if (grad) {
        grad->resize(free.size());
        Eigen::Index pos = 0;
        grad->segment(pos, 1 + dw) = g_theta;
        pos += 1 + dw;
        grad->segment(pos, dz + dw) = g_pi;
        pos += dz + dw;
        const double n = static_cast<double>(d.n());
        const Component& last = u.comps[kk - 1];
        for (std::size_t c = 0; c + 1 < kk; ++c) {
            const Component& m = u.comps[c];
            (*grad)(pos++) = n_k[c] - n * m.p - (m.p / last.p) * m.mu.dot(g_mu[kk - 1]);
        }
        for (std::size_t c = 0; c + 1 < kk; ++c) {
            const Component& m = u.comps[c];
            grad->segment<2>(pos) = g_mu[c] - (m.p / last.p) * g_mu[kk - 1];
            pos += 2;
        }
        for (std::size_t c = 0; c < kk; ++c) {
            const Component& m = u.comps[c];
            const Eigen::Vector3d& g = g_sig[c];
            (*grad)(pos++) = 2.0 * m.zeta * g(0) + m.kappa * g(1);
            (*grad)(pos++) = m.l11 * g(1) + 2.0 * m.l21 * g(2);
            (*grad)(pos++) = 2.0 * m.l22 * m.l22 * g(2);
        }
    }
    return total;
}

double mixed_tobit_loglik(const MixtureParams& params, const Dataset& d) {
    params.check();
    return mixture_loglik_free(mixture_to_free(params), params.k(), d);
}

Eigen::VectorXd mixture_natural(const MixtureParams& params) {
    const Eigen::Index dw = params.theta2.size(), dz = params.pi1.size();
    const int k = params.k();
    Eigen::VectorXd out(1 + 2 * dw + dz + 6 * k);
    out.head(1 + 2 * dw + dz) << params.theta1, params.theta2, params.pi1, params.pi2;
    Eigen::Index pos = 1 + 2 * dw + dz;
    for (int c = 0; c < k; ++c) {
        out(pos++) = params.weights[c];
        out(pos++) = params.means[c](0);
        out(pos++) = params.means[c](1);
        out(pos++) = params.covs[c](0, 0);
        out(pos++) = params.covs[c](0, 1);
        out(pos++) = params.covs[c](1, 1);
    }
    return out;
}

namespace {

// K-means on the uncensored (u, v) residual pairs of a Gaussian fit, then
// per-cluster moments blended with the pooled covariance.
MixtureParams initial_guess(const Dataset& d, const ReducedFormFit& g, int k, std::uint64_t seed) {
    MixtureParams p;
    p.theta1 = g.theta1;
    p.theta2 = g.theta2;
    p.pi1 = g.pi1;
    p.pi2 = g.pi2;
    Eigen::Matrix2d pooled;
    pooled << g.sigma_u2, g.sigma_uv, g.sigma_uv, g.sigma_v2;
    if (k == 1) {
        p.weights = {1.0};
        p.means = {Eigen::Vector2d::Zero()};
        p.covs = {pooled};
        return p;
    }

    const Eigen::VectorXd v = d.x - d.z * g.pi1 - d.w * g.pi2;
    const Eigen::VectorXd u = d.y - g.theta1 * d.x - d.w * g.theta2;
    std::vector<Eigen::Vector2d> pts;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.y(i) > 0.0) pts.emplace_back(u(i), v(i));
    }
    const Eigen::Vector2d scale(std::sqrt(g.sigma_u2), std::sqrt(g.sigma_v2));
    Rng rng(seed);
    std::vector<Eigen::Vector2d> centres;
    for (int c = 0; c < k; ++c) {
        const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pts.size()));
        centres.push_back(pts[std::min(idx, pts.size() - 1)]);
    }
    std::vector<int> label(pts.size(), 0);
    for (int iter = 0; iter < 20; ++iter) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double dist = ((pts[i] - centres[c]).array() / scale.array()).square().sum();
                if (dist < best) {
                    best = dist;
                    label[i] = c;
                }
            }
        }
        for (int c = 0; c < k; ++c) {
            Eigen::Vector2d sum = Eigen::Vector2d::Zero();
            std::size_t count = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (label[i] == c) {
                    sum += pts[i];
                    ++count;
                }
            }
            if (count > 0) centres[c] = sum / static_cast<double>(count);
        }
    }

    for (int c = 0; c < k; ++c) {
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        std::size_t count = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (label[i] != c) continue;
            mean += pts[i];
            ++count;
        }
        if (count > 0) mean /= static_cast<double>(count);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (label[i] != c) continue;
            const Eigen::Vector2d e = pts[i] - mean;
            cov += e * e.transpose();
        }
        if (count > 1) cov /= static_cast<double>(count);
        const double share = (static_cast<double>(count) + 1.0) / (static_cast<double>(pts.size()) + k);
        p.weights.push_back(share);
        p.means.push_back(mean);
        p.covs.push_back(0.5 * cov + 0.5 * pooled);
    }
    double total = 0.0;
    for (double w : p.weights) total += w;
    Eigen::Vector2d centre = Eigen::Vector2d::Zero();
    for (int c = 0; c < k; ++c) {
        p.weights[c] /= total;
        centre += p.weights[c] * p.means[c];
    }
    for (auto& m : p.means) m -= centre;
    return p;
}

}  // namespace

MixtureFit fit_mixture(const Dataset& d, int k, const MixtureOptions& options) {
    if (k < 1) throw std::invalid_argument("fit_mixture: K must be at least 1");
    const Eigen::Index dw = d.dw(), dz = d.dz();
    const double headroom = 6.0 * k + static_cast<double>(1 + 2 * dw + dz) + 1.0;
    if (!(headroom < static_cast<double>(d.n()) / 10.0)) {
        throw DataError(DataErrorCode::too_few_rows,
                        "mixture with K = " + std::to_string(k) + " needs n > " +
                            std::to_string(static_cast<long long>(10.0 * headroom)) + " rows");
    }
    const ReducedFormFit gauss = fit_two_step(d, ModelKind::tobit);
    const int starts = k == 1 ? 1 : std::max(1, options.starts);

    struct Attempt {
        std::optional<QuasiNewtonResult> result;
    };
    std::vector<Attempt> attempts(static_cast<std::size_t>(starts));
    const ObjectiveGradFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd* g) {
        try {
            return mixture_loglik_free(p, k, d, g);
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    parallel_for(static_cast<std::size_t>(starts), options.threads, [&](std::size_t s) {
        const MixtureParams init = initial_guess(d, gauss, k, derive_seed(options.seed, {s}));
        try {
            attempts[s].result = quasi_newton_maximize(f, mixture_to_free(init), options.optimizer);
        } catch (const ConvergenceError&) {
        }
    });

    int best = -1;
    int failed = 0;
    for (int s = 0; s < starts; ++s) {
        const auto& r = attempts[static_cast<std::size_t>(s)].result;
        if (!r) {
            ++failed;
            continue;
        }
        if (best < 0 || r->value > attempts[static_cast<std::size_t>(best)].result->value) best = s;
    }
    if (best < 0) {
        throw ConvergenceError("fit_mixture: all " + std::to_string(starts) + " starts failed to converge");
    }
    const QuasiNewtonResult& res = *attempts[static_cast<std::size_t>(best)].result;

    MixtureFit out;
    out.params = mixture_from_free(res.argmax, k, dw, dz);
    for (int c = 0; c < k; ++c) {
        if (out.params.weights[c] < 1e-6) {
            throw EstimationError("fit_mixture: component " + std::to_string(c + 1) +
                                  " has negligible weight; try a smaller K");
        }
    }
    out.loglik = res.value;
    out.iterations = res.iterations;
    out.start_index = best;
    out.failed_starts = failed;
    out.free = res.argmax;
    out.bic = -2.0 * res.value + static_cast<double>(res.argmax.size()) * std::log(static_cast<double>(d.n()));
    out.free_vcov = (-res.hessian).inverse();
    out.free_vcov = 0.5 * (out.free_vcov + out.free_vcov.transpose());

    const Eigen::VectorXd nat0 = mixture_natural(out.params);
    Eigen::MatrixXd jac(nat0.size(), res.argmax.size());
    for (Eigen::Index j = 0; j < res.argmax.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(res.argmax(j)));
        Eigen::VectorXd up = res.argmax, down = res.argmax;
        up(j) += h;
        down(j) -= h;
        jac.col(j) = (mixture_natural(mixture_from_free(up, k, dw, dz)) -
                      mixture_natural(mixture_from_free(down, k, dw, dz))) /
                     (2.0 * h);
    }
    out.natural_vcov = jac * out.free_vcov * jac.transpose();
    return out;
}

Interval mixture_sigma_ustar_interval(const MixtureParams& params) {
    return intersect_component_intervals(params.components(), params.theta1);
}

}  // namespace ivbounds
