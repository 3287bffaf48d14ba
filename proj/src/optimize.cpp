#include "ivbounds/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ivbounds/error.hpp"

namespace ivbounds {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
const double kCbrtEps = std::cbrt(kEps);
const double kQrtEps = std::sqrt(std::sqrt(kEps));

double checked(const ScalarFn& f, double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
        throw NumericalError("golden_minimize: objective is not finite at x = " + std::to_string(x), x);
    }
    return v;
}

ObjectiveGradFn with_numeric_gradient(const ObjectiveFn& f) {
    return [f](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        if (grad) *grad = numerical_gradient(f, x);
        return f(x);
    };
}

bool negative_definite(const Eigen::MatrixXd& h) {
    if (!h.allFinite()) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(-h);
    return llt.info() == Eigen::Success;
}

}  // namespace

ScalarOptimum golden_minimize(const ScalarFn& f, const Interval& interval, double tol,
                              std::span<const double> extra_points, int grid_points) {
    ScalarOptimum best{interval.lo, 0.0};
    if (interval.degenerate()) {
        best.value = checked(f, interval.lo);
        return best;
    }
    grid_points = std::max(grid_points, 3);
    const double step = interval.width() / (grid_points - 1);
    std::vector<double> xs(grid_points);
    std::size_t best_index = 0;
    best.value = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_points; ++k) {
        xs[k] = (k == grid_points - 1) ? interval.hi : interval.lo + k * step;
        const double v = checked(f, xs[k]);
        if (v < best.value) {
            best = {xs[k], v};
            best_index = k;
        }
    }

    auto consider = [&](double x, double v) {
        if (v < best.value) best = {x, v};
    };

    double a = xs[best_index == 0 ? 0 : best_index - 1];
    double b = xs[std::min<std::size_t>(best_index + 1, xs.size() - 1)];
    constexpr double kInvPhi = 0.61803398874989484820;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = checked(f, c);
    double fd = checked(f, d);
    consider(c, fc);
    consider(d, fd);
    for (int it = 0; it < 200 && (b - a) > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = checked(f, c);
            consider(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = checked(f, d);
            consider(d, fd);
        }
    }
    for (double x : extra_points) {
        if (interval.contains(x)) consider(x, checked(f, x));
    }
    return best;
}

ScalarOptimum golden_maximize(const ScalarFn& f, const Interval& interval, double tol,
                              std::span<const double> extra_points, int grid_points) {
    ScalarOptimum r = golden_minimize([&f](double x) { return -f(x); }, interval, tol,
                                      extra_points, grid_points);
    r.value = -r.value;
    return r;
}

Eigen::VectorXd numerical_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h0 = kCbrtEps * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + h0;
        const double up = f(xp);
        const double h_up = xp(i) - x(i);
        xp(i) = x(i) - h0;
        const double down = f(xp);
        const double h_down = x(i) - xp(i);
        xp(i) = x(i);
        g(i) = (up - down) / (h_up + h_down);
    }
    return g;
}

Eigen::MatrixXd numerical_hessian(const ObjectiveGradFn& f, const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    Eigen::VectorXd xp = x;
    Eigen::VectorXd gp(n), gm(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double step = kCbrtEps * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + step;
        const double h_up = xp(i) - x(i);
        f(xp, &gp);
        xp(i) = x(i) - step;
        const double h_down = x(i) - xp(i);
        f(xp, &gm);
        xp(i) = x(i);
        h.col(i) = (gp - gm) / (h_up + h_down);
    }
    return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd numerical_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h(n, n);
    Eigen::VectorXd step(n);
    for (Eigen::Index i = 0; i < n; ++i) step(i) = kQrtEps * std::max(1.0, std::abs(x(i)));
    const double f0 = f(x);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xp(i) = x(i) + step(i);
        const double up = f(xp);
        xp(i) = x(i) - step(i);
        const double down = f(xp);
        xp(i) = x(i);
        h(i, i) = (up - 2.0 * f0 + down) / (step(i) * step(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            auto at = [&](double si, double sj) {
                xp(i) = x(i) + si * step(i);
                xp(j) = x(j) + sj * step(j);
                const double v = f(xp);
                xp(i) = x(i);
                xp(j) = x(j);
                return v;
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) /
                             (4.0 * step(i) * step(j));
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

using HessianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

static QuasiNewtonResult maximize_impl(const ObjectiveGradFn& f, Eigen::VectorXd start,
                                const QuasiNewtonOptions& options, const HessianFn& hessian) {
    const Eigen::Index n = start.size();
    // Minimize F = -f throughout.
    auto eval = [&f](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double v = f(x, &g);
        g = -g;
        return -v;
    };

    Eigen::VectorXd x = std::move(start);
    Eigen::VectorXd g(n);
    double fx = eval(x, g);
    if (!std::isfinite(fx) || !g.allFinite()) {
        throw ConvergenceError("quasi_newton_maximize: objective not finite at the start point", x);
    }

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    bool scaled = false;
    if (options.hessian_start) {
        const Eigen::MatrixXd h = hessian(x);
        if (negative_definite(h)) {
            hinv = (-h).inverse();
            hinv = 0.5 * (hinv + hinv.transpose());
            scaled = true;
        }
    }
    if (!scaled) hinv /= std::max(1.0, g.lpNorm<Eigen::Infinity>());

    auto converged = [&](double value, const Eigen::VectorXd& grad) {
        const double limit =
            options.relative_tol ? options.grad_tol * (1.0 + std::abs(value)) : options.grad_tol;
        return grad.lpNorm<Eigen::Infinity>() <= limit;
    };

    constexpr double kArmijo = 1e-4;
    int it = 0;
    bool done = converged(fx, g);
    Eigen::VectorXd x_new(n), g_new(n), p(n);
    for (; !done && it < options.max_iterations; ++it) {
        p = -hinv * g;
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            hinv = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, g.lpNorm<Eigen::Infinity>());
            scaled = false;
            p = -hinv * g;
            slope = g.dot(p);
        }

        // Backtracking on the Armijo condition. Near the optimum the decrease
        // drops below the rounding noise of f; a step that is not worse within
        // that noise and shrinks the gradient is then accepted.
        const double noise = 64.0 * kEps * (1.0 + std::abs(fx));
        double alpha = 1.0;
        bool accepted = false;
        double f_new = fx;
        Eigen::VectorXd fallback_x, fallback_g;
        double fallback_f = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + alpha * p;
            f_new = eval(x_new, g_new);
            if (std::isfinite(f_new) && g_new.allFinite()) {
                if (f_new <= fx + kArmijo * alpha * slope) {
                    accepted = true;
                    break;
                }
                if (fallback_x.size() == 0 && f_new <= fx + noise &&
                    g_new.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
                    fallback_x = x_new;
                    fallback_g = g_new;
                    fallback_f = f_new;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (fallback_x.size() == 0) {
                throw ConvergenceError(
                    "quasi_newton_maximize: line search failed at iteration " + std::to_string(it), x);
            }
            x_new = fallback_x;
            g_new = fallback_g;
            f_new = fallback_f;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double ys = y.dot(s);
        if (ys > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                hinv = Eigen::MatrixXd::Identity(n, n) * (ys / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / ys;
            const Eigen::VectorXd hy = hinv * y;
            const double yhy = y.dot(hy);
            hinv += ((ys + yhy) * rho * rho) * (s * s.transpose()) -
                    rho * (hy * s.transpose() + s * hy.transpose());
        }
        x = x_new;
        g = g_new;
        fx = f_new;
        done = converged(fx, g);
    }
    if (!done) {
        throw ConvergenceError("quasi_newton_maximize: no convergence after " +
                                   std::to_string(options.max_iterations) + " iterations",
                               x);
    }

    QuasiNewtonResult result;
    result.hessian = hessian(x);
    if (!negative_definite(result.hessian)) {
        throw ConvergenceError(
            "quasi_newton_maximize: Hessian at the solution is not negative definite", x);
    }
    result.argmax = std::move(x);
    result.value = -fx;
    result.gradient = -g;
    result.iterations = it;
    return result;
}

QuasiNewtonResult quasi_newton_maximize(const ObjectiveGradFn& f, Eigen::VectorXd start,
                                        const QuasiNewtonOptions& options) {
    return maximize_impl(f, std::move(start), options,
                         [&f](const Eigen::VectorXd& x) { return numerical_hessian(f, x); });
}

QuasiNewtonResult quasi_newton_maximize(const ObjectiveFn& f, Eigen::VectorXd start,
                                        const QuasiNewtonOptions& options) {
    return maximize_impl(with_numeric_gradient(f), std::move(start), options,
                         [&f](const Eigen::VectorXd& x) { return numerical_hessian(f, x); });
}

}  // namespace ivbounds
