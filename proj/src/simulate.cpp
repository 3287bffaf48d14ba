#include "ivbounds/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ivbounds/bounds.hpp"
#include "ivbounds/estimate.hpp"
#include "ivbounds/format.hpp"
#include "ivbounds/normal.hpp"
#include "ivbounds/parallel.hpp"
#include "ivbounds/rng.hpp"

namespace ivbounds {

namespace {

template <class C>
std::size_t pick(const std::vector<C>& comps, double u) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < comps.size(); ++j) {
        acc += comps[j].weight;
        if (u < acc) return j;
    }
    return comps.size() - 1;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    const double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

EffectQuery population_query(const DgpConfig& cfg, EffectKind kind) {
    EffectQuery q;
    q.kind = kind;
    q.covariate_index = 0;
    q.h = cfg.mean_covariates();
    return q;
}

EffectRecord evaluate_effect(const EffectQuery& q, const ReducedFormFit& fit, const Dataset& d,
                             const Interval& set, const Interval& sigma_ci, const BonferroniConfig& bc) {
    EffectRecord r;
    const EffectBounds b = effect_bounds(q, fit, &d, set);
    r.lb = b.lower;
    r.ub = b.upper;
    r.naive = b.naive;
    const Interval ci = ci_effect(q, fit, &d, bc, sigma_ci);
    r.ci_lo = ci.lo;
    r.ci_hi = ci.hi;
    const Interval nci = naive_ci(q, fit, &d, bc);
    r.naive_ci_lo = nci.lo;
    r.naive_ci_hi = nci.hi;
    return r;
}

EffectAggregate aggregate_effect(const std::vector<const ReplicationRecord*>& ok,
                                 EffectRecord ReplicationRecord::*member, double truth,
                                 const EffectBounds& truth_bounds) {
    EffectAggregate a;
    a.truth = truth;
    a.true_lb = truth_bounds.lower;
    a.true_ub = truth_bounds.upper;
    std::vector<double> lb, ub, nv, cl, ch, nl, nh, wd;
    double cover = 0.0, naive_cover = 0.0;
    for (const ReplicationRecord* r : ok) {
        const EffectRecord& e = r->*member;
        lb.push_back(e.lb);
        ub.push_back(e.ub);
        nv.push_back(e.naive);
        cl.push_back(e.ci_lo);
        ch.push_back(e.ci_hi);
        nl.push_back(e.naive_ci_lo);
        nh.push_back(e.naive_ci_hi);
        wd.push_back(e.ub - e.lb);
        if (e.ci_lo <= truth && truth <= e.ci_hi) cover += 1.0;
        if (e.naive_ci_lo <= truth && truth <= e.naive_ci_hi) naive_cover += 1.0;
    }
    a.median_lb = median(lb);
    a.median_ub = median(ub);
    a.median_naive = median(nv);
    a.median_ci_lo = median(cl);
    a.median_ci_hi = median(ch);
    a.median_naive_ci_lo = median(nl);
    a.median_naive_ci_hi = median(nh);
    a.median_width = median(wd);
    const double n = static_cast<double>(ok.size());
    a.coverage = ok.empty() ? std::nan("") : cover / n;
    a.naive_coverage = ok.empty() ? std::nan("") : naive_cover / n;
    return a;
}

}  // namespace

void DgpConfig::check() const {
    if (!(sigma_ustar > 0.0) || !(sigma_vstar > 0.0) || !(sigma_eps >= 0.0)) {
        throw std::invalid_argument("design scales must be positive");
    }
    if (!(std::abs(rho_star) < 1.0)) throw std::invalid_argument("rho_star must lie in (-1, 1)");
    if (n < 0) throw std::invalid_argument("n must be non-negative");
    if (mixture) {
        double wv = 0.0, we = 0.0, mv = 0.0, me = 0.0;
        for (const auto& c : mixture->vstar) {
            if (!(c.weight > 0.0) || !(c.sd > 0.0) ||
                !(c.cov_ustar * c.cov_ustar < sigma_ustar * sigma_ustar * c.sd * c.sd)) {
                throw std::invalid_argument("invalid V* mixture component");
            }
            wv += c.weight;
            mv += c.weight * c.mean;
        }
        for (const auto& c : mixture->eps) {
            if (!(c.weight > 0.0) || !(c.sd >= 0.0)) throw std::invalid_argument("invalid error mixture component");
            we += c.weight;
            me += c.weight * c.mean;
        }
        if (mixture->vstar.empty() || mixture->eps.empty() || std::abs(wv - 1.0) > 1e-12 ||
            std::abs(we - 1.0) > 1e-12 || std::abs(mv) > 1e-12 || std::abs(me) > 1e-12) {
            throw std::invalid_argument("mixture weights must sum to 1 and means to 0");
        }
    }
}

Eigen::VectorXd DgpConfig::mean_covariates() const {
    Eigen::VectorXd h(2);
    h << pi2, 1.0;
    return h;
}

Dataset sample(const DgpConfig& cfg, std::uint64_t seed) {
    cfg.check();
    Rng rng(seed);
    Dataset d;
    const Eigen::Index n = cfg.n;
    d.y.resize(n);
    d.x.resize(n);
    d.w = Eigen::MatrixXd::Ones(n, 1);
    d.z.resize(n, 1);
    const double r = cfg.rho_star;
    const double r_c = std::sqrt(1.0 - r * r);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = rng.normal();
        double ustar, vstar, eps;
        if (cfg.mixture) {
            const auto& vc = cfg.mixture->vstar[pick(cfg.mixture->vstar, rng.uniform())];
            const auto& ec = cfg.mixture->eps[pick(cfg.mixture->eps, rng.uniform())];
            const double e1 = rng.normal(), e2 = rng.normal(), e3 = rng.normal();
            const double beta = vc.cov_ustar / (vc.sd * vc.sd);
            const double cond_sd =
                std::sqrt(cfg.sigma_ustar * cfg.sigma_ustar - beta * vc.cov_ustar);
            vstar = vc.mean + vc.sd * e1;
            ustar = beta * (vstar - vc.mean) + cond_sd * e2;
            eps = ec.mean + ec.sd * e3;
        } else {
            const double e1 = rng.normal(), e2 = rng.normal(), e3 = rng.normal();
            vstar = cfg.sigma_vstar * e1;
            ustar = cfg.sigma_ustar * (r * e1 + r_c * e2);
            eps = cfg.sigma_eps * e3;
        }
        const double xstar = cfg.pi1 * z + cfg.pi2 + vstar;
        const double latent = cfg.theta1 * xstar + cfg.theta2 + ustar;
        d.y(i) = cfg.kind == ModelKind::tobit ? std::max(latent, 0.0) : (latent > 0.0 ? 1.0 : 0.0);
        d.x(i) = xstar + eps;
        d.z(i, 0) = z;
    }
    return d;
}

ReducedFormFit population_reduced_form(const DgpConfig& cfg) {
    cfg.check();
    ReducedFormFit f;
    f.kind = cfg.kind;
    const double su2 = cfg.sigma_ustar * cfg.sigma_ustar;
    const double se2 = cfg.sigma_eps * cfg.sigma_eps;
    f.theta1 = cfg.theta1;
    f.theta2 = Eigen::VectorXd::Constant(1, cfg.theta2);
    f.pi1 = Eigen::VectorXd::Constant(1, cfg.pi1);
    f.pi2 = Eigen::VectorXd::Constant(1, cfg.pi2);
    f.sigma_u2 = su2 + cfg.theta1 * cfg.theta1 * se2;
    f.sigma_v2 = cfg.sigma_vstar * cfg.sigma_vstar + se2;
    f.sigma_uv = cfg.rho_star * cfg.sigma_ustar * cfg.sigma_vstar - cfg.theta1 * se2;
    if (cfg.kind == ModelKind::probit) {
        const double s = std::sqrt(f.sigma_u2);
        f.theta1 /= s;
        f.theta2 /= s;
        f.sigma_uv /= s;
        f.sigma_u2 = 1.0;
    }
    f.estimator = "population";
    return f;
}

std::vector<ComponentVariances> population_components(const DgpConfig& cfg) {
    cfg.check();
    if (!cfg.mixture) {
        const ReducedFormFit f = population_reduced_form(cfg);
        return {{f.sigma_u2, f.sigma_v2, f.sigma_uv}};
    }
    std::vector<ComponentVariances> out;
    const double su2 = cfg.sigma_ustar * cfg.sigma_ustar;
    for (const auto& vc : cfg.mixture->vstar) {
        for (const auto& ec : cfg.mixture->eps) {
            const double se2 = ec.sd * ec.sd;
            out.push_back({su2 + cfg.theta1 * cfg.theta1 * se2, vc.sd * vc.sd + se2,
                           vc.cov_ustar - cfg.theta1 * se2});
        }
    }
    return out;
}

double true_effect(const DgpConfig& cfg, const EffectQuery& query) {
    cfg.check();
    Eigen::VectorXd theta(2);
    theta << cfg.theta1, cfg.theta2;
    const double su2 = cfg.sigma_ustar * cfg.sigma_ustar;
    switch (query.kind) {
        case EffectKind::pe_tobit_mean: return pe_tobit_mean(query.h, query.covariate_index, theta, su2);
        case EffectKind::pe_probability: return pe_probability(query.h, query.covariate_index, theta, su2);
        default: break;
    }
    if (query.covariate_index < 0 || query.covariate_index > 1) {
        throw std::invalid_argument("true_effect: covariate index out of range");
    }
    // theta' H* = a + theta1 (pi1 Z + V*); integrate Z and each V* component.
    std::vector<VstarComponent> comps{{1.0, 0.0, cfg.sigma_vstar, 0.0}};
    if (cfg.mixture) comps = cfg.mixture->vstar;
    const double a = cfg.theta1 * cfg.pi2 + cfg.theta2;
    const double theta_j = theta(query.covariate_index);
    double total = 0.0;
    for (const auto& c : comps) {
        const double b2 = cfg.theta1 * cfg.theta1 * (cfg.pi1 * cfg.pi1 + c.sd * c.sd);
        const double scale = std::sqrt(su2 + b2);
        const double m = (a + cfg.theta1 * c.mean) / scale;
        total += c.weight * (query.kind == EffectKind::ape_tobit_mean ? norm_cdf(m) * theta_j
                                                                       : norm_pdf(m) * theta_j / scale);
    }
    return total;
}

McResult run_mc(const McConfig& cfg) {
    if (cfg.reps < 1) throw std::invalid_argument("run_mc: reps must be at least 1");
    cfg.ci.check();
    const std::size_t n_rho = cfg.rho_grid.size();
    const auto reps = static_cast<std::size_t>(cfg.reps);
    McResult out;
    out.records.resize(n_rho * reps);

    parallel_for(n_rho * reps, cfg.threads, [&](std::size_t idx) {
        const std::size_t ri = idx / reps, rep = idx % reps;
        ReplicationRecord& rec = out.records[idx];
        rec.rho = cfg.rho_grid[ri];
        rec.rep = static_cast<int>(rep);
        rec.seed = derive_seed(cfg.seed, {ri, rep});
        DgpConfig design = cfg.design;
        design.rho_star = rec.rho;
        try {
            const Dataset d = sample(design, rec.seed);
            const Dataset checked = validate(d, design.kind).data;
            FitOptions fo;
            fo.seed = rec.seed;
            const ReducedFormFit fit = fit_two_step(checked, design.kind, fo);
            rec.theta1 = fit.theta1;
            rec.sigma_u2 = fit.sigma_u2;
            rec.sigma_v2 = fit.sigma_v2;
            rec.sigma_uv = fit.sigma_uv;
            const Interval set = sigma_ustar_interval(fit).interval;
            rec.sigma_lb = set.lo;
            rec.sigma_ub = set.hi;
            const Interval sci = ci_sigma_ustar2(fit, cfg.ci);
            rec.sigma_ci_lo = sci.lo;
            rec.sigma_ci_hi = sci.hi;
            rec.pe_mean = evaluate_effect(population_query(design, EffectKind::pe_tobit_mean), fit, checked,
                                          set, sci, cfg.ci);
            rec.pe_prob = evaluate_effect(population_query(design, EffectKind::pe_probability), fit,
                                          checked, set, sci, cfg.ci);
            if (cfg.with_ape) {
                rec.ape_mean = evaluate_effect(population_query(design, EffectKind::ape_tobit_mean), fit,
                                               checked, set, sci, cfg.ci);
            }
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
    });

    for (std::size_t ri = 0; ri < n_rho; ++ri) {
        AggregateRow row;
        row.rho = cfg.rho_grid[ri];
        row.reps = cfg.reps;
        DgpConfig design = cfg.design;
        design.rho_star = row.rho;
        const ReducedFormFit pop = population_reduced_form(design);
        const Interval pop_set = sigma_ustar_interval(pop).interval;
        row.true_sigma_ustar2 = design.sigma_ustar * design.sigma_ustar;
        if (design.kind == ModelKind::probit) {
            row.true_sigma_ustar2 /= row.true_sigma_ustar2 + design.theta1 * design.theta1 *
                                                                design.sigma_eps * design.sigma_eps;
        }
        row.true_sigma_lb = pop_set.lo;
        row.true_sigma_ub = pop_set.hi;

        std::vector<const ReplicationRecord*> ok;
        std::vector<double> lb, ub, wd;
        double cover = 0.0;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const ReplicationRecord& r = out.records[ri * reps + rep];
            if (!r.ok) {
                ++row.failures;
                continue;
            }
            ok.push_back(&r);
            lb.push_back(r.sigma_lb);
            ub.push_back(r.sigma_ub);
            wd.push_back(r.sigma_ub - r.sigma_lb);
            if (r.sigma_ci_lo <= row.true_sigma_ustar2 && row.true_sigma_ustar2 <= r.sigma_ci_hi) cover += 1.0;
        }
        row.median_sigma_lb = median(lb);
        row.median_sigma_ub = median(ub);
        row.median_sigma_width = median(wd);
        row.sigma_coverage = ok.empty() ? std::nan("") : cover / static_cast<double>(ok.size());

        auto truth_of = [&](EffectKind kind) {
            const EffectQuery q = population_query(design, kind);
            const double truth = true_effect(design, q);
            EffectBounds tb;
            if (is_average(kind)) {
                // Population APE bounds: the plug-in formula integrates Z exactly.
                auto f = [&](double s2) {
                    const double scale2 = ape_scale2(pop, s2) + pop.theta1 * pop.theta1 * pop.pi1(0) * pop.pi1(0);
                    const double m = (pop.theta1 * pop.pi2(0) + pop.theta2(0)) / std::sqrt(scale2);
                    return norm_cdf(m) * pop.theta1;
                };
                tb.lower = std::min(f(pop_set.lo), f(pop_set.hi));
                tb.upper = std::max(f(pop_set.lo), f(pop_set.hi));
            } else {
                tb = pe_bounds(q, pop, pop_set);
            }
            return std::pair{truth, tb};
        };
        const auto [pm, pmb] = truth_of(EffectKind::pe_tobit_mean);
        row.pe_mean = aggregate_effect(ok, &ReplicationRecord::pe_mean, pm, pmb);
        const auto [pp, ppb] = truth_of(EffectKind::pe_probability);
        row.pe_prob = aggregate_effect(ok, &ReplicationRecord::pe_prob, pp, ppb);
        if (cfg.with_ape) {
            const auto [am, amb] = truth_of(EffectKind::ape_tobit_mean);
            row.ape_mean = aggregate_effect(ok, &ReplicationRecord::ape_mean, am, amb);
        }
        out.aggregates.push_back(row);
    }
    return out;
}

namespace {

void write_effect_header(std::ostream& out, const char* p) {
    for (const char* f : {"lb", "ub", "naive", "ci_lo", "ci_hi", "naive_ci_lo", "naive_ci_hi"}) {
        out << ',' << p << '_' << f;
    }
}

void write_effect(std::ostream& out, const EffectRecord& e) {
    for (double v : {e.lb, e.ub, e.naive, e.ci_lo, e.ci_hi, e.naive_ci_lo, e.naive_ci_hi}) {
        out << ',' << format_double(v);
    }
}

void write_aggregate_header(std::ostream& out, const char* p) {
    for (const char* f : {"true", "true_lb", "true_ub", "median_lb", "median_ub", "median_naive",
                          "median_ci_lo", "median_ci_hi", "median_naive_ci_lo", "median_naive_ci_hi",
                          "median_width", "coverage", "naive_coverage"}) {
        out << ',' << p << '_' << f;
    }
}

void write_aggregate(std::ostream& out, const EffectAggregate& a) {
    for (double v : {a.truth, a.true_lb, a.true_ub, a.median_lb, a.median_ub, a.median_naive, a.median_ci_lo,
                     a.median_ci_hi, a.median_naive_ci_lo, a.median_naive_ci_hi, a.median_width, a.coverage,
                     a.naive_coverage}) {
        out << ',' << format_double(v);
    }
}

std::string csv_quote(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

}  // namespace

void write_replications_csv(std::ostream& out, const McResult& r, bool with_ape) {
    out << "rho,rep,seed,status,theta1,sigma_u2,sigma_v2,sigma_uv,sigma_lb,sigma_ub,sigma_ci_lo,sigma_ci_hi";
    write_effect_header(out, "pe_mean");
    write_effect_header(out, "pe_prob");
    if (with_ape) write_effect_header(out, "ape_mean");
    out << ",error\n";
    for (const auto& rec : r.records) {
        out << format_double(rec.rho) << ',' << rec.rep << ',' << rec.seed << ',' << (rec.ok ? "ok" : "failed");
        for (double v : {rec.theta1, rec.sigma_u2, rec.sigma_v2, rec.sigma_uv, rec.sigma_lb, rec.sigma_ub,
                         rec.sigma_ci_lo, rec.sigma_ci_hi}) {
            out << ',' << format_double(v);
        }
        write_effect(out, rec.pe_mean);
        write_effect(out, rec.pe_prob);
        if (with_ape) write_effect(out, rec.ape_mean);
        out << ',' << (rec.error.empty() ? std::string() : csv_quote(rec.error)) << '\n';
    }
}

void write_aggregate_csv(std::ostream& out, const McResult& r, bool with_ape) {
    out << "rho,reps,failures,true_sigma_ustar2,true_sigma_lb,true_sigma_ub,median_sigma_lb,median_sigma_ub,"
           "median_sigma_width,sigma_coverage";
    write_aggregate_header(out, "pe_mean");
    write_aggregate_header(out, "pe_prob");
    if (with_ape) write_aggregate_header(out, "ape_mean");
    out << '\n';
    for (const auto& a : r.aggregates) {
        out << format_double(a.rho) << ',' << a.reps << ',' << a.failures;
        for (double v : {a.true_sigma_ustar2, a.true_sigma_lb, a.true_sigma_ub, a.median_sigma_lb,
                         a.median_sigma_ub, a.median_sigma_width, a.sigma_coverage}) {
            out << ',' << format_double(v);
        }
        write_aggregate(out, a.pe_mean);
        write_aggregate(out, a.pe_prob);
        if (with_ape) write_aggregate(out, a.ape_mean);
        out << '\n';
    }
}

void write_plot_csv(std::ostream& out, const McResult& r, const std::string& effect) {
    EffectAggregate AggregateRow::*member = nullptr;
    if (effect == "pe-mean") member = &AggregateRow::pe_mean;
    else if (effect == "pe-prob") member = &AggregateRow::pe_prob;
    else if (effect == "ape-mean") member = &AggregateRow::ape_mean;
    else throw std::invalid_argument("write_plot_csv: unknown effect '" + effect + "'");
    out << "rho,series,value\n";
    for (const auto& row : r.aggregates) {
        const EffectAggregate& a = row.*member;
        const std::pair<const char*, double> series[] = {
            {"true", a.truth},          {"true_lb", a.true_lb},
            {"true_ub", a.true_ub},     {"median_lb", a.median_lb},
            {"median_ub", a.median_ub}, {"naive", a.median_naive},
            {"ci_lo", a.median_ci_lo},  {"ci_hi", a.median_ci_hi},
            {"naive_ci_lo", a.median_naive_ci_lo}, {"naive_ci_hi", a.median_naive_ci_hi},
        };
        for (const auto& [name, value] : series) {
            out << format_double(row.rho) << ',' << name << ',' << format_double(value) << '\n';
        }
    }
}

}  // namespace ivbounds
