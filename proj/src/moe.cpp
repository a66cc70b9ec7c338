#include "nnmoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nnmoe/numerics.hpp"
#include "nnmoe/rng.hpp"

namespace nnmoe {

namespace num = nnmoe::numerics;

bool family_has_lambda(Family f) {
    return f == Family::SkewNormal || f == Family::SkewT;
}

bool family_has_nu(Family f) {
    return f == Family::StudentT || f == Family::SkewT;
}

std::string family_name(Family f) {
    switch (f) {
        case Family::Normal: return "nmoe";
        case Family::SkewNormal: return "snmoe";
        case Family::StudentT: return "tmoe";
        case Family::SkewT: return "stmoe";
    }
    return "nmoe";
}

Family family_from_name(const std::string& name) {
    if (name == "nmoe" || name == "normal") return Family::Normal;
    if (name == "snmoe" || name == "skew-normal") return Family::SkewNormal;
    if (name == "tmoe" || name == "t") return Family::StudentT;
    if (name == "stmoe" || name == "skew-t") return Family::SkewT;
    throw std::invalid_argument("unknown family: " + name);
}

Eigen::MatrixXd Dataset::design(const Eigen::VectorXd& x, int order) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd D(n, order + 1);
    D.col(0).setOnes();
    for (int j = 1; j <= order; ++j) {
        D.col(j) = D.col(j - 1).cwiseProduct(x);
    }
    return D;
}

Dataset Dataset::build(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       int p, int q) {
    if (x.size() != y.size() || x.size() < 1) {
        throw std::invalid_argument("Dataset: x and y must have equal positive length");
    }
    Dataset d;
    d.x = x;
    d.y = y;
    d.X = design(x, p);
    d.R = design(x, q);
    return d;
}

Family effective_family(const MoESpec& spec, const FitOptions& opts) {
    bool skew = family_has_lambda(spec.family) && !opts.pin_lambda_zero;
    bool heavy = family_has_nu(spec.family) && !opts.pin_nu_infinite;
    if (skew && heavy) return Family::SkewT;
    if (skew) return Family::SkewNormal;
    if (heavy) return Family::StudentT;
    return Family::Normal;
}

double expert_logpdf(Family family, const ExpertParams& e, double y, double mu) {
    switch (family) {
        case Family::Normal:
            return dist::normal_logpdf(y, mu, e.sigma2);
        case Family::SkewNormal:
            return dist::skew_normal_logpdf(y, {mu, e.sigma2, e.lambda});
        case Family::StudentT:
            return dist::student_t_logpdf(y, {mu, e.sigma2, e.nu});
        case Family::SkewT:
            return dist::skew_t_logpdf(y, {mu, e.sigma2, e.lambda, e.nu});
    }
    return 0.0;
}

double log_likelihood(const MoEParams& params, const MoESpec& spec,
                      const Dataset& data) {
    const int n = data.n();
    const int K = params.K();
    double total = 0.0;
    std::vector<double> terms(K);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd logpi =
            gating::gate_log_probs(params.gate, data.R.row(i).transpose());
        for (int k = 0; k < K; ++k) {
            const double mu = params.experts[k].beta.dot(data.X.row(i));
            terms[k] = logpi(k) + expert_logpdf(spec.family, params.experts[k],
                                                data.y(i), mu);
        }
        total += num::log_sum_exp(terms);
    }
    if (!std::isfinite(total)) {
        throw EvaluationError("log_likelihood: non-finite value (collapsed scale?)");
    }
    return total;
}

namespace {

// log T_nu(x) with an underflow fallback via the t tail bound.
double t_log_cdf(double x, double nu) {
    const double c = num::student_t_cdf(x, nu);
    if (c > 0.0) return std::log(c);
    return num::student_t_logpdf(x, nu) - std::log(-x);
}

}  // namespace

EStepCache e_step(const MoEParams& params, Family family, const Dataset& data) {
    const int n = data.n();
    const int K = params.K();
    EStepCache cache;
    cache.tau.resize(n, K);
    cache.d.resize(n, K);
    const bool skew = family_has_lambda(family);
    const bool heavy = family_has_nu(family);
    if (heavy) cache.w.resize(n, K);
    if (skew) {
        cache.e1.resize(n, K);
        cache.e2.resize(n, K);
    }
    if (heavy) cache.e3.resize(n, K);
    if (family == Family::SkewT) cache.M.resize(n, K);

    Eigen::MatrixXd logdens(n, K);
    std::vector<double> terms(K);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd logpi =
            gating::gate_log_probs(params.gate, data.R.row(i).transpose());
        for (int k = 0; k < K; ++k) {
            const ExpertParams& e = params.experts[k];
            const double mu = e.beta.dot(data.X.row(i));
            cache.d(i, k) = (data.y(i) - mu) / e.sigma();
            logdens(i, k) = expert_logpdf(family, e, data.y(i), mu);
            terms[k] = logpi(k) + logdens(i, k);
        }
        const double lse = num::log_sum_exp(terms);
        total += lse;
        for (int k = 0; k < K; ++k) {
            cache.tau(i, k) = std::exp(terms[k] - lse);
        }
    }
    cache.loglik = total;
    if (!std::isfinite(total)) {
        throw EvaluationError("e_step: non-finite log-likelihood");
    }

    for (int k = 0; k < K; ++k) {
        const ExpertParams& e = params.experts[k];
        const double sigma = e.sigma();
        const double delta = e.delta();
        const double om = 1.0 - delta * delta;
        for (int i = 0; i < n; ++i) {
            const double d = cache.d(i, k);
            const double resid = d * sigma;
            switch (family) {
                case Family::Normal:
                    break;
                case Family::SkewNormal: {
                    // Half-normal posterior of the latent U.
                    const double mu_u = delta * resid;
                    const double sigma_u = std::sqrt(om) * sigma;
                    const double mills = num::inverse_mills(e.lambda * d);
                    cache.e1(i, k) = mu_u + sigma_u * mills;
                    cache.e2(i, k) = mu_u * mu_u + sigma_u * sigma_u +
                                     mu_u * sigma_u * mills;
                    break;
                }
                case Family::StudentT: {
                    const double w = (e.nu + 1.0) / (e.nu + d * d);
                    cache.w(i, k) = w;
                    cache.e3(i, k) = std::log(w) +
                                     num::digamma(0.5 * (e.nu + 1.0)) -
                                     std::log(0.5 * (e.nu + 1.0));
                    break;
                }
                case Family::SkewT: {
                    const double nu = e.nu;
                    const double d2 = d * d;
                    const double M = e.lambda * d * std::sqrt((nu + 1.0) / (nu + d2));
                    cache.M(i, k) = M;
                    const double log_T1 = t_log_cdf(M, nu + 1.0);
                    const double log_T3 =
                        t_log_cdf(M * std::sqrt((nu + 3.0) / (nu + 1.0)), nu + 3.0);
                    const double w = (nu + 1.0) / (nu + d2) * std::exp(log_T3 - log_T1);
                    cache.w(i, k) = w;
                    // Correction term shared by e1 and e2; the density in the
                    // denominator is the component skew-t density, matching
                    // the exact posterior-moment derivation.
                    const double log_corr =
                        0.5 * std::log(om) - std::log(M_PI) - logdens(i, k) -
                        (0.5 * nu + 1.0) * std::log1p(d2 / (nu * om));
                    const double corr = std::exp(log_corr);
                    cache.e1(i, k) = delta * resid * w + corr;
                    cache.e2(i, k) = delta * delta * resid * resid * w +
                                     om * e.sigma2 + delta * resid * corr;
                    // One-step-late E[log W]: integral remainder set to zero.
                    const double t_ratio =
                        std::exp(num::student_t_logpdf(M, nu + 1.0) - log_T1);
                    cache.e3(i, k) = w - std::log(0.5 * (nu + d2)) -
                                     (nu + 1.0) / (nu + d2) +
                                     num::digamma(0.5 * (nu + 1.0)) +
                                     e.lambda * d * (d2 - 1.0) /
                                         std::sqrt((nu + 1.0) * std::pow(nu + d2, 3)) *
                                         t_ratio;
                    break;
                }
            }
        }
    }
    return cache;
}

gating::GatingParams cm_step_gate(const EStepCache& cache, const Dataset& data,
                                  const gating::GatingParams& current) {
    return gating::irls_maximize_q1(current, cache.tau, data.R);
}

namespace {

// Weighted least squares with a ridge fallback when the Gram matrix is
// near singular.
Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights,
                            const Eigen::VectorXd& target) {
    const Eigen::MatrixXd Xw = weights.asDiagonal() * X;
    Eigen::MatrixXd gram = X.transpose() * Xw;
    const Eigen::VectorXd rhs = Xw.transpose() * target;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd beta = ldlt.solve(rhs);
    const double resid_norm = (gram * beta - rhs).norm();
    if (!beta.allFinite() || resid_norm > 1e-8 * (1.0 + rhs.norm())) {
        gram.diagonal().array() += 1e-10 * gram.trace();
        beta = gram.ldlt().solve(rhs);
    }
    return beta;
}

struct DeltaObjective {
    // delta-dependent part of Q2; a and b collect the data sums so that
    // Q2(delta) = -0.5 log(1-delta^2) * s + (delta * a - b) / (1 - delta^2).
    double s;  // sum of tau
    double a;
    double b;

    double value(double delta) const {
        const double om = 1.0 - delta * delta;
        return -0.5 * std::log(om) * s + (delta * a - b) / om;
    }
    // Stationarity in delta, multiplied through by (1-delta^2)^2.
    double score(double delta) const {
        const double om = 1.0 - delta * delta;
        return delta * om * s + (1.0 + delta * delta) * a - 2.0 * delta * b;
    }
};

// Root of the delta score on (-1, 1). The score can have several roots; the
// conditional update follows the one nearest the current iterate whose Q2
// does not fall below the current value, which keeps the CM path continuous
// in delta while preserving the ascent property. If no root qualifies, the
// highest-Q2 root is taken, and with no root at all a grid argmax of Q2.
double solve_delta(const DeltaObjective& obj, double delta_old) {
    constexpr double kEdge = 1e-6;
    constexpr int kGrid = 201;
    const double lo = -1.0 + kEdge;
    const double hi = 1.0 - kEdge;
    const double q_old = obj.value(delta_old);
    double best_delta = 0.0;
    double best_q = -std::numeric_limits<double>::infinity();
    double near_delta = 0.0;
    double near_dist = std::numeric_limits<double>::infinity();
    double prev_x = lo;
    double prev_f = obj.score(lo);
    bool found_root = false;
    bool found_near = false;
    for (int j = 1; j < kGrid; ++j) {
        const double x = lo + (hi - lo) * j / (kGrid - 1);
        const double f = obj.score(x);
        if ((prev_f <= 0.0) != (f <= 0.0)) {
            try {
                const double root = num::brent_root(
                    [&obj](double t) { return obj.score(t); }, {prev_x, x});
                const double q = obj.value(root);
                if (q > best_q) {
                    best_q = q;
                    best_delta = root;
                }
                const double dist = std::fabs(root - delta_old);
                if (q >= q_old && dist < near_dist) {
                    near_dist = dist;
                    near_delta = root;
                    found_near = true;
                }
                found_root = true;
            } catch (const num::RootError&) {
            }
        }
        prev_x = x;
        prev_f = f;
    }
    if (found_near) return near_delta;
    if (found_root) return best_delta;
    for (int j = 0; j < kGrid; ++j) {
        const double x = lo + (hi - lo) * j / (kGrid - 1);
        const double q = obj.value(x);
        if (q > best_q) {
            best_q = q;
            best_delta = x;
        }
    }
    return best_delta;
}

struct NuObjective {
    // Q3(nu) = sum tau * [-lgamma(nu/2) + (nu/2) log(nu/2)] - (nu/2) sw + c * se
    // with c = nu/2 (skew-t) or nu/2 - 1 (t).
    double s;        // sum of tau
    double sw;       // sum of tau * w
    double se;       // sum of tau * E[log W]
    double extra;    // constant appended to the score (t-family carry-over term)
    bool half_shift; // true: coefficient nu/2 - 1 on E[log W]

    double value(double nu) const {
        const double h = 0.5 * nu;
        const double coef = half_shift ? (h - 1.0) : h;
        return s * (-num::log_gamma(h) + h * std::log(h)) - h * sw + coef * se;
    }
    double score(double nu) const {
        const double h = 0.5 * nu;
        return -num::digamma(h) + std::log(h) + 1.0 + (se - sw) / s + extra;
    }
};

double solve_nu(const NuObjective& obj, double nu_old) {
    num::Bracket bracket{0.5, 200.0};
    double flo = obj.score(bracket.lo);
    double fhi = obj.score(bracket.hi);
    if ((flo > 0.0) == (fhi > 0.0)) {
        bracket.hi = 1e4;
        fhi = obj.score(bracket.hi);
    }
    double nu_new;
    if ((flo > 0.0) == (fhi > 0.0)) {
        // No crossing: take the bracket end with the larger Q3, which covers
        // the nu -> infinity normal limit.
        nu_new = obj.value(bracket.lo) > obj.value(bracket.hi) ? bracket.lo
                                                              : bracket.hi;
    } else {
        try {
            nu_new = num::brent_root([&obj](double nu) { return obj.score(nu); },
                                     bracket);
        } catch (const num::RootError&) {
            return nu_old;
        }
    }
    return obj.value(nu_new) >= obj.value(nu_old) ? nu_new : nu_old;
}

}  // namespace

MoEParams cm_step_experts(const EStepCache& cache, const Dataset& data,
                          Family family, const MoEParams& current,
                          const FitOptions& opts, double sigma2_floor) {
    const int n = data.n();
    const int K = current.K();
    MoEParams next = current;
    for (int k = 0; k < K; ++k) {
        const ExpertParams& cur = current.experts[k];
        ExpertParams& upd = next.experts[k];
        const Eigen::VectorXd tau = cache.tau.col(k);
        const double tau_sum = tau.sum();
        const double delta_old = cur.delta();

        switch (family) {
            case Family::Normal: {
                upd.beta = weighted_ls(data.X, tau, data.y);
                const Eigen::VectorXd resid = data.y - data.X * upd.beta;
                upd.sigma2 = tau.dot(resid.cwiseProduct(resid)) / tau_sum;
                break;
            }
            case Family::SkewNormal: {
                const Eigen::VectorXd e1 = cache.e1.col(k);
                const Eigen::VectorXd target = data.y - delta_old * e1;
                upd.beta = weighted_ls(data.X, tau, target);
                const Eigen::VectorXd resid = data.y - data.X * upd.beta;
                const auto sigma2_of = [&](double delta_cross, double delta_denom) {
                    const double numer =
                        tau.dot(resid.cwiseProduct(resid) -
                                2.0 * delta_cross * e1.cwiseProduct(resid) +
                                cache.e2.col(k));
                    return numer /
                           (2.0 * (1.0 - delta_denom * delta_denom) * tau_sum);
                };
                upd.sigma2 = sigma2_of(delta_old, delta_old);
                if (upd.sigma2 > 0.0) {
                    DeltaObjective obj;
                    obj.s = tau_sum;
                    obj.a = tau.dot(e1.cwiseProduct(resid)) / upd.sigma2;
                    obj.b = 0.5 * tau.dot(cache.e2.col(k) +
                                          resid.cwiseProduct(resid)) /
                            upd.sigma2;
                    const double delta_new = solve_delta(obj, delta_old);
                    upd.lambda = dist::lambda_of_delta(delta_new);
                    if (opts.strict_delta_iterate) {
                        upd.sigma2 = sigma2_of(delta_new, delta_new);
                    }
                }
                break;
            }
            case Family::StudentT: {
                const Eigen::VectorXd w = cache.w.col(k);
                const Eigen::VectorXd tw = tau.cwiseProduct(w);
                upd.beta = weighted_ls(data.X, tw, data.y);
                const Eigen::VectorXd resid = data.y - data.X * upd.beta;
                const double divisor = opts.kent_sigma_divisor ? tw.sum() : tau_sum;
                upd.sigma2 = tw.dot(resid.cwiseProduct(resid)) / divisor;
                if (upd.sigma2 > 0.0) {
                    // ECM: refresh the gamma weights at the updated (beta, sigma2)
                    // before solving for nu.
                    NuObjective obj;
                    obj.s = tau_sum;
                    obj.sw = 0.0;
                    obj.se = 0.0;
                    const double carry = num::digamma(0.5 * (cur.nu + 1.0)) -
                                         std::log(0.5 * (cur.nu + 1.0));
                    for (int i = 0; i < n; ++i) {
                        const double d2 =
                            resid(i) * resid(i) / upd.sigma2;
                        const double wi = (cur.nu + 1.0) / (cur.nu + d2);
                        obj.sw += tau(i) * wi;
                        obj.se += tau(i) * (std::log(wi) + carry);
                    }
                    obj.extra = 0.0;
                    obj.half_shift = true;
                    upd.nu = solve_nu(obj, cur.nu);
                }
                break;
            }
            case Family::SkewT: {
                const Eigen::VectorXd w = cache.w.col(k);
                const Eigen::VectorXd e1 = cache.e1.col(k);
                const Eigen::VectorXd e2 = cache.e2.col(k);
                const Eigen::VectorXd tw = tau.cwiseProduct(w);
                const Eigen::VectorXd target =
                    w.cwiseProduct(data.y) - delta_old * e1;
                // Regress w*y - delta*e1 on X with plain tau weighting; the
                // Gram side carries tau*w.
                const Eigen::MatrixXd Xw = tw.asDiagonal() * data.X;
                Eigen::MatrixXd gram = data.X.transpose() * Xw;
                const Eigen::VectorXd rhs =
                    data.X.transpose() * (tau.asDiagonal() * target);
                Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
                upd.beta = ldlt.solve(rhs);
                if (!upd.beta.allFinite()) {
                    gram.diagonal().array() += 1e-10 * gram.trace();
                    upd.beta = gram.ldlt().solve(rhs);
                }
                const Eigen::VectorXd resid = data.y - data.X * upd.beta;
                const auto sigma2_of = [&](double delta_cross, double delta_denom) {
                    const double numer =
                        tau.dot(w.cwiseProduct(resid.cwiseProduct(resid)) -
                                2.0 * delta_cross * e1.cwiseProduct(resid) + e2);
                    return numer /
                           (2.0 * (1.0 - delta_denom * delta_denom) * tau_sum);
                };
                upd.sigma2 = sigma2_of(delta_old, delta_old);
                if (upd.sigma2 > 0.0) {
                    const double sigma_new = std::sqrt(upd.sigma2);
                    DeltaObjective obj;
                    obj.s = tau_sum;
                    obj.a = tau.dot(e1.cwiseProduct(resid)) / upd.sigma2;
                    obj.b = 0.5 *
                            tau.dot(w.cwiseProduct(resid.cwiseProduct(resid)) + e2) /
                            upd.sigma2;
                    const double delta_new = solve_delta(obj, delta_old);
                    upd.lambda = dist::lambda_of_delta(delta_new);
                    if (opts.strict_delta_iterate) {
                        upd.sigma2 = sigma2_of(delta_new, delta_new);
                    }
                    // ECM refresh of w and E[log W] at the updated (beta, sigma2),
                    // lambda and nu held at the current iterate.
                    NuObjective obj3;
                    obj3.s = tau_sum;
                    obj3.sw = 0.0;
                    obj3.se = 0.0;
                    obj3.extra = 0.0;
                    obj3.half_shift = false;
                    const double nu = cur.nu;
                    for (int i = 0; i < n; ++i) {
                        const double d = resid(i) / sigma_new;
                        const double d2 = d * d;
                        const double M =
                            cur.lambda * d * std::sqrt((nu + 1.0) / (nu + d2));
                        const double log_T1 = t_log_cdf(M, nu + 1.0);
                        const double log_T3 = t_log_cdf(
                            M * std::sqrt((nu + 3.0) / (nu + 1.0)), nu + 3.0);
                        const double wi =
                            (nu + 1.0) / (nu + d2) * std::exp(log_T3 - log_T1);
                        const double t_ratio = std::exp(
                            num::student_t_logpdf(M, nu + 1.0) - log_T1);
                        const double e3i =
                            wi - std::log(0.5 * (nu + d2)) -
                            (nu + 1.0) / (nu + d2) +
                            num::digamma(0.5 * (nu + 1.0)) +
                            cur.lambda * d * (d2 - 1.0) /
                                std::sqrt((nu + 1.0) * std::pow(nu + d2, 3)) *
                                t_ratio;
                        obj3.sw += tau(i) * wi;
                        obj3.se += tau(i) * e3i;
                    }
                    upd.nu = solve_nu(obj3, cur.nu);
                }
                break;
            }
        }
        if (!(upd.sigma2 > sigma2_floor)) {
            throw DegenerateFitError("cm_step_experts: scale collapsed for component " +
                                     std::to_string(k + 1));
        }
    }
    return next;
}

MoEParams initialize(const MoESpec& spec, const Dataset& data, std::uint64_t seed,
                     bool gate_at_zero, const FitOptions& opts) {
    const int n = data.n();
    const int K = spec.K;
    if (n < K) throw std::invalid_argument("initialize: need n >= K");
    Rng rng(seed);
    MoEParams params;
    params.gate = gating::GatingParams::zeros(K, spec.q);
    if (!gate_at_zero) {
        for (int k = 0; k < K - 1; ++k) {
            for (int j = 0; j <= spec.q; ++j) {
                params.gate.alpha(k, j) = rng.normal();
            }
        }
    }
    // Random K-partition; resample until every cluster is populated.
    std::vector<int> labels(n);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        std::vector<int> counts(K, 0);
        for (int i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(K));
            ++counts[labels[i]];
        }
        ok = true;
        for (int k = 0; k < K; ++k) {
            if (counts[k] < spec.p + 2) ok = false;
        }
    }
    if (!ok) throw std::invalid_argument("initialize: could not build a non-empty partition");

    params.experts.resize(K);
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (labels[i] == k) ind(i) = 1.0;
        }
        ExpertParams& e = params.experts[k];
        const Eigen::MatrixXd Xw = ind.asDiagonal() * data.X;
        Eigen::MatrixXd gram = data.X.transpose() * Xw;
        gram.diagonal().array() += 1e-10 * gram.trace();
        e.beta = gram.ldlt().solve(Xw.transpose() * data.y);
        const Eigen::VectorXd resid = data.y - data.X * e.beta;
        e.sigma2 = ind.dot(resid.cwiseProduct(resid)) / ind.sum();
        if (!(e.sigma2 > 0.0)) e.sigma2 = 1e-6;
        if (family_has_lambda(spec.family) && !opts.pin_lambda_zero) {
            e.lambda = dist::lambda_of_delta(rng.uniform(-0.95, 0.95));
        } else {
            e.lambda = 0.0;
        }
        if (family_has_nu(spec.family) && !opts.pin_nu_infinite) {
            e.nu = rng.uniform(1.0, 200.0);
        } else {
            e.nu = 1e8;
        }
    }
    return params;
}

FitResult fit_single(const MoESpec& spec, const Dataset& data, const MoEParams& start,
                     const FitOptions& opts, std::uint64_t seed) {
    const Family fam = effective_family(spec, opts);
    const double yvar =
        (data.y.array() - data.y.mean()).square().sum() / data.n();
    const double floor = opts.sigma2_floor_scale * std::max(yvar, 1e-300);

    FitResult result;
    result.seed = seed;
    result.params = start;
    EStepCache cache;
    for (int m = 0; m <= opts.max_iters; ++m) {
        cache = e_step(result.params, fam, data);
        result.loglik_trace.push_back(cache.loglik);
        result.n_iters = m;
        if (m > 0) {
            const double prev = result.loglik_trace[m - 1];
            const double rel = (cache.loglik - prev) / std::fabs(prev);
            if (std::fabs(rel) <= opts.tol) {
                result.converged = true;
                break;
            }
        }
        if (m == opts.max_iters) break;
        result.params.gate = cm_step_gate(cache, data, result.params.gate);
        result.params = cm_step_experts(cache, data, fam, result.params, opts, floor);
    }
    result.tau = cache.tau;
    return result;
}

namespace {

// Sum of the largest (1 - trim) * n per-observation log mixture densities.
// Comparing fits on this trimmed likelihood discounts improvements that are
// concentrated on a small fraction of extreme observations.
double trimmed_loglik(const MoEParams& params, const MoESpec& spec,
                      const Dataset& data, double trim) {
    const int n = data.n();
    const int K = params.K();
    std::vector<double> terms(K);
    std::vector<double> per_point(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd logpi =
            gating::gate_log_probs(params.gate, data.R.row(i).transpose());
        for (int k = 0; k < K; ++k) {
            const double mu = params.experts[k].beta.dot(data.X.row(i));
            terms[k] = logpi(k) + expert_logpdf(spec.family, params.experts[k],
                                                data.y(i), mu);
        }
        per_point[i] = num::log_sum_exp(terms);
    }
    const int drop = std::clamp(static_cast<int>(trim * n), 0, n - 1);
    std::nth_element(per_point.begin(), per_point.begin() + drop, per_point.end());
    return std::accumulate(per_point.begin() + drop, per_point.end(), 0.0);
}

}  // namespace

FitResult fit(const MoESpec& spec, const Dataset& data, const FitOptions& opts) {
    spec.validate();
    if (data.n() < spec.K * (spec.p + 2)) {
        throw std::invalid_argument("fit: need n >= K*(p+2) observations");
    }
    const bool skew_t_flow = spec.family == Family::SkewT &&
                             !opts.pin_lambda_zero && !opts.pin_nu_infinite;
    bool have_best = false;
    FitResult best;
    double best_score = 0.0;
    std::string last_error = "no start succeeded";
    for (int s = 0; s < opts.n_starts; ++s) {
        const std::uint64_t start_seed = Rng::derive_seed(opts.seed, s);
        try {
            FitResult run;
            if (skew_t_flow) {
                // Two-stage skew-t fit. A free skew-t ML fit can absorb a
                // small fraction of gross outliers into one component's skew
                // tail; the resulting solution has a higher likelihood but a
                // heavily distorted mean function. So each start first runs
                // the symmetric (lambda = 0) ECM to convergence, then
                // releases the skewness from that solution, and keeps the
                // released solution only when it also wins on the trimmed
                // likelihood, i.e. when the gain is carried by the bulk of
                // the data rather than by the discarded extreme tail.
                FitOptions symmetric = opts;
                symmetric.pin_lambda_zero = true;
                const MoEParams sym_init = initialize(
                    spec, data, start_seed, /*gate_at_zero=*/s == 0, symmetric);
                run = fit_single(spec, data, sym_init, symmetric, start_seed);
                try {
                    FitResult released =
                        fit_single(spec, data, run.params, opts, start_seed);
                    const double trim = opts.skew_release_trim;
                    if (trimmed_loglik(released.params, spec, data, trim) >
                        trimmed_loglik(run.params, spec, data, trim)) {
                        run = std::move(released);
                    }
                } catch (const DegenerateFitError&) {
                    // Keep the symmetric solution for this start.
                } catch (const EvaluationError&) {
                }
            } else {
                const MoEParams init = initialize(
                    spec, data, start_seed, /*gate_at_zero=*/s == 0, opts);
                run = fit_single(spec, data, init, opts, start_seed);
            }
            // Starts are compared on the same criterion used for the
            // release decision so that a start that drifted into an
            // outlier-absorbing solution cannot displace a robust one.
            const double score =
                skew_t_flow
                    ? trimmed_loglik(run.params, spec, data,
                                     opts.skew_release_trim)
                    : run.loglik();
            if (!have_best || score > best_score) {
                best = std::move(run);
                best_score = score;
                have_best = true;
            }
        } catch (const DegenerateFitError& err) {
            last_error = err.what();
        } catch (const EvaluationError& err) {
            last_error = err.what();
        }
    }
    if (!have_best) {
        throw DegenerateFitError("fit: all starts degenerate (" + last_error + ")");
    }
    return best;
}

}  // namespace nnmoe
