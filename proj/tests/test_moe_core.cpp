#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "nnmoe/moe.hpp"
#include "nnmoe/numerics.hpp"
#include "nnmoe/simulation.hpp"
#include "oracles.hpp"

using namespace nnmoe;
namespace num = nnmoe::numerics;

namespace {

double gamma_pdf(double w, double shape, double rate) {
    return std::exp(shape * std::log(rate) - num::log_gamma(shape) +
                    (shape - 1.0) * std::log(w) - rate * w);
}

double normal_pdf(double y, double mu, double var) {
    return std::exp(dist::normal_logpdf(y, mu, var));
}

// Posterior moments of the skew-normal latent U given y, by 1-D quadrature
// over the complete-data factorization U ~ |N(0, sigma^2)|,
// Y | U = u ~ N(mu + delta u, (1 - delta^2) sigma^2).
struct SnPosterior {
    double e1;
    double e2;
};

SnPosterior sn_posterior_quadrature(double y, double mu, double sigma2,
                                    double lambda) {
    const double delta = dist::delta_of_lambda(lambda);
    const double om = 1.0 - delta * delta;
    const double sigma = std::sqrt(sigma2);
    // The posterior of U is N(mu_u, sigma_u^2) truncated to u > 0. Its mass
    // sits near mu_u when mu_u > 0, and decays within sigma_u^2 / |mu_u| of
    // the origin when mu_u < 0 (deep-tail y with opposing skew).
    const double mu_u = delta * (y - mu);
    const double sigma_u = std::sqrt(om) * sigma;
    const double u_scale = mu_u > 0.0
                               ? mu_u + sigma_u
                               : sigma_u * sigma_u / (sigma_u - mu_u);
    // Work with log densities and subtract the probed maximum: the raw joint
    // underflows for deep-tail y, and an O(1) integrand lets the absolute
    // quadrature tolerance act as a relative one. The constant cancels.
    const auto log_joint = [&](double u) {
        return std::log(2.0) + dist::normal_logpdf(u, 0.0, sigma2) +
               dist::normal_logpdf(y, mu + delta * u, om * sigma2);
    };
    double logc = -std::numeric_limits<double>::infinity();
    for (double fu : {0.0, 0.5, 1.0, 2.0}) {
        logc = std::max(logc, log_joint(fu * u_scale));
    }
    const auto joint = [&](double u) { return std::exp(log_joint(u) - logc); };
    const double denom = oracles::integrate_half_line(joint, 1e-12, u_scale);
    const double m1 = oracles::integrate_half_line(
        [&](double u) { return u * joint(u); }, 1e-12, u_scale);
    const double m2 = oracles::integrate_half_line(
        [&](double u) { return u * u * joint(u); }, 1e-12, u_scale);
    return {m1 / denom, m2 / denom};
}

// Posterior moments of (W, U) for the skew-t complete-data hierarchy,
// W ~ Gamma(nu/2, nu/2), U | w ~ |N(0, sigma^2 / w)|,
// Y | u, w ~ N(mu + delta u, (1 - delta^2) sigma^2 / w), by nested quadrature.
struct StPosterior {
    double density;  // marginal f(y), a free cross-check
    double w;        // E[W | y]
    double e1;       // E[W U | y]
    double e2;       // E[W U^2 | y]
};

StPosterior st_posterior_quadrature(double y, double mu, double sigma2,
                                    double lambda, double nu) {
    const double delta = dist::delta_of_lambda(lambda);
    const double om = 1.0 - delta * delta;
    const double sigma = std::sqrt(sigma2);
    const double d2 = (y - mu) * (y - mu) / sigma2;
    // The W posterior concentrates near (nu+1)/(nu+d^2); given w, the U
    // posterior sits within a few sigma/sqrt(w) of delta * (y - mu).
    const double w_scale = (nu + 1.0) / (nu + d2);
    const auto joint = [&](double w, double u) {
        return gamma_pdf(w, 0.5 * nu, 0.5 * nu) * 2.0 *
               normal_pdf(u, 0.0, sigma2 / w) *
               normal_pdf(y, mu + delta * u, om * sigma2 / w);
    };
    // Rescale the integrand to O(1) so the absolute tolerance of the
    // adaptive rule translates into relative accuracy; the constant cancels
    // in the posterior ratios and is restored for the marginal density.
    double c = 0.0;
    for (double fw : {0.3, 1.0, 3.0}) {
        for (double fu : {0.0, 0.5, 1.0, 2.0}) {
            const double w = fw * w_scale;
            const double u = fu * (sigma / std::sqrt(w) +
                                   std::fabs(delta * (y - mu)));
            c = std::max(c, joint(w, u));
        }
    }
    const auto integral = [&](auto&& weight) {
        return oracles::integrate_half_line(
            [&](double w) {
                const double u_scale =
                    sigma / std::sqrt(w) + std::fabs(delta * (y - mu));
                return oracles::integrate_half_line(
                    [&](double u) { return weight(w, u) * joint(w, u) / c; },
                    1e-12, u_scale);
            },
            1e-9, w_scale);
    };
    StPosterior out;
    const double denom = integral([](double, double) { return 1.0; });
    out.density = denom * c;
    out.w = integral([](double w, double) { return w; }) / denom;
    out.e1 = integral([](double w, double u) { return w * u; }) / denom;
    out.e2 = integral([](double w, double u) { return w * u * u; }) / denom;
    return out;
}

MoESpec two_component_spec(Family family) {
    MoESpec spec;
    spec.family = family;
    spec.K = 2;
    return spec;
}

}  // namespace

TEST_CASE("SNMoE conditional expectations match 1-D quadrature") {
    MoESpec spec = two_component_spec(Family::SkewNormal);
    spec.K = 1;
    MoEParams params;
    params.gate = gating::GatingParams::zeros(1, 1);
    params.experts.resize(1);
    int checked = 0;
    for (double lambda : {-10.0, -1.0, 0.5, 3.0}) {
        for (double sigma2 : {0.04, 1.0}) {
            for (double y : {-1.5, -0.2, 0.3, 2.0}) {
                ExpertParams& e = params.experts[0];
                e.beta = Eigen::Vector2d(0.1, 0.4);
                e.sigma2 = sigma2;
                e.lambda = lambda;
                Eigen::VectorXd x(1), yy(1);
                x << 0.5;
                yy << y;
                const Dataset data = Dataset::build(x, yy, 1, 1);
                const EStepCache cache = e_step(params, Family::SkewNormal, data);
                const double mu = e.beta.dot(data.X.row(0));
                const SnPosterior post =
                    sn_posterior_quadrature(y, mu, sigma2, lambda);
                CHECK(cache.e1(0, 0) == doctest::Approx(post.e1).epsilon(1e-6));
                CHECK(cache.e2(0, 0) == doctest::Approx(post.e2).epsilon(1e-6));
                ++checked;
            }
        }
    }
    CHECK(checked == 32);
}

TEST_CASE("TMoE conditional expectations match the gamma posterior") {
    MoEParams params;
    params.gate = gating::GatingParams::zeros(1, 1);
    params.experts.resize(1);
    for (double nu : {1.5, 5.0, 30.0}) {
        for (double y : {-2.0, 0.1, 1.2}) {
            ExpertParams& e = params.experts[0];
            e.beta = Eigen::Vector2d(0.0, 1.0);
            e.sigma2 = 0.25;
            e.nu = nu;
            Eigen::VectorXd x(1), yy(1);
            x << -0.3;
            yy << y;
            const Dataset data = Dataset::build(x, yy, 1, 1);
            const EStepCache cache = e_step(params, Family::StudentT, data);
            const double mu = e.beta.dot(data.X.row(0));
            const double d2 = (y - mu) * (y - mu) / e.sigma2;
            // Posterior of W given y is Gamma((nu+1)/2, (nu+d^2)/2).
            const double shape = 0.5 * (nu + 1.0);
            const double rate = 0.5 * (nu + d2);
            const auto pw = [&](double w) { return gamma_pdf(w, shape, rate); };
            const double Ew = oracles::integrate_half_line(
                [&](double w) { return w * pw(w); }, 1e-13);
            const double Elogw = oracles::integrate_half_line(
                [&](double w) { return std::log(w) * pw(w); }, 1e-12);
            CHECK(cache.w(0, 0) == doctest::Approx(Ew).epsilon(1e-8));
            CHECK(cache.e3(0, 0) == doctest::Approx(Elogw).epsilon(1e-8));
        }
    }
}

TEST_CASE("STMoE conditional expectations match 2-D quadrature") {
    MoEParams params;
    params.gate = gating::GatingParams::zeros(1, 1);
    params.experts.resize(1);
    for (double lambda : {-4.0, 0.7, 3.0}) {
        for (double nu : {3.0, 8.0}) {
            for (double y : {-1.0, 0.2, 1.4}) {
                ExpertParams& e = params.experts[0];
                e.beta = Eigen::Vector2d(0.1, -0.5);
                e.sigma2 = 0.5;
                e.lambda = lambda;
                e.nu = nu;
                Eigen::VectorXd x(1), yy(1);
                x << 0.4;
                yy << y;
                const Dataset data = Dataset::build(x, yy, 1, 1);
                const EStepCache cache = e_step(params, Family::SkewT, data);
                const double mu = e.beta.dot(data.X.row(0));
                const StPosterior post =
                    st_posterior_quadrature(y, mu, e.sigma2, lambda, nu);
                // Cross-check the marginal against the closed-form density.
                CHECK(std::log(post.density) ==
                      doctest::Approx(dist::skew_t_logpdf(
                                          y, {mu, e.sigma2, lambda, nu}))
                          .epsilon(1e-7));
                CHECK(cache.w(0, 0) == doctest::Approx(post.w).epsilon(1e-5));
                CHECK(cache.e1(0, 0) == doctest::Approx(post.e1).epsilon(1e-5));
                CHECK(cache.e2(0, 0) == doctest::Approx(post.e2).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("STMoE E[log W] matches an independent OSL recomputation") {
    MoEParams params;
    params.gate = gating::GatingParams::zeros(1, 1);
    params.experts.resize(1);
    ExpertParams& e = params.experts[0];
    e.beta = Eigen::Vector2d(0.0, 0.0);
    e.sigma2 = 1.0;
    for (double lambda : {-6.0, 1.5}) {
        for (double nu : {2.5, 12.0}) {
            for (double y : {-2.2, 0.3, 1.1}) {
                e.lambda = lambda;
                e.nu = nu;
                Eigen::VectorXd x(1), yy(1);
                x << 0.0;
                yy << y;
                const Dataset data = Dataset::build(x, yy, 1, 1);
                const EStepCache cache = e_step(params, Family::SkewT, data);
                const double d = y;  // mu = 0, sigma = 1
                const double d2 = d * d;
                const double M = lambda * d * std::sqrt((nu + 1.0) / (nu + d2));
                const double T1 = num::student_t_cdf(M, nu + 1.0);
                const double osl =
                    cache.w(0, 0) - std::log(0.5 * (nu + d2)) -
                    (nu + 1.0) / (nu + d2) + num::digamma(0.5 * (nu + 1.0)) +
                    lambda * d * (d2 - 1.0) /
                        std::sqrt((nu + 1.0) * std::pow(nu + d2, 3)) *
                        num::student_t_pdf(M, nu + 1.0) / T1;
                CHECK(cache.e3(0, 0) == doctest::Approx(osl).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("log-likelihood equals a naive direct summation") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::SkewT, 120, 5));
    const MoESpec spec = two_component_spec(Family::SkewT);
    const MoEParams params =
        simulation::benchmark_scenario(Family::SkewT, 1, 0).true_params;
    const double ll = log_likelihood(params, spec, gen.data);
    long double naive = 0.0L;
    for (int i = 0; i < gen.data.n(); ++i) {
        const Eigen::VectorXd pi =
            gating::gate_probs(params.gate, gen.data.R.row(i).transpose());
        long double mix = 0.0L;
        for (int k = 0; k < 2; ++k) {
            const double mu = params.experts[k].beta.dot(gen.data.X.row(i));
            mix += static_cast<long double>(pi(k)) *
                   std::exp(static_cast<long double>(expert_logpdf(
                       Family::SkewT, params.experts[k], gen.data.y(i), mu)));
        }
        naive += std::log(mix);
    }
    CHECK(ll == doctest::Approx(static_cast<double>(naive)).epsilon(1e-12));
}

TEST_CASE("tau rows are a proper posterior") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::StudentT, 200, 9));
    const MoEParams params =
        simulation::benchmark_scenario(Family::StudentT, 1, 0).true_params;
    const EStepCache cache = e_step(params, Family::StudentT, gen.data);
    for (int i = 0; i < gen.data.n(); ++i) {
        CHECK(cache.tau.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(cache.tau.row(i).minCoeff() >= 0.0);
    }
}

TEST_CASE("delta and nu updates satisfy their stationarity equations") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::SkewT, 400, 21));
    MoEParams params = simulation::benchmark_scenario(Family::SkewT, 1, 0).true_params;
    // Perturb so the CM step has work to do.
    params.experts[0].lambda = 1.0;
    params.experts[1].lambda = -2.0;
    const EStepCache cache = e_step(params, Family::SkewT, gen.data);
    FitOptions opts;
    const MoEParams next =
        cm_step_experts(cache, gen.data, Family::SkewT, params, opts, 1e-14);
    for (int k = 0; k < 2; ++k) {
        const ExpertParams& e = next.experts[k];
        const double delta = e.delta();
        const double sigma = e.sigma();
        double s = 0.0, a = 0.0, b = 0.0;
        for (int i = 0; i < gen.data.n(); ++i) {
            const double tau = cache.tau(i, k);
            const double resid = gen.data.y(i) - e.beta.dot(gen.data.X.row(i));
            const double d = resid / sigma;
            s += tau;
            a += tau * d * cache.e1(i, k) / sigma;
            b += tau * (cache.w(i, k) * d * d + cache.e2(i, k) / e.sigma2);
        }
        const double score =
            delta * (1.0 - delta * delta) * s + (1.0 + delta * delta) * a -
            delta * b;
        // Scale by the magnitude of the sums involved.
        CHECK(std::fabs(score) / std::max(1.0, std::fabs(b)) < 1e-6);
    }
}

TEST_CASE("SNMoE delta root maximizes the planted-skew objective") {
    // Data generated with a strong skew should pull delta well past the
    // mild starting values within one CM step. The start must be off zero:
    // lambda = 0 is an exact stationary point of the delta update because
    // the WLS residuals are orthogonal to the intercept column.
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::SkewNormal, 3000, 31));
    MoEParams params =
        simulation::benchmark_scenario(Family::SkewNormal, 1, 0).true_params;
    params.experts[0].lambda = 0.5;
    params.experts[1].lambda = -0.5;
    const EStepCache cache = e_step(params, Family::SkewNormal, gen.data);
    FitOptions opts;
    const MoEParams next =
        cm_step_experts(cache, gen.data, Family::SkewNormal, params, opts, 1e-14);
    CHECK(next.experts[0].delta() > 0.3);   // true lambda_1 = 3
    CHECK(next.experts[1].delta() < -0.3);  // true lambda_2 = -10
}

TEST_CASE("EM traces are monotone for every family") {
    for (Family family : {Family::Normal, Family::SkewNormal, Family::StudentT,
                          Family::SkewT}) {
        const auto gen =
            simulation::generate(simulation::benchmark_scenario(family, 300, 3));
        MoESpec spec = two_component_spec(family);
        FitOptions opts;
        opts.n_starts = 2;
        opts.max_iters = 300;
        opts.seed = 17;
        const FitResult result = fit(spec, gen.data, opts);
        for (std::size_t m = 1; m < result.loglik_trace.size(); ++m) {
            CHECK(result.loglik_trace[m] >= result.loglik_trace[m - 1] - 1e-8);
        }
    }
}

TEST_CASE("pinned reductions reproduce the normal iterates exactly") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::Normal, 250, 13));
    FitOptions plain;
    const double yvar = (gen.data.y.array() - gen.data.y.mean()).square().sum() /
                        gen.data.n();
    const double floor = plain.sigma2_floor_scale * yvar;

    const auto iterate = [&](Family family, const FitOptions& opts) {
        MoESpec spec = two_component_spec(family);
        const Family eff = effective_family(spec, opts);
        MoEParams params = initialize(spec, gen.data, 42, true, opts);
        std::vector<MoEParams> iterates;
        for (int m = 0; m < 25; ++m) {
            const EStepCache cache = e_step(params, eff, gen.data);
            params.gate = cm_step_gate(cache, gen.data, params.gate);
            params = cm_step_experts(cache, gen.data, eff, params, opts, floor);
            iterates.push_back(params);
        }
        return iterates;
    };

    const auto base = iterate(Family::Normal, plain);
    FitOptions pin_l = plain;
    pin_l.pin_lambda_zero = true;
    FitOptions pin_n = plain;
    pin_n.pin_nu_infinite = true;
    FitOptions pin_both = plain;
    pin_both.pin_lambda_zero = true;
    pin_both.pin_nu_infinite = true;
    const auto reduced = {iterate(Family::SkewNormal, pin_l),
                          iterate(Family::StudentT, pin_n),
                          iterate(Family::SkewT, pin_both)};
    for (const auto& other : reduced) {
        for (std::size_t m = 0; m < base.size(); ++m) {
            CHECK((base[m].gate.alpha - other[m].gate.alpha).cwiseAbs().maxCoeff() <=
                  1e-10);
            for (int k = 0; k < 2; ++k) {
                CHECK((base[m].experts[k].beta - other[m].experts[k].beta)
                          .cwiseAbs()
                          .maxCoeff() <= 1e-10);
                CHECK(std::fabs(base[m].experts[k].sigma2 -
                                other[m].experts[k].sigma2) <= 1e-10);
            }
        }
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::StudentT, 200, 77));
    MoESpec spec = two_component_spec(Family::StudentT);
    FitOptions opts;
    opts.n_starts = 3;
    opts.max_iters = 200;
    opts.seed = 5;
    const FitResult a = fit(spec, gen.data, opts);
    const FitResult b = fit(spec, gen.data, opts);
    CHECK(a.loglik() == b.loglik());
    CHECK((a.params.gate.alpha - b.params.gate.alpha).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 2; ++k) {
        CHECK((a.params.experts[k].beta - b.params.experts[k].beta)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK(a.params.experts[k].sigma2 == b.params.experts[k].sigma2);
        CHECK(a.params.experts[k].nu == b.params.experts[k].nu);
    }
}

TEST_CASE("fit recovers the generating parameters on easy data") {
    const auto gen = simulation::generate(
        simulation::benchmark_scenario(Family::Normal, 800, 4));
    MoESpec spec = two_component_spec(Family::Normal);
    FitOptions opts;
    opts.n_starts = 5;
    opts.seed = 2;
    const FitResult result = fit(spec, gen.data, opts);
    const MoEParams truth =
        simulation::benchmark_scenario(Family::Normal, 1, 0).true_params;
    const Eigen::VectorXd errs =
        simulation::mse_params(truth, result.params, spec);
    // beta entries are the first coordinates after the two gate terms.
    CHECK(errs.segment(2, 2).maxCoeff() < 1e-2);
    CHECK(errs.segment(5, 2).maxCoeff() < 1e-2);
}

TEST_CASE("degenerate inputs raise the documented errors") {
    Eigen::VectorXd x(3), y(3);
    x << 0.0, 0.5, 1.0;
    y << 1.0, 1.0, 1.0;
    const Dataset tiny = Dataset::build(x, y, 1, 1);
    MoESpec spec = two_component_spec(Family::Normal);
    CHECK_THROWS_AS(fit(spec, tiny, FitOptions{}), std::invalid_argument);

    MoESpec bad = spec;
    bad.K = 0;
    CHECK_THROWS_AS(fit(bad, tiny, FitOptions{}), std::invalid_argument);
}
