#include "nnmoe/distributions.hpp"

#include <cmath>

#include "nnmoe/numerics.hpp"

namespace nnmoe::dist {

namespace num = nnmoe::numerics;

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594;
}

double delta_of_lambda(double lambda) {
    return lambda / std::sqrt(1.0 + lambda * lambda);
}

double lambda_of_delta(double delta) {
    return delta / std::sqrt(1.0 - delta * delta);
}

double SkewNormalParams::sigma() const { return std::sqrt(sigma2); }
double StudentTParams::sigma() const { return std::sqrt(sigma2); }
double SkewTParams::sigma() const { return std::sqrt(sigma2); }

void SkewNormalParams::validate() const {
    if (!(sigma2 > 0.0)) throw InvalidParams("skew-normal: sigma2 must be > 0");
}

void StudentTParams::validate() const {
    if (!(sigma2 > 0.0)) throw InvalidParams("t: sigma2 must be > 0");
    if (!(nu > 0.0)) throw InvalidParams("t: nu must be > 0");
}

void SkewTParams::validate() const {
    if (!(sigma2 > 0.0)) throw InvalidParams("skew-t: sigma2 must be > 0");
    if (!(nu > 0.0)) throw InvalidParams("skew-t: nu must be > 0");
}

double normal_logpdf(double y, double mu, double sigma2) {
    const double d2 = (y - mu) * (y - mu) / sigma2;
    return -0.5 * (kLog2Pi + std::log(sigma2) + d2);
}

double skew_normal_logpdf(double y, const SkewNormalParams& p) {
    const double d = (y - p.mu) / p.sigma();
    return std::log(2.0) - 0.5 * std::log(p.sigma2) + num::std_normal_logpdf(d) +
           num::std_normal_logcdf(p.lambda * d);
}

double skew_normal_sample(const SkewNormalParams& p, Rng& rng) {
    const double delta = p.delta();
    const double u = std::fabs(rng.normal()) * p.sigma();
    const double e = rng.normal() * p.sigma();
    return p.mu + delta * u + std::sqrt(1.0 - delta * delta) * e;
}

double student_t_logpdf(double y, const StudentTParams& p) {
    const double d = (y - p.mu) / p.sigma();
    return num::student_t_logpdf(d, p.nu) - 0.5 * std::log(p.sigma2);
}

double student_t_sample(const StudentTParams& p, Rng& rng) {
    const double w = rng.gamma(0.5 * p.nu, 0.5 * p.nu);
    return p.mu + p.sigma() * rng.normal() / std::sqrt(w);
}

double skew_t_logpdf(double y, const SkewTParams& p) {
    const double d = (y - p.mu) / p.sigma();
    const double m = p.lambda * d * std::sqrt((p.nu + 1.0) / (p.nu + d * d));
    const double tail = num::student_t_cdf(m, p.nu + 1.0);
    // T_{nu+1} cdf can underflow for strongly negative arguments; clamp to a
    // representable log value through the t tail bound.
    double log_tail;
    if (tail > 0.0) {
        log_tail = std::log(tail);
    } else {
        log_tail = num::student_t_logpdf(m, p.nu + 1.0) - std::log(-m);
    }
    return std::log(2.0) - 0.5 * std::log(p.sigma2) +
           num::student_t_logpdf(d, p.nu) + log_tail;
}

double skew_t_sample(const SkewTParams& p, Rng& rng) {
    SkewNormalParams sn{0.0, 1.0, p.lambda};
    const double u = skew_normal_sample(sn, rng);
    const double w = rng.gamma(0.5 * p.nu, 0.5 * p.nu);
    return p.mu + p.sigma() * u / std::sqrt(w);
}

double xi_factor(double nu) {
    return std::sqrt(nu / M_PI) *
           std::exp(num::log_gamma(0.5 * (nu - 1.0)) - num::log_gamma(0.5 * nu));
}

Moments normal_moments(double mu, double sigma2) {
    return {mu, sigma2};
}

Moments skew_normal_moments(const SkewNormalParams& p) {
    const double delta = p.delta();
    const double mean = p.mu + std::sqrt(2.0 / M_PI) * delta * p.sigma();
    const double var = (1.0 - (2.0 / M_PI) * delta * delta) * p.sigma2;
    return {mean, var};
}

Moments student_t_moments(const StudentTParams& p) {
    Moments m;
    if (p.nu > 1.0) m.mean = p.mu;
    if (p.nu > 2.0) m.variance = p.nu / (p.nu - 2.0) * p.sigma2;
    return m;
}

Moments skew_t_moments(const SkewTParams& p) {
    Moments m;
    const double delta = p.delta();
    if (p.nu > 1.0) {
        m.mean = p.mu + p.sigma() * delta * xi_factor(p.nu);
    }
    if (p.nu > 2.0) {
        const double xi = xi_factor(p.nu);
        m.variance = (p.nu / (p.nu - 2.0) - delta * delta * xi * xi) * p.sigma2;
    }
    return m;
}

}  // namespace nnmoe::dist
