#pragma once

#include <functional>
#include <span>
#include <stdexcept>

namespace nnmoe::numerics {

// Solution interval for a scalar root equation. Function values at lo and
// hi must have opposite signs when handed to brent_root.
struct Bracket {
    double lo;
    double hi;
};

class DomainError : public std::domain_error {
    using std::domain_error::domain_error;
};

class RootError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// log Gamma(x), x > 0.
double log_gamma(double x);

/// Digamma psi(x) = d/dx log Gamma(x), x > 0.
double digamma(double x);

double std_normal_pdf(double x);
double std_normal_logpdf(double x);
double std_normal_cdf(double x);

/// log Phi(x), stable for large negative x where Phi underflows.
double std_normal_logcdf(double x);

/// phi(x)/Phi(x), the inverse Mills ratio, evaluated in log space.
double inverse_mills(double x);

/// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x);

double student_t_pdf(double x, double nu);
double student_t_logpdf(double x, double nu);
double student_t_cdf(double x, double nu);

struct BrentOptions {
    double tol = 1e-10;
    int max_iters = 200;
};

/// Root of f on the bracket. Requires a sign change across [lo, hi].
double brent_root(const std::function<double(double)>& f, Bracket bracket,
                  const BrentOptions& opts = {});

double log_sum_exp(std::span<const double> values);

}  // namespace nnmoe::numerics
