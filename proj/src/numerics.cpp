#include "nnmoe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nnmoe::numerics {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727417803297;  // log(2*pi)/2
constexpr double kInvSqrt2 = 0.7071067811865475244008444;

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) throw DomainError("log_gamma: x must be > 0");
    return std::lgamma(x);
}

double digamma(double x) {
    if (!(x > 0.0)) throw DomainError("digamma: x must be > 0");
    // Shift into the asymptotic regime, then use the Bernoulli series.
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n}/(2n x^{2n})
    double series = inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                    inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 -
                    inv2 * (1.0 / 132.0 -
                    inv2 * (691.0 / 32760.0 -
                    inv2 * (1.0 / 12.0)))))));
    return result + std::log(x) - 0.5 * inv - series;
}

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x - kHalfLog2Pi);
}

double std_normal_logpdf(double x) {
    return -0.5 * x * x - kHalfLog2Pi;
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_logcdf(double x) {
    if (x > -36.0) {
        return std::log(0.5 * std::erfc(-x * kInvSqrt2));
    }
    // Asymptotic expansion of the Mills ratio for the far left tail.
    const double z = -x;
    const double z2 = z * z;
    double series = 1.0;
    double term = 1.0;
    for (int n = 1; n <= 8; ++n) {
        term *= -(2.0 * n - 1.0) / z2;
        series += term;
    }
    return std_normal_logpdf(x) - std::log(z) + std::log(series);
}

double inverse_mills(double x) {
    return std::exp(std_normal_logpdf(x) - std_normal_logcdf(x));
}

namespace {

// Continued fraction for the incomplete beta (Lentz's algorithm).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("reg_inc_beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lnbeta = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(lnbeta) * betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(lnbeta) * betacf(b, a, 1.0 - x) / b;
}

double student_t_logpdf(double x, double nu) {
    if (!(nu > 0.0)) throw DomainError("student_t_logpdf: nu must be > 0");
    return log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) -
           0.5 * std::log(nu * M_PI) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_pdf(double x, double nu) {
    return std::exp(student_t_logpdf(x, nu));
}

double student_t_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw DomainError("student_t_cdf: nu must be > 0");
    if (x == 0.0) return 0.5;
    const double p = 0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / (nu + x * x));
    return x < 0.0 ? p : 1.0 - p;
}

double brent_root(const std::function<double(double)>& f, Bracket bracket,
                  const BrentOptions& opts) {
    double a = bracket.lo;
    double b = bracket.hi;
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) {
        throw RootError("brent_root: no sign change across bracket");
    }
    double c = a;
    double fc = fa;
    double d = b - a;
    double e = d;
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) +
                            0.5 * opts.tol;
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol1 || fb == 0.0 || std::fabs(fb) <= opts.tol) {
            return b;
        }
        if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
            // Inverse quadratic interpolation, falling back to secant.
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            const double min1 = 3.0 * xm * q - std::fabs(tol1 * q);
            const double min2 = std::fabs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if (std::fabs(d) > tol1) {
            b += d;
        } else {
            b += xm > 0.0 ? tol1 : -tol1;
        }
        fb = f(b);
    }
    throw RootError("brent_root: no convergence after max iterations");
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw DomainError("log_sum_exp: empty input");
    const double m = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(m)) return m;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

}  // namespace nnmoe::numerics
