#pragma once

#include <optional>
#include <stdexcept>

#include "nnmoe/rng.hpp"

namespace nnmoe::dist {

class InvalidParams : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// delta = lambda / sqrt(1 + lambda^2), in (-1, 1).
double delta_of_lambda(double lambda);
double lambda_of_delta(double delta);

struct SkewNormalParams {
    double mu = 0.0;
    double sigma2 = 1.0;
    double lambda = 0.0;
    double sigma() const;
    double delta() const { return delta_of_lambda(lambda); }
    void validate() const;
};

struct StudentTParams {
    double mu = 0.0;
    double sigma2 = 1.0;
    double nu = 1.0;
    double sigma() const;
    void validate() const;
};

struct SkewTParams {
    double mu = 0.0;
    double sigma2 = 1.0;
    double lambda = 0.0;
    double nu = 1.0;
    double sigma() const;
    double delta() const { return delta_of_lambda(lambda); }
    void validate() const;
};

double normal_logpdf(double y, double mu, double sigma2);

double skew_normal_logpdf(double y, const SkewNormalParams& p);
double skew_normal_sample(const SkewNormalParams& p, Rng& rng);

double student_t_logpdf(double y, const StudentTParams& p);
double student_t_sample(const StudentTParams& p, Rng& rng);

double skew_t_logpdf(double y, const SkewTParams& p);
double skew_t_sample(const SkewTParams& p, Rng& rng);

/// sqrt(nu/pi) * Gamma((nu-1)/2) / Gamma(nu/2); scales the skew-t mean.
double xi_factor(double nu);

struct Moments {
    std::optional<double> mean;      // undefined for t-families with nu <= 1
    std::optional<double> variance;  // undefined for t-families with nu <= 2
};

Moments normal_moments(double mu, double sigma2);
Moments skew_normal_moments(const SkewNormalParams& p);
Moments student_t_moments(const StudentTParams& p);
Moments skew_t_moments(const SkewTParams& p);

}  // namespace nnmoe::dist
