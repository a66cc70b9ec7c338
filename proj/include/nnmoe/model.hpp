#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nnmoe/distributions.hpp"
#include "nnmoe/gating.hpp"

namespace nnmoe {

enum class Family { Normal, SkewNormal, StudentT, SkewT };

bool family_has_lambda(Family f);
bool family_has_nu(Family f);
std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct MoESpec {
    Family family = Family::Normal;
    int K = 1;
    int p = 1;  // expert polynomial order
    int q = 1;  // gate polynomial order

    void validate() const {
        if (K < 1) throw std::invalid_argument("MoESpec: K must be >= 1");
        if (p < 0 || q < 0) throw std::invalid_argument("MoESpec: p, q must be >= 0");
    }
};

struct ExpertParams {
    Eigen::VectorXd beta;  // length p+1
    double sigma2 = 1.0;
    double lambda = 0.0;   // SkewNormal / SkewT
    double nu = 50.0;      // StudentT / SkewT

    double sigma() const { return std::sqrt(sigma2); }
    double delta() const { return dist::delta_of_lambda(lambda); }
};

struct MoEParams {
    gating::GatingParams gate;
    std::vector<ExpertParams> experts;

    int K() const { return static_cast<int>(experts.size()); }
};

// Observations plus the polynomial design rows derived from them.
struct Dataset {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;  // n x (p+1), row i = (1, x_i, ..., x_i^p)
    Eigen::MatrixXd R;  // n x (q+1)

    int n() const { return static_cast<int>(y.size()); }

    static Eigen::MatrixXd design(const Eigen::VectorXd& x, int order);
    static Dataset build(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         int p, int q);
};

// Per-observation, per-component conditional expectations for one EM
// iteration. Family-specific fields are left empty when unused.
struct EStepCache {
    Eigen::MatrixXd tau;  // n x K posterior memberships
    Eigen::MatrixXd w;    // gamma weights (t / skew-t)
    Eigen::MatrixXd e1;   // E[U] (SN) or E[WU] (ST)
    Eigen::MatrixXd e2;   // E[U^2] (SN) or E[WU^2] (ST)
    Eigen::MatrixXd e3;   // E[log W] (t as e1 there; OSL for ST)
    Eigen::MatrixXd d;    // standardized residuals
    Eigen::MatrixXd M;    // skew-t cdf arguments
    double loglik = 0.0;
};

struct FitOptions {
    int n_starts = 10;
    double tol = 1e-6;
    int max_iters = 1500;
    std::uint64_t seed = 0;
    bool kent_sigma_divisor = false;   // t sigma^2 divisor sum(tau*w)
    bool strict_delta_iterate = false; // recompute sigma^2 with the updated delta
    bool pin_lambda_zero = false;      // constrain lambda = 0 (reduces skew families)
    bool pin_nu_infinite = false;      // constrain nu -> inf (reduces t families)
    double sigma2_floor_scale = 1e-12; // floor = scale * var(y)
    // Fraction of observations excluded (lowest per-point likelihood first)
    // when deciding whether releasing the skew-t skewness from a symmetric
    // fit is supported by the bulk of the data rather than by a few gross
    // outliers absorbed into the skew tail.
    double skew_release_trim = 0.1;
};

struct FitResult {
    MoEParams params;
    std::vector<double> loglik_trace;
    Eigen::MatrixXd tau;
    int n_iters = 0;
    bool converged = false;
    std::uint64_t seed = 0;

    double loglik() const { return loglik_trace.empty() ? 0.0 : loglik_trace.back(); }
};

class DegenerateFitError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nnmoe
