#pragma once

#include <Eigen/Dense>

namespace nnmoe::gating {

// Softmax gate coefficients: one row per non-reference component, the last
// component's coefficients are implicitly zero.
struct GatingParams {
    Eigen::MatrixXd alpha;  // (K-1) x (q+1)

    int K() const { return static_cast<int>(alpha.rows()) + 1; }
    int dim() const { return static_cast<int>(alpha.cols()); }

    static GatingParams zeros(int K, int q) {
        return {Eigen::MatrixXd::Zero(K - 1, q + 1)};
    }
};

/// log pi_k(r; alpha) for one gate design row, normalized via log-sum-exp.
Eigen::VectorXd gate_log_probs(const GatingParams& gate, const Eigen::VectorXd& r);
Eigen::VectorXd gate_probs(const GatingParams& gate, const Eigen::VectorXd& r);

/// n x K matrix of gate probabilities for a design matrix R.
Eigen::MatrixXd gate_probs_matrix(const GatingParams& gate, const Eigen::MatrixXd& R);

struct Q1Eval {
    double value;
    Eigen::VectorXd gradient;  // flattened over the (K-1)(q+1) free coefficients
    Eigen::MatrixXd hessian;
};

/// Q1(alpha) = sum_i sum_k tau_ik log pi_k(r_i; alpha) with exact softmax
/// gradient and Hessian over the free coefficient blocks.
Q1Eval q1_value_grad_hess(const GatingParams& gate, const Eigen::MatrixXd& tau,
                          const Eigen::MatrixXd& R);

double q1_value(const GatingParams& gate, const Eigen::MatrixXd& tau,
                const Eigen::MatrixXd& R);

struct IrlsOptions {
    double tol = 1e-8;
    int max_iters = 50;
    int max_halvings = 30;
    double ridge = 1e-8;
    double alpha_cap = 1e3;
};

/// Newton ascent of Q1 with step halving; never returns a worse Q1 than the
/// starting point.
GatingParams irls_maximize_q1(const GatingParams& alpha0, const Eigen::MatrixXd& tau,
                              const Eigen::MatrixXd& R, const IrlsOptions& opts = {});

}  // namespace nnmoe::gating
