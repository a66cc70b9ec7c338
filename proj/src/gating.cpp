#include "nnmoe/gating.hpp"

#include <cmath>
#include <stdexcept>

#include "nnmoe/numerics.hpp"

namespace nnmoe::gating {

namespace num = nnmoe::numerics;

Eigen::VectorXd gate_log_probs(const GatingParams& gate, const Eigen::VectorXd& r) {
    if (r.size() != gate.alpha.cols()) {
        throw std::invalid_argument("gate_log_probs: dimension mismatch");
    }
    const int K = gate.K();
    Eigen::VectorXd logits(K);
    logits.head(K - 1) = gate.alpha * r;
    logits(K - 1) = 0.0;
    const double lse = num::log_sum_exp({logits.data(), static_cast<size_t>(K)});
    return logits.array() - lse;
}

Eigen::VectorXd gate_probs(const GatingParams& gate, const Eigen::VectorXd& r) {
    return gate_log_probs(gate, r).array().exp();
}

Eigen::MatrixXd gate_probs_matrix(const GatingParams& gate, const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(R.rows());
    Eigen::MatrixXd out(n, gate.K());
    for (int i = 0; i < n; ++i) {
        out.row(i) = gate_probs(gate, R.row(i).transpose()).transpose();
    }
    return out;
}

double q1_value(const GatingParams& gate, const Eigen::MatrixXd& tau,
                const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(R.rows());
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
        value += tau.row(i).dot(gate_log_probs(gate, R.row(i).transpose()));
    }
    return value;
}

Q1Eval q1_value_grad_hess(const GatingParams& gate, const Eigen::MatrixXd& tau,
                          const Eigen::MatrixXd& R) {
    const int n = static_cast<int>(R.rows());
    const int K = gate.K();
    const int d = gate.dim();
    if (tau.rows() != n || tau.cols() != K || R.cols() != d) {
        throw std::invalid_argument("q1_value_grad_hess: dimension mismatch");
    }
    const int nfree = (K - 1) * d;
    Q1Eval eval;
    eval.value = 0.0;
    eval.gradient = Eigen::VectorXd::Zero(nfree);
    eval.hessian = Eigen::MatrixXd::Zero(nfree, nfree);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd r = R.row(i).transpose();
        const Eigen::VectorXd logp = gate_log_probs(gate, r);
        const Eigen::VectorXd p = logp.array().exp();
        eval.value += tau.row(i).dot(logp);
        const Eigen::MatrixXd rrT = r * r.transpose();
        for (int k = 0; k < K - 1; ++k) {
            eval.gradient.segment(k * d, d) += (tau(i, k) - p(k)) * r;
            for (int l = 0; l < K - 1; ++l) {
                const double w = p(k) * ((k == l ? 1.0 : 0.0) - p(l));
                eval.hessian.block(k * d, l * d, d, d) -= w * rrT;
            }
        }
    }
    return eval;
}

GatingParams irls_maximize_q1(const GatingParams& alpha0, const Eigen::MatrixXd& tau,
                              const Eigen::MatrixXd& R, const IrlsOptions& opts) {
    GatingParams gate = alpha0;
    const int K = gate.K();
    const int d = gate.dim();
    double q_cur = q1_value(gate, tau, R);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        Q1Eval eval = q1_value_grad_hess(gate, tau, R);
        Eigen::MatrixXd neg_hess = -eval.hessian;
        neg_hess.diagonal().array() += opts.ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hess);
        Eigen::VectorXd step = ldlt.solve(eval.gradient);
        if (!step.allFinite()) break;

        // Step halving until Q1 does not decrease.
        double scale = 1.0;
        GatingParams cand = gate;
        double q_new = q_cur;
        bool improved = false;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            cand = gate;
            for (int k = 0; k < K - 1; ++k) {
                cand.alpha.row(k) += scale * step.segment(k * d, d).transpose();
            }
            cand.alpha = cand.alpha.cwiseMax(-opts.alpha_cap).cwiseMin(opts.alpha_cap);
            q_new = q1_value(cand, tau, R);
            if (q_new >= q_cur) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
        const double rel = std::fabs(q_new - q_cur) /
                           std::max(1.0, std::fabs(q_cur));
        gate = cand;
        q_cur = q_new;
        if (rel <= opts.tol) break;
    }
    return gate;
}

}  // namespace nnmoe::gating
