#pragma once

#include "nnmoe/model.hpp"

namespace nnmoe::analysis {

struct PredictionPoint {
    double x = 0.0;
    double mean = 0.0;
    std::optional<double> variance;
    Eigen::VectorXd per_component_means;
    Eigen::VectorXd gate_probs;
};

/// Mixture mean/variance at each new covariate. The variance is undefined
/// when any component with weight above 1e-6 has an undefined variance.
std::vector<PredictionPoint> predict(const MoEParams& params, const MoESpec& spec,
                                     const Eigen::VectorXd& x_new);

/// MAP labels in 1..K; ties go to the lowest index.
std::vector<int> map_cluster(const Eigen::MatrixXd& tau);

int free_params(Family family, int K, int p, int q);

struct SelectionRow {
    int K = 0;
    double loglik = 0.0;
    int eta = 0;
    double bic = 0.0;
    double aic = 0.0;
    double icl = 0.0;
};

struct SelectionTable {
    std::vector<SelectionRow> rows;
    std::vector<std::string> errors;  // per-K failure notes, rows skipped
    int best_bic = 0;
    int best_aic = 0;
    int best_icl = 0;
};

SelectionRow criteria(const FitResult& fit, const MoESpec& spec, const Dataset& data);

SelectionTable select_K(Family family, const Dataset& data,
                        const std::vector<int>& K_range, int p, int q,
                        const FitOptions& opts);

}  // namespace nnmoe::analysis
