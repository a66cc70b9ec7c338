#pragma once

#include "nnmoe/model.hpp"

namespace nnmoe::simulation {

struct ScenarioConfig {
    Family family = Family::Normal;
    MoEParams true_params;
    int n = 500;
    int p = 1;
    int q = 1;
    double x_lo = -1.0;  // predictor law: Uniform(x_lo, x_hi)
    double x_hi = 1.0;
    double outlier_rate = 0.0;
    double outlier_y = -2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Two-component benchmark scenario shared by the simulation experiments.
ScenarioConfig benchmark_scenario(Family family, int n, std::uint64_t seed);

struct GeneratedData {
    Dataset data;
    std::vector<int> labels;  // 1..K; 0 marks outlier replacements
};

GeneratedData generate(const ScenarioConfig& config);

/// Per-coefficient squared errors after label alignment, flattened as
/// (alpha row-major, then per component beta, sigma^2, lambda, nu as present).
Eigen::VectorXd mse_params(const MoEParams& truth, const MoEParams& fitted,
                           const MoESpec& spec);

/// Component permutation minimizing the total squared beta distance, applied
/// to the fitted parameters (gate re-referenced to the new last component).
MoEParams align_labels(const MoEParams& truth, const MoEParams& fitted);

/// Average squared gap between the two mixture mean functions over the
/// dataset's covariates; the families may differ.
double mse_mean_function(const MoEParams& truth, const MoESpec& truth_spec,
                         const MoEParams& fitted, const MoESpec& fitted_spec,
                         const Dataset& data);

}  // namespace nnmoe::simulation
