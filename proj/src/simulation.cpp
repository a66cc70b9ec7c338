#include "nnmoe/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nnmoe/analysis.hpp"
#include "nnmoe/rng.hpp"

namespace nnmoe::simulation {

void ScenarioConfig::validate() const {
    if (n < 1) throw std::invalid_argument("ScenarioConfig: n must be >= 1");
    if (outlier_rate < 0.0 || outlier_rate > 1.0) {
        throw std::invalid_argument("ScenarioConfig: outlier rate must be in [0, 1]");
    }
    if (!(x_lo < x_hi)) throw std::invalid_argument("ScenarioConfig: empty x interval");
    if (true_params.experts.empty()) {
        throw std::invalid_argument("ScenarioConfig: no expert parameters");
    }
}

ScenarioConfig benchmark_scenario(Family family, int n, std::uint64_t seed) {
    ScenarioConfig config;
    config.family = family;
    config.n = n;
    config.seed = seed;
    config.true_params.gate.alpha = Eigen::MatrixXd::Zero(1, 2);
    config.true_params.gate.alpha(0, 1) = 10.0;  // alpha_1 = (0, 10)^T
    ExpertParams e1;
    e1.beta = Eigen::Vector2d(0.0, 1.0);
    e1.sigma2 = 0.1 * 0.1;
    e1.lambda = family_has_lambda(family) ? 3.0 : 0.0;
    e1.nu = family_has_nu(family) ? 5.0 : 50.0;
    ExpertParams e2;
    e2.beta = Eigen::Vector2d(0.0, -1.0);
    e2.sigma2 = 0.1 * 0.1;
    e2.lambda = family_has_lambda(family) ? -10.0 : 0.0;
    e2.nu = family_has_nu(family) ? 7.0 : 50.0;
    config.true_params.experts = {e1, e2};
    return config;
}

namespace {

double sample_expert(Family family, const ExpertParams& e, double mu, Rng& rng) {
    switch (family) {
        case Family::Normal:
            return mu + e.sigma() * rng.normal();
        case Family::SkewNormal:
            return dist::skew_normal_sample({mu, e.sigma2, e.lambda}, rng);
        case Family::StudentT:
            return dist::student_t_sample({mu, e.sigma2, e.nu}, rng);
        case Family::SkewT:
            return dist::skew_t_sample({mu, e.sigma2, e.lambda, e.nu}, rng);
    }
    return mu;
}

}  // namespace

GeneratedData generate(const ScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const int n = config.n;
    const int K = config.true_params.K();
    Eigen::VectorXd x(n);
    Eigen::VectorXd y(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        x(i) = rng.uniform(config.x_lo, config.x_hi);
        Eigen::VectorXd r(config.q + 1);
        double pw = 1.0;
        for (int j = 0; j <= config.q; ++j) {
            r(j) = pw;
            pw *= x(i);
        }
        const Eigen::VectorXd pi = gating::gate_probs(config.true_params.gate, r);
        const double u = rng.uniform();
        int z = K - 1;
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
            acc += pi(k);
            if (u <= acc) {
                z = k;
                break;
            }
        }
        const ExpertParams& e = config.true_params.experts[z];
        double mu = 0.0;
        pw = 1.0;
        for (int j = 0; j < e.beta.size(); ++j) {
            mu += e.beta(j) * pw;
            pw *= x(i);
        }
        y(i) = sample_expert(config.family, e, mu, rng);
        labels[i] = z + 1;
        if (config.outlier_rate > 0.0 && rng.uniform() < config.outlier_rate) {
            x(i) = rng.uniform(config.x_lo, config.x_hi);
            y(i) = config.outlier_y;
            labels[i] = 0;
        }
    }
    GeneratedData out;
    out.data = Dataset::build(x, y, config.p, config.q);
    out.labels = std::move(labels);
    return out;
}

MoEParams align_labels(const MoEParams& truth, const MoEParams& fitted) {
    const int K = truth.K();
    if (fitted.K() != K) throw std::invalid_argument("align_labels: K mismatch");
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int k = 0; k < K; ++k) {
            cost += (truth.experts[k].beta - fitted.experts[perm[k]].beta).squaredNorm();
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    MoEParams aligned;
    aligned.experts.resize(K);
    for (int k = 0; k < K; ++k) aligned.experts[k] = fitted.experts[best[k]];
    const int d = fitted.gate.dim();
    // Re-reference the gate: logits keep their values per component, the new
    // last component becomes the zero row.
    const auto old_row = [&](int k) -> Eigen::RowVectorXd {
        if (k == K - 1) return Eigen::RowVectorXd::Zero(d);
        return fitted.gate.alpha.row(k);
    };
    aligned.gate.alpha.resize(K - 1, d);
    for (int k = 0; k < K - 1; ++k) {
        aligned.gate.alpha.row(k) = old_row(best[k]) - old_row(best[K - 1]);
    }
    return aligned;
}

Eigen::VectorXd mse_params(const MoEParams& truth, const MoEParams& fitted,
                           const MoESpec& spec) {
    const int K = truth.K();
    if (fitted.K() != K) throw std::invalid_argument("mse_params: K mismatch");
    for (int k = 0; k < K; ++k) {
        if (truth.experts[k].beta.size() != fitted.experts[k].beta.size()) {
            throw std::invalid_argument("mse_params: beta shape mismatch");
        }
    }
    const MoEParams aligned = align_labels(truth, fitted);
    std::vector<double> errs;
    for (int k = 0; k < K - 1; ++k) {
        for (int j = 0; j < truth.gate.dim(); ++j) {
            const double diff = truth.gate.alpha(k, j) - aligned.gate.alpha(k, j);
            errs.push_back(diff * diff);
        }
    }
    for (int k = 0; k < K; ++k) {
        const ExpertParams& t = truth.experts[k];
        const ExpertParams& f = aligned.experts[k];
        for (int j = 0; j < t.beta.size(); ++j) {
            const double diff = t.beta(j) - f.beta(j);
            errs.push_back(diff * diff);
        }
        const double ds = t.sigma() - f.sigma();
        errs.push_back(ds * ds);
        if (family_has_lambda(spec.family)) {
            const double dl = t.lambda - f.lambda;
            errs.push_back(dl * dl);
        }
        if (family_has_nu(spec.family)) {
            const double dn = t.nu - f.nu;
            errs.push_back(dn * dn);
        }
    }
    return Eigen::Map<Eigen::VectorXd>(errs.data(), static_cast<int>(errs.size()));
}

double mse_mean_function(const MoEParams& truth, const MoESpec& truth_spec,
                         const MoEParams& fitted, const MoESpec& fitted_spec,
                         const Dataset& data) {
    const auto true_pred = analysis::predict(truth, truth_spec, data.x);
    const auto fit_pred = analysis::predict(fitted, fitted_spec, data.x);
    double total = 0.0;
    for (std::size_t i = 0; i < true_pred.size(); ++i) {
        const double diff = true_pred[i].mean - fit_pred[i].mean;
        total += diff * diff;
    }
    return total / static_cast<double>(true_pred.size());
}

}  // namespace nnmoe::simulation
