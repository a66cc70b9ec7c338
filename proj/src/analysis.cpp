#include "nnmoe/analysis.hpp"

#include <cmath>
#include <limits>

#include "nnmoe/moe.hpp"

namespace nnmoe::analysis {

namespace {

dist::Moments expert_moments(Family family, const ExpertParams& e, double mu) {
    switch (family) {
        case Family::Normal:
            return dist::normal_moments(mu, e.sigma2);
        case Family::SkewNormal:
            return dist::skew_normal_moments({mu, e.sigma2, e.lambda});
        case Family::StudentT:
            return dist::student_t_moments({mu, e.sigma2, e.nu});
        case Family::SkewT:
            return dist::skew_t_moments({mu, e.sigma2, e.lambda, e.nu});
    }
    return {};
}

}  // namespace

std::vector<PredictionPoint> predict(const MoEParams& params, const MoESpec& spec,
                                     const Eigen::VectorXd& x_new) {
    const int K = params.K();
    const Eigen::MatrixXd Xn = Dataset::design(x_new, spec.p);
    const Eigen::MatrixXd Rn = Dataset::design(x_new, spec.q);
    std::vector<PredictionPoint> out(x_new.size());
    for (int i = 0; i < x_new.size(); ++i) {
        PredictionPoint& pt = out[i];
        pt.x = x_new(i);
        pt.gate_probs = gating::gate_probs(params.gate, Rn.row(i).transpose());
        pt.per_component_means.resize(K);
        double mean = 0.0;
        double second = 0.0;  // sum_k pi_k (E_k^2 + V_k)
        bool mean_ok = true;
        bool var_ok = true;
        for (int k = 0; k < K; ++k) {
            const double mu = params.experts[k].beta.dot(Xn.row(i));
            const dist::Moments mom = expert_moments(spec.family, params.experts[k], mu);
            const double pi_k = pt.gate_probs(k);
            const bool active = pi_k > 1e-6;
            if (!mom.mean) {
                pt.per_component_means(k) = std::numeric_limits<double>::quiet_NaN();
                if (active) mean_ok = false;
                var_ok = var_ok && !active;
                continue;
            }
            pt.per_component_means(k) = *mom.mean;
            mean += pi_k * *mom.mean;
            if (mom.variance) {
                second += pi_k * (*mom.mean * *mom.mean + *mom.variance);
            } else if (active) {
                var_ok = false;
            }
        }
        if (!mean_ok) {
            throw EvaluationError("predict: mixture mean undefined (nu <= 1 component)");
        }
        pt.mean = mean;
        if (var_ok) pt.variance = second - mean * mean;
    }
    return out;
}

std::vector<int> map_cluster(const Eigen::MatrixXd& tau) {
    const int n = static_cast<int>(tau.rows());
    const int K = static_cast<int>(tau.cols());
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int k = 1; k < K; ++k) {
            if (tau(i, k) > tau(i, best)) best = k;
        }
        labels[i] = best + 1;
    }
    return labels;
}

int free_params(Family family, int K, int p, int q) {
    if (K < 1) throw std::invalid_argument("free_params: K must be >= 1");
    switch (family) {
        case Family::Normal: return K * (p + q + 3) - q - 1;
        case Family::SkewNormal:
        case Family::StudentT: return K * (p + q + 4) - q - 1;
        case Family::SkewT: return K * (p + q + 5) - q - 1;
    }
    return 0;
}

SelectionRow criteria(const FitResult& fit, const MoESpec& spec, const Dataset& data) {
    SelectionRow row;
    row.K = spec.K;
    row.loglik = fit.loglik();
    row.eta = free_params(spec.family, spec.K, spec.p, spec.q);
    const double half_log_n = 0.5 * std::log(static_cast<double>(data.n()));
    row.bic = row.loglik - row.eta * half_log_n;
    row.aic = row.loglik - row.eta;
    // Complete-data log-likelihood with hard MAP memberships.
    const std::vector<int> labels = map_cluster(fit.tau);
    double loglik_c = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const int k = labels[i] - 1;
        const Eigen::VectorXd logpi =
            gating::gate_log_probs(fit.params.gate, data.R.row(i).transpose());
        const double mu = fit.params.experts[k].beta.dot(data.X.row(i));
        loglik_c += logpi(k) +
                    expert_logpdf(spec.family, fit.params.experts[k], data.y(i), mu);
    }
    row.icl = loglik_c - row.eta * half_log_n;
    return row;
}

SelectionTable select_K(Family family, const Dataset& data,
                        const std::vector<int>& K_range, int p, int q,
                        const FitOptions& opts) {
    SelectionTable table;
    for (int K : K_range) {
        MoESpec spec{family, K, p, q};
        FitOptions kopts = opts;
        // Independent seed stream per candidate K.
        kopts.seed = Rng::derive_seed(opts.seed, 1000 + static_cast<std::uint64_t>(K));
        try {
            const FitResult fit_result = fit(spec, data, kopts);
            table.rows.push_back(criteria(fit_result, spec, data));
        } catch (const DegenerateFitError& err) {
            table.errors.push_back("K=" + std::to_string(K) + ": " + err.what());
        } catch (const std::invalid_argument& err) {
            table.errors.push_back("K=" + std::to_string(K) + ": " + err.what());
        }
    }
    if (!table.rows.empty()) {
        const auto best_by = [&table](double SelectionRow::*field) {
            int best = table.rows[0].K;
            double val = table.rows[0].*field;
            for (const SelectionRow& row : table.rows) {
                if (row.*field > val) {
                    val = row.*field;
                    best = row.K;
                }
            }
            return best;
        };
        table.best_bic = best_by(&SelectionRow::bic);
        table.best_aic = best_by(&SelectionRow::aic);
        table.best_icl = best_by(&SelectionRow::icl);
    }
    return table;
}

}  // namespace nnmoe::analysis
