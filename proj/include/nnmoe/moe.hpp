#pragma once

#include "nnmoe/model.hpp"

namespace nnmoe {

/// Family actually driving the update equations once pins are applied.
Family effective_family(const MoESpec& spec, const FitOptions& opts);

/// Per-component log expert density at (y_i, x_i).
double expert_logpdf(Family family, const ExpertParams& e, double y, double mu);

/// Observed-data log-likelihood, computed through log-sum-exp.
double log_likelihood(const MoEParams& params, const MoESpec& spec,
                      const Dataset& data);

EStepCache e_step(const MoEParams& params, Family family, const Dataset& data);

gating::GatingParams cm_step_gate(const EStepCache& cache, const Dataset& data,
                                  const gating::GatingParams& current);

/// Expert block of the (C)M-step for the given effective family. Updates
/// beta, sigma^2 and, where present, delta/lambda and nu.
MoEParams cm_step_experts(const EStepCache& cache, const Dataset& data,
                          Family family, const MoEParams& current,
                          const FitOptions& opts, double sigma2_floor);

MoEParams initialize(const MoESpec& spec, const Dataset& data, std::uint64_t seed,
                     bool gate_at_zero, const FitOptions& opts);

/// One EM/ECM run from the given start. Throws DegenerateFitError if a scale
/// collapses below the floor.
FitResult fit_single(const MoESpec& spec, const Dataset& data, const MoEParams& start,
                     const FitOptions& opts, std::uint64_t seed);

/// Multi-start driver; returns the best run by final log-likelihood.
FitResult fit(const MoESpec& spec, const Dataset& data, const FitOptions& opts = {});

}  // namespace nnmoe
