#pragma once

#include <cstdint>
#include <vector>

#include "groupce/grouping.hpp"

namespace groupce {

// Per-step loss decomposition. For the grouped objective
// total = primary + lambda·aux + hierarchical; flat baselines instead carry
// their ranking term in baseline_rank with aux/hierarchical at zero.
struct LossBreakdown {
    double primary_logloss = 0.0;
    double aux_logloss = 0.0;
    std::vector<double> per_level_listce;
    double hierarchical = 0.0;
    double baseline_rank = 0.0;
    double lambda = 1.0;
    double total = 0.0;
};

// −mean[y·log ŷ + (1−y)·log(1−ŷ)], probabilities clamped to
// [1e−12, 1−1e−12] before the logs.
double logloss(const std::vector<double>& predictions, const std::vector<double>& labels);

// Adds coeff·(σ(s)−y)/N into d_logits - the logit-space gradient of logloss.
void logloss_grad_wrt_logits(const std::vector<double>& logits, const std::vector<double>& labels,
                             double coeff, std::vector<double>& d_logits);

// Grouped listwise cross entropy at one level: per group, labels are
// normalized by the group's positive mass and scores by the group's sigmoid
// sum; the level loss is the mean over groups. Empty-positive groups
// contribute exactly zero.
double listce_level(const std::vector<double>& logits, const std::vector<double>& labels,
                    const GroupPartition& partition, double eps);

// Adds coeff·d(level loss)/d(logits) into d_logits.
void listce_level_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                       const GroupPartition& partition, double eps, double coeff,
                       std::vector<double>& d_logits);

// Σ_l [ L_l/(2σ_l²) + log σ_l ] with σ_l = exp(log_sigma_l).
double hierarchical_loss(const std::vector<double>& per_level_losses,
                         const std::vector<double>& log_sigma);

// Weight applied to level l's loss inside hierarchical_loss: 1/(2σ_l²).
double hierarchical_level_weight(double log_sigma_l);

// d(hierarchical)/d(log_sigma_l) = 1 − L_l/σ_l².
std::vector<double> hierarchical_grad_log_sigma(const std::vector<double>& per_level_losses,
                                                const std::vector<double>& log_sigma);

// Mean over in-batch (positive, negative) pairs of softplus(−(s⁺ − s⁻)).
// Zero when either class is absent.
double pairwise_logistic(const std::vector<double>& logits, const std::vector<double>& labels);
void pairwise_logistic_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                            double coeff, std::vector<double>& d_logits);

// Whole-batch listwise cross entropy with softmax-normalized logits and
// labels normalized by positive count. Zero when either class is absent.
double softmax_ce(const std::vector<double>& logits, const std::vector<double>& labels);
void softmax_ce_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                     double coeff, std::vector<double>& d_logits);

// --- negative-sampling variance diagnostic -------------------------------

struct SamplingDiagnostic {
    std::vector<double> per_negative_grad_norms;
    std::vector<double> distribution;   // the p that was evaluated
    double trace_variance = 0.0;        // Tr(V) under that p
    std::vector<double> grid_optimal_p;
    double grid_optimal_trace = 0.0;
    double grid_step = 0.0;
};

// Tr(V) of the importance-weighted estimator g = ∇l_i/(N·p_i), i ~ p, via
// exact enumeration: E‖g‖² − ‖E[g]‖² = (Σ‖∇l_i‖²/p_i − ‖Σ∇l_i‖²)/N².
// Entries with zero gradient may carry zero probability; a zero-probability
// entry with nonzero gradient is an error.
double trace_variance(const std::vector<double>& grad_sq_norms, double sum_grad_sq_norm,
                      const std::vector<double>& p);

// Full diagnostic over explicit per-negative gradient vectors. grid_step = 0
// picks a resolution from N (0.001 for N=2, coarser above); grid search is
// an exhaustive walk of the probability simplex at that step.
SamplingDiagnostic sampling_variance(const std::vector<std::vector<double>>& per_negative_grads,
                                     const std::vector<double>& p, double grid_step = 0.0);

// Exhaustive simplex grid minimizer of trace_variance; throws if the grid
// would exceed a sanity cap (use coarser steps for larger N).
std::pair<std::vector<double>, double> grid_search_optimal(
    const std::vector<double>& grad_sq_norms, double sum_grad_sq_norm, double step);

}  // namespace groupce
