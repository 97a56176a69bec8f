#include "groupce/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "groupce/error.hpp"
#include "groupce/matrix.hpp"

namespace groupce {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp); }

// softplus(x) = log(1 + exp(x)) without overflow
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

double logloss(const std::vector<double>& predictions, const std::vector<double>& labels) {
    if (predictions.empty()) throw MetricError("logloss: empty input");
    if (predictions.size() != labels.size()) throw ShapeError("logloss: length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double p = clamp_prob(predictions[i]);
        acc += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(predictions.size());
}

void logloss_grad_wrt_logits(const std::vector<double>& logits, const std::vector<double>& labels,
                             double coeff, std::vector<double>& d_logits) {
    const double inv_n = 1.0 / static_cast<double>(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
        d_logits[i] += coeff * (sigmoid_stable(logits[i]) - labels[i]) * inv_n;
}

double listce_level(const std::vector<double>& logits, const std::vector<double>& labels,
                    const GroupPartition& partition, double eps) {
    if (partition.groups.empty()) return 0.0;
    double total = 0.0;
    for (const auto& group : partition.groups) {
        double sigma_sum = 0.0;
        double label_sum = 0.0;
        for (int i : group) {
            sigma_sum += sigmoid_stable(logits[static_cast<size_t>(i)]);
            label_sum += labels[static_cast<size_t>(i)];
        }
        if (label_sum <= 0.0) continue;  // all-negative groups contribute 0
        const double norm = label_sum + eps;
        double term = 0.0;
        for (int i : group) {
            const double y = labels[static_cast<size_t>(i)];
            if (y <= 0.0) continue;
            const double s = sigmoid_stable(logits[static_cast<size_t>(i)]);
            term -= (y / norm) * std::log(s / sigma_sum);
        }
        total += term;
    }
    return total / static_cast<double>(partition.groups.size());
}

void listce_level_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                       const GroupPartition& partition, double eps, double coeff,
                       std::vector<double>& d_logits) {
    if (partition.groups.empty()) return;
    const double inv_m = 1.0 / static_cast<double>(partition.groups.size());
    for (const auto& group : partition.groups) {
        double sigma_sum = 0.0;
        double label_sum = 0.0;
        for (int i : group) {
            sigma_sum += sigmoid_stable(logits[static_cast<size_t>(i)]);
            label_sum += labels[static_cast<size_t>(i)];
        }
        if (label_sum <= 0.0) continue;
        const double norm = label_sum + eps;
        const double y_mass = label_sum / norm;  // Σ ỹ over the group
        for (int i : group) {
            const size_t idx = static_cast<size_t>(i);
            const double s = sigmoid_stable(logits[idx]);
            const double y_tilde = labels[idx] / norm;
            const double g = -y_tilde * (1.0 - s) + y_mass * s * (1.0 - s) / sigma_sum;
            d_logits[idx] += coeff * inv_m * g;
        }
    }
}

double hierarchical_loss(const std::vector<double>& per_level_losses,
                         const std::vector<double>& log_sigma) {
    if (per_level_losses.size() != log_sigma.size())
        throw ShapeError("hierarchical_loss: level count disagrees with sigma count");
    double total = 0.0;
    for (size_t l = 0; l < per_level_losses.size(); ++l)
        total += hierarchical_level_weight(log_sigma[l]) * per_level_losses[l] + log_sigma[l];
    return total;
}

double hierarchical_level_weight(double log_sigma_l) {
    return 0.5 * std::exp(-2.0 * log_sigma_l);
}

std::vector<double> hierarchical_grad_log_sigma(const std::vector<double>& per_level_losses,
                                                const std::vector<double>& log_sigma) {
    if (per_level_losses.size() != log_sigma.size())
        throw ShapeError("hierarchical_grad: level count disagrees with sigma count");
    std::vector<double> g(log_sigma.size());
    for (size_t l = 0; l < log_sigma.size(); ++l)
        g[l] = 1.0 - per_level_losses[l] * std::exp(-2.0 * log_sigma[l]);
    return g;
}

double pairwise_logistic(const std::vector<double>& logits, const std::vector<double>& labels) {
    double acc = 0.0;
    int64_t pairs = 0;
    for (size_t p = 0; p < logits.size(); ++p) {
        if (labels[p] <= 0.0) continue;
        for (size_t n = 0; n < logits.size(); ++n) {
            if (labels[n] > 0.0) continue;
            acc += softplus(-(logits[p] - logits[n]));
            ++pairs;
        }
    }
    return pairs == 0 ? 0.0 : acc / static_cast<double>(pairs);
}

void pairwise_logistic_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                            double coeff, std::vector<double>& d_logits) {
    int64_t pairs = 0;
    for (size_t p = 0; p < logits.size(); ++p)
        if (labels[p] > 0.0)
            for (size_t n = 0; n < logits.size(); ++n)
                if (labels[n] <= 0.0) ++pairs;
    if (pairs == 0) return;
    const double w = coeff / static_cast<double>(pairs);
    for (size_t p = 0; p < logits.size(); ++p) {
        if (labels[p] <= 0.0) continue;
        for (size_t n = 0; n < logits.size(); ++n) {
            if (labels[n] > 0.0) continue;
            const double slack = sigmoid_stable(logits[n] - logits[p]);
            d_logits[p] -= w * slack;
            d_logits[n] += w * slack;
        }
    }
}

double softmax_ce(const std::vector<double>& logits, const std::vector<double>& labels) {
    double pos = 0.0;
    for (double y : labels) pos += y;
    if (pos <= 0.0 || pos >= static_cast<double>(labels.size())) return 0.0;
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double s : logits) z += std::exp(s - max_logit);
    const double log_z = std::log(z) + max_logit;
    double acc = 0.0;
    for (size_t i = 0; i < logits.size(); ++i)
        if (labels[i] > 0.0) acc -= (labels[i] / pos) * (logits[i] - log_z);
    return acc;
}

void softmax_ce_grad(const std::vector<double>& logits, const std::vector<double>& labels,
                     double coeff, std::vector<double>& d_logits) {
    double pos = 0.0;
    for (double y : labels) pos += y;
    if (pos <= 0.0 || pos >= static_cast<double>(labels.size())) return;
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double s : logits) z += std::exp(s - max_logit);
    for (size_t i = 0; i < logits.size(); ++i) {
        const double q = std::exp(logits[i] - max_logit) / z;
        d_logits[i] += coeff * (q - labels[i] / pos);
    }
}

double trace_variance(const std::vector<double>& grad_sq_norms, double sum_grad_sq_norm,
                      const std::vector<double>& p) {
    if (grad_sq_norms.size() != p.size()) throw ShapeError("trace_variance: length mismatch");
    const double n = static_cast<double>(grad_sq_norms.size());
    double second_moment = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) {
            if (grad_sq_norms[i] > 0.0)
                throw DiagnosticError(
                    "trace_variance: zero probability on a negative with nonzero gradient");
            continue;  // zero gradient with zero mass contributes nothing
        }
        second_moment += grad_sq_norms[i] / p[i];
    }
    return (second_moment - sum_grad_sq_norm) / (n * n);
}

namespace {

void grid_walk(std::vector<int>& units, size_t idx, int remaining, int total_units,
               const std::vector<double>& sq_norms, double sum_sq,
               std::vector<double>& best_p, double& best_trace) {
    if (idx + 1 == units.size()) {
        units[idx] = remaining;
        std::vector<double> p(units.size());
        for (size_t i = 0; i < units.size(); ++i)
            p[i] = static_cast<double>(units[i]) / static_cast<double>(total_units);
        // skip infeasible points: zero mass on a nonzero gradient
        for (size_t i = 0; i < p.size(); ++i)
            if (p[i] <= 0.0 && sq_norms[i] > 0.0) return;
        const double tv = trace_variance(sq_norms, sum_sq, p);
        if (tv < best_trace) {
            best_trace = tv;
            best_p = std::move(p);
        }
        return;
    }
    for (int u = 0; u <= remaining; ++u) {
        units[idx] = u;
        grid_walk(units, idx + 1, remaining - u, total_units, sq_norms, sum_sq, best_p, best_trace);
    }
}

}  // namespace

std::pair<std::vector<double>, double> grid_search_optimal(
    const std::vector<double>& grad_sq_norms, double sum_grad_sq_norm, double step) {
    if (!(step > 0.0 && step <= 1.0)) throw ConfigError("grid search step must be in (0, 1]");
    const int total_units = static_cast<int>(std::lround(1.0 / step));
    const size_t n = grad_sq_norms.size();
    // grid size is C(total_units + n - 1, n - 1); keep it sane
    double points = 1.0;
    for (size_t i = 1; i < n; ++i)
        points *= static_cast<double>(total_units + i) / static_cast<double>(i);
    if (points > 2e7)
        throw ConfigError("grid search too large; use a coarser step for this many negatives");

    std::vector<int> units(n, 0);
    std::vector<double> best_p;
    double best_trace = std::numeric_limits<double>::infinity();
    grid_walk(units, 0, total_units, total_units, grad_sq_norms, sum_grad_sq_norm, best_p,
              best_trace);
    if (best_p.empty()) throw DiagnosticError("grid search found no feasible distribution");
    return {best_p, best_trace};
}

SamplingDiagnostic sampling_variance(const std::vector<std::vector<double>>& per_negative_grads,
                                     const std::vector<double>& p, double grid_step) {
    const size_t n = per_negative_grads.size();
    if (n == 0) throw DiagnosticError("sampling_variance: no negatives");
    if (p.size() != n) throw ShapeError("sampling_variance: p length mismatch");

    std::vector<double> sq_norms(n, 0.0);
    std::vector<double> grad_sum(per_negative_grads.front().size(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        if (per_negative_grads[i].size() != grad_sum.size())
            throw ShapeError("sampling_variance: ragged gradient lengths");
        for (size_t j = 0; j < grad_sum.size(); ++j) {
            const double g = per_negative_grads[i][j];
            if (!std::isfinite(g)) throw DiagnosticError("sampling_variance: non-finite gradient");
            sq_norms[i] += g * g;
            grad_sum[j] += g;
        }
    }
    double sum_sq = 0.0;
    for (double v : grad_sum) sum_sq += v * v;

    SamplingDiagnostic diag;
    diag.per_negative_grad_norms.resize(n);
    for (size_t i = 0; i < n; ++i) diag.per_negative_grad_norms[i] = std::sqrt(sq_norms[i]);
    diag.distribution = p;
    diag.trace_variance = trace_variance(sq_norms, sum_sq, p);

    double step = grid_step;
    if (step <= 0.0) {
        if (n <= 2)
            step = 0.001;
        else if (n == 3)
            step = 0.005;
        else if (n == 4)
            step = 0.02;
        else
            step = 0.05;
    }
    auto [best_p, best_trace] = grid_search_optimal(sq_norms, sum_sq, step);
    diag.grid_optimal_p = std::move(best_p);
    diag.grid_optimal_trace = best_trace;
    diag.grid_step = step;
    return diag;
}

}  // namespace groupce
