#pragma once

#include <functional>
#include <map>
#include <string>

#include "groupce/matrix.hpp"

namespace groupce {

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double weight_decay = 0.0;

    void validate() const;
};

struct Param {
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix adam_m;
    DenseMatrix adam_v;
};

// Named parameter tensors with gradient slots and Adam moments. Entries are
// name-ordered so accumulation and update order is deterministic; the step
// count is shared across entries (one bump per optimizer step).
class ParamStore {
public:
    DenseMatrix& create(const std::string& name, int64_t rows, int64_t cols);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::map<std::string, Param>& entries() { return entries_; }
    const std::map<std::string, Param>& entries() const { return entries_; }

    void zero_grads();
    int64_t step_count() const { return step_count_; }
    void set_step_count(int64_t t) { step_count_ = t; }
    int64_t coordinate_count() const;

private:
    std::map<std::string, Param> entries_;
    int64_t step_count_ = 0;

    friend void adamw_step(ParamStore&, const OptimizerConfig&);
};

// Decoupled-weight-decay Adam with bias correction. Consumes the gradients
// (zeroed afterwards) and bumps the step count. A non-finite gradient aborts
// with the offending parameter named.
void adamw_step(ParamStore& params, const OptimizerConfig& cfg);

// Central differences (f(θ+h) − f(θ−h)) / 2h per coordinate. loss_fn must be
// deterministic; it is called 2×(coordinate count) times.
std::map<std::string, DenseMatrix> finite_difference_gradient(
    const std::function<double(const ParamStore&)>& loss_fn, const ParamStore& params, double h);

}  // namespace groupce
