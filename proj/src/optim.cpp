#include "groupce/optim.hpp"

#include <cmath>

#include "groupce/error.hpp"

namespace groupce {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("opt.learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("opt.beta1 must be in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("opt.beta2 must be in [0, 1)");
    if (!(eps_adam > 0.0)) throw ConfigError("opt.eps must be > 0");
    if (weight_decay < 0.0) throw ConfigError("opt.weight_decay must be >= 0");
}

DenseMatrix& ParamStore::create(const std::string& name, int64_t rows, int64_t cols) {
    if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Param p;
    p.value = DenseMatrix(rows, cols);
    p.grad = DenseMatrix(rows, cols);
    p.adam_m = DenseMatrix(rows, cols);
    p.adam_v = DenseMatrix(rows, cols);
    return entries_.emplace(name, std::move(p)).first->second.value;
}

Param& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return entries_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& [name, p] : entries_) p.grad.fill(0.0);
}

int64_t ParamStore::coordinate_count() const {
    int64_t n = 0;
    for (const auto& [name, p] : entries_) n += p.value.size();
    return n;
}

void adamw_step(ParamStore& params, const OptimizerConfig& cfg) {
    cfg.validate();
    const int64_t t = params.step_count_ + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& [name, p] : params.entries_) {
        if (!p.grad.all_finite())
            throw DivergenceError("non-finite gradient in parameter '" + name + "'");
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = p.grad.data[i];
            double& m = p.adam_m.data[i];
            double& v = p.adam_v.data[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            const double theta = p.value.data[i];
            p.value.data[i] =
                theta - cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.eps_adam) +
                                             cfg.weight_decay * theta);
        }
        p.grad.fill(0.0);
    }
    params.step_count_ = t;
}

std::map<std::string, DenseMatrix> finite_difference_gradient(
    const std::function<double(const ParamStore&)>& loss_fn, const ParamStore& params, double h) {
    if (!(h > 0.0)) throw ConfigError("finite differences require h > 0");
    ParamStore work = params;
    std::map<std::string, DenseMatrix> grads;
    for (auto& [name, p] : work.entries()) {
        DenseMatrix g(p.value.rows, p.value.cols);
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            const double saved = p.value.data[i];
            p.value.data[i] = saved + h;
            const double f_plus = loss_fn(work);
            p.value.data[i] = saved - h;
            const double f_minus = loss_fn(work);
            p.value.data[i] = saved;
            g.data[i] = (f_plus - f_minus) / (2.0 * h);
        }
        grads.emplace(name, std::move(g));
    }
    return grads;
}

}  // namespace groupce
