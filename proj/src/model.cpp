#include "groupce/model.hpp"

#include <cmath>

#include "groupce/error.hpp"
#include "groupce/layers.hpp"
#include "groupce/rng.hpp"

namespace groupce {

int64_t embedding_dim_for(int64_t cardinality) {
    if (cardinality < 1) throw ConfigError("embedding_dim_for: cardinality must be >= 1");
    int64_t floor_log2 = 0;
    while ((int64_t{1} << (floor_log2 + 1)) <= cardinality) ++floor_log2;
    return std::max<int64_t>(floor_log2 * 2, 16);
}

void TowerConfig::validate() const {
    if (hidden_sizes.size() < 2 || hidden_sizes.size() > 4)
        throw ConfigError("tower requires 2 to 4 hidden layers");
    for (int64_t h : hidden_sizes)
        if (h < 1) throw ConfigError("tower hidden sizes must be >= 1");
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
}

std::vector<double> ForwardTrace::logits() const {
    return {s.data.begin(), s.data.end()};
}

std::vector<double> ForwardTrace::logits_q() const {
    return {s_q.data.begin(), s_q.data.end()};
}

Model::Model(std::vector<FeatureSpec> user_features, std::vector<FeatureSpec> item_features,
             TowerConfig cfg)
    : user_features_(std::move(user_features)), item_features_(std::move(item_features)),
      cfg_(std::move(cfg)) {
    cfg_.validate();
    if (user_features_.empty() || item_features_.empty())
        throw ConfigError("model needs at least one user and one item feature");
    for (const auto& f : user_features_) user_input_dim_ += embedding_dim_for(f.cardinality);
    for (const auto& f : item_features_) item_input_dim_ += embedding_dim_for(f.cardinality);
}

void Model::init_tower(ParamStore& params, const std::string& prefix, int64_t in_dim,
                       int64_t out_dim, Rng& rng) const {
    std::vector<int64_t> dims;
    dims.push_back(in_dim);
    for (int64_t h : cfg_.hidden_sizes) dims.push_back(h);
    dims.push_back(out_dim);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const bool last = l + 2 == dims.size();
        const std::string stem =
            prefix + (last ? ".out" : ".l" + std::to_string(l));
        DenseMatrix& w = params.create(stem + ".w", dims[l], dims[l + 1]);
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        params.create(stem + ".b", 1, dims[l + 1]);
    }
}

void Model::init_params(ParamStore& params, uint64_t seed, int64_t rvq_levels) const {
    Rng rng(seed);
    for (const auto& f : user_features_) {
        DenseMatrix& t =
            params.create("emb.user." + f.name, f.cardinality, embedding_dim_for(f.cardinality));
        for (double& v : t.data) v = rng.normal(0.0, 0.01);
    }
    for (const auto& f : item_features_) {
        DenseMatrix& t =
            params.create("emb.item." + f.name, f.cardinality, embedding_dim_for(f.cardinality));
        for (double& v : t.data) v = rng.normal(0.0, 0.01);
    }
    init_tower(params, "user", user_input_dim_, cfg_.embedding_dim, rng);
    init_tower(params, "item", item_input_dim_, cfg_.embedding_dim, rng);
    init_tower(params, "main", 2 * cfg_.embedding_dim, 1, rng);
    if (rvq_levels > 0) params.create(kLogSigmaParam, 1, rvq_levels);  // σ_l = 1 at start
}

DenseMatrix Model::embed_features(const std::vector<std::vector<int64_t>>& ids,
                                  const std::vector<FeatureSpec>& schema,
                                  const std::string& prefix, const ParamStore& params) const {
    if (ids.size() != schema.size()) throw ShapeError("embed_features: feature count mismatch");
    const int64_t batch = ids.empty() ? 0 : static_cast<int64_t>(ids[0].size());
    int64_t width = 0;
    for (const auto& f : schema) width += embedding_dim_for(f.cardinality);
    DenseMatrix out(batch, width);
    int64_t offset = 0;
    for (size_t f = 0; f < schema.size(); ++f) {
        const DenseMatrix& table = params.at(prefix + schema[f].name).value;
        const int64_t dim = table.cols;
        for (int64_t r = 0; r < batch; ++r) {
            const int64_t id = ids[f][static_cast<size_t>(r)];
            if (id < 0 || id >= schema[f].cardinality)
                throw DataError("feature '" + schema[f].name + "': id " + std::to_string(id) +
                                " out of range [0, " + std::to_string(schema[f].cardinality) + ")");
            const double* src = table.row_ptr(id);
            double* dst = out.row_ptr(r) + offset;
            for (int64_t j = 0; j < dim; ++j) dst[j] = src[j];
        }
        offset += dim;
    }
    return out;
}

void Model::embed_backward(const DenseMatrix& d_x, const std::vector<std::vector<int64_t>>& ids,
                           const std::vector<FeatureSpec>& schema, const std::string& prefix,
                           ParamStore& params) const {
    int64_t offset = 0;
    for (size_t f = 0; f < schema.size(); ++f) {
        Param& p = params.at(prefix + schema[f].name);
        const int64_t dim = p.value.cols;
        for (int64_t r = 0; r < d_x.rows; ++r) {
            const int64_t id = ids[f][static_cast<size_t>(r)];
            const double* src = d_x.row_ptr(r) + offset;
            double* dst = p.grad.row_ptr(id);
            for (int64_t j = 0; j < dim; ++j) dst[j] += src[j];
        }
        offset += dim;
    }
}

DenseMatrix Model::tower_forward(const std::string& prefix, const DenseMatrix& x,
                                 const ParamStore& params, TowerTrace* trace) const {
    DenseMatrix h = x;
    for (size_t l = 0; l < cfg_.hidden_sizes.size(); ++l) {
        const std::string stem = prefix + ".l" + std::to_string(l);
        DenseMatrix z = affine(h, params.at(stem + ".w").value, params.at(stem + ".b").value);
        if (trace) {
            trace->inputs.push_back(std::move(h));
            trace->preacts.push_back(z);
        }
        h = relu(z);
    }
    DenseMatrix out = affine(h, params.at(prefix + ".out.w").value,
                             params.at(prefix + ".out.b").value);
    if (trace) trace->inputs.push_back(std::move(h));
    return out;
}

DenseMatrix Model::tower_backward(const std::string& prefix, const DenseMatrix& d_out,
                                  const TowerTrace& trace, ParamStore& params) const {
    Param& out_w = params.at(prefix + ".out.w");
    Param& out_b = params.at(prefix + ".out.b");
    DenseMatrix d = affine_backward(d_out, trace.inputs.back(), out_w.value, out_w.grad,
                                    out_b.grad);
    for (size_t l = cfg_.hidden_sizes.size(); l-- > 0;) {
        d = relu_backward(d, trace.preacts[l]);
        const std::string stem = prefix + ".l" + std::to_string(l);
        Param& w = params.at(stem + ".w");
        Param& b = params.at(stem + ".b");
        d = affine_backward(d, trace.inputs[l], w.value, w.grad, b.grad);
    }
    return d;
}

DenseMatrix Model::user_forward(const Batch& batch, const ParamStore& params, TowerTrace* trace,
                                DenseMatrix* x_out) const {
    DenseMatrix x = embed_features(batch.user_ids, user_features_, "emb.user.", params);
    DenseMatrix e = tower_forward("user", x, params, trace);
    if (x_out) *x_out = std::move(x);
    return e;
}

DenseMatrix Model::item_forward(const Batch& batch, const ParamStore& params, TowerTrace* trace,
                                DenseMatrix* x_out) const {
    DenseMatrix x = embed_features(batch.item_ids, item_features_, "emb.item.", params);
    DenseMatrix e = tower_forward("item", x, params, trace);
    if (x_out) *x_out = std::move(x);
    return e;
}

DenseMatrix Model::main_forward(const DenseMatrix& e_u, const DenseMatrix& e_i,
                                const ParamStore& params, TowerTrace* trace) const {
    if (e_u.rows != e_i.rows) throw ShapeError("main_forward: row counts disagree");
    return tower_forward("main", hcat(e_u, e_i), params, trace);
}

ForwardTrace Model::forward(const Batch& batch, const ParamStore& params) const {
    ForwardTrace t;
    t.user_ids = batch.user_ids;
    t.item_ids = batch.item_ids;
    t.e_u = user_forward(batch, params, &t.user_tower, &t.x_user);
    t.e_i = item_forward(batch, params, &t.item_tower, &t.x_item);
    t.s = main_forward(t.e_u, t.e_i, params, &t.main_orig);
    require_finite(t.s, "logits");
    return t;
}

ForwardTrace Model::dual_path_forward(const Batch& batch, const ParamStore& params,
                                      const RvqState& rvq) const {
    ForwardTrace t = forward(batch, params);
    t.dual_path = true;
    t.quant = quantize(t.e_u, rvq);
    t.e_u_q = ste_combine(t.e_u, t.quant.reconstruction);
    t.s_q = main_forward(t.e_u_q, t.e_i, params, &t.main_quant);
    require_finite(t.s_q, "quantized-path logits");
    return t;
}

ForwardTrace Model::dual_path_forward_fixed_offset(const Batch& batch, const ParamStore& params,
                                                   const DenseMatrix& offset,
                                                   const DenseMatrix& detached_item) const {
    ForwardTrace t = forward(batch, params);
    t.dual_path = true;
    t.e_u_q = add(t.e_u, offset);
    t.s_q = main_forward(t.e_u_q, detached_item, params, &t.main_quant);
    return t;
}

void Model::backward(const ForwardTrace& trace, const std::vector<double>& d_s,
                     const std::vector<double>& d_s_q, ParamStore& params) const {
    const int64_t batch = trace.s.rows;
    const int64_t d = cfg_.embedding_dim;
    DenseMatrix d_s_mat(batch, 1);
    for (int64_t r = 0; r < batch; ++r) d_s_mat.data[static_cast<size_t>(r)] = d_s[static_cast<size_t>(r)];

    DenseMatrix d_main_in = tower_backward("main", d_s_mat, trace.main_orig, params);
    DenseMatrix d_e_u = slice_cols(d_main_in, 0, d);
    DenseMatrix d_e_i = slice_cols(d_main_in, d, 2 * d);

    if (trace.dual_path) {
        DenseMatrix d_s_q_mat(batch, 1);
        for (int64_t r = 0; r < batch; ++r)
            d_s_q_mat.data[static_cast<size_t>(r)] = d_s_q[static_cast<size_t>(r)];
        DenseMatrix d_main_in_q = tower_backward("main", d_s_q_mat, trace.main_quant, params);
        // straight-through: the quantized-path user gradient passes to e_u
        // unchanged; the item part is dropped (stop_gradient on e_i).
        add_in_place(d_e_u, slice_cols(d_main_in_q, 0, d));
    }

    DenseMatrix d_x_user = tower_backward("user", d_e_u, trace.user_tower, params);
    embed_backward(d_x_user, trace.user_ids, user_features_, "emb.user.", params);
    DenseMatrix d_x_item = tower_backward("item", d_e_i, trace.item_tower, params);
    embed_backward(d_x_item, trace.item_ids, item_features_, "emb.item.", params);
}

}  // namespace groupce
