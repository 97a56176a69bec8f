#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupce/data.hpp"
#include "groupce/matrix.hpp"
#include "groupce/optim.hpp"
#include "groupce/rng.hpp"
#include "groupce/rvq.hpp"

namespace groupce {

// max(⌊log2(cardinality)⌋·2, 16)
int64_t embedding_dim_for(int64_t cardinality);

struct TowerConfig {
    std::vector<int64_t> hidden_sizes = {64, 64};
    int64_t embedding_dim = 32;  // d, output width of both towers

    void validate() const;
};

// Cached activations for one MLP stack: the input to every affine layer and
// the pre-activation of every hidden layer.
struct TowerTrace {
    std::vector<DenseMatrix> inputs;
    std::vector<DenseMatrix> preacts;
};

struct ForwardTrace {
    std::vector<std::vector<int64_t>> user_ids, item_ids;
    DenseMatrix x_user, x_item;
    TowerTrace user_tower, item_tower;
    DenseMatrix e_u, e_i;

    bool dual_path = false;
    QuantizeResult quant;
    DenseMatrix e_u_q;
    TowerTrace main_orig, main_quant;
    DenseMatrix s;    // batch×1 logits, original path
    DenseMatrix s_q;  // batch×1 logits, quantized path

    std::vector<double> logits() const;
    std::vector<double> logits_q() const;
};

// Two feature towers plus a shared main network over [e_u, e_i]. The
// quantized path reuses the main network weights, feeds it the straight-
// through quantized user embedding, and detaches the item embedding so the
// auxiliary loss never updates the item tower.
class Model {
public:
    Model(std::vector<FeatureSpec> user_features, std::vector<FeatureSpec> item_features,
          TowerConfig cfg);

    // Creates and initializes every named tensor (embeddings, tower and main
    // network weights) plus the per-level uncertainty parameters when
    // rvq_levels > 0.
    void init_params(ParamStore& params, uint64_t seed, int64_t rvq_levels) const;

    DenseMatrix embed_features(const std::vector<std::vector<int64_t>>& ids,
                               const std::vector<FeatureSpec>& schema, const std::string& prefix,
                               const ParamStore& params) const;
    void embed_backward(const DenseMatrix& d_x, const std::vector<std::vector<int64_t>>& ids,
                        const std::vector<FeatureSpec>& schema, const std::string& prefix,
                        ParamStore& params) const;

    DenseMatrix user_forward(const Batch& batch, const ParamStore& params,
                             TowerTrace* trace = nullptr, DenseMatrix* x_out = nullptr) const;
    DenseMatrix item_forward(const Batch& batch, const ParamStore& params,
                             TowerTrace* trace = nullptr, DenseMatrix* x_out = nullptr) const;
    DenseMatrix main_forward(const DenseMatrix& e_u, const DenseMatrix& e_i,
                             const ParamStore& params, TowerTrace* trace = nullptr) const;

    // Original path only (serving path).
    ForwardTrace forward(const Batch& batch, const ParamStore& params) const;
    // Both paths; quantizes e_u against the given state (state unmodified).
    ForwardTrace dual_path_forward(const Batch& batch, const ParamStore& params,
                                   const RvqState& rvq) const;
    // Both paths with the quantization offset and the detached item
    // embedding pinned at base values: e_u_q = e_u + offset and
    // s_q = main(e_u_q, detached_item). This is the function finite
    // differences probe under the straight-through and stop-gradient
    // conventions (codes, offsets and the detached e_i are constants).
    ForwardTrace dual_path_forward_fixed_offset(const Batch& batch, const ParamStore& params,
                                                const DenseMatrix& offset,
                                                const DenseMatrix& detached_item) const;

    // Accumulates parameter gradients from logit-space gradients; d_s_q is
    // ignored for single-path traces. Item-tower gradients receive no
    // contribution from the quantized path.
    void backward(const ForwardTrace& trace, const std::vector<double>& d_s,
                  const std::vector<double>& d_s_q, ParamStore& params) const;

    const std::vector<FeatureSpec>& user_features() const { return user_features_; }
    const std::vector<FeatureSpec>& item_features() const { return item_features_; }
    const TowerConfig& config() const { return cfg_; }
    int64_t embedding_dim() const { return cfg_.embedding_dim; }

    static constexpr const char* kLogSigmaParam = "uncert.log_sigma";

private:
    DenseMatrix tower_forward(const std::string& prefix, const DenseMatrix& x,
                              const ParamStore& params, TowerTrace* trace) const;
    DenseMatrix tower_backward(const std::string& prefix, const DenseMatrix& d_out,
                               const TowerTrace& trace, ParamStore& params) const;
    void init_tower(ParamStore& params, const std::string& prefix, int64_t in_dim, int64_t out_dim,
                    Rng& rng) const;

    std::vector<FeatureSpec> user_features_;
    std::vector<FeatureSpec> item_features_;
    TowerConfig cfg_;
    int64_t user_input_dim_ = 0;
    int64_t item_input_dim_ = 0;
};

}  // namespace groupce
