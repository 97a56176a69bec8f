#pragma once

#include <cstdint>
#include <vector>

#include "groupce/matrix.hpp"

namespace groupce {

// One quantization stage: K prototype vectors plus EMA usage counts.
struct Codebook {
    int level = 0;  // 1-based
    DenseMatrix vectors;            // K×d
    std::vector<double> ema_count;  // K
    double smoothing_eps = 1e-5;

    int64_t num_codes() const { return vectors.rows; }
};

// Entire mutable state of the multi-stage quantizer. Codebooks learn by EMA
// only; they are never touched by the optimizer.
struct RvqState {
    std::vector<Codebook> codebooks;
    double decay = 0.99;
    double expire_threshold = 1.0;
    bool initialized = false;

    int64_t levels() const { return static_cast<int64_t>(codebooks.size()); }
    int64_t dim() const { return codebooks.empty() ? 0 : codebooks.front().vectors.cols; }
};

struct QuantizeResult {
    std::vector<std::vector<int>> codes;       // per row, length L
    DenseMatrix reconstruction;                // batch×d, sum of chosen vectors
    std::vector<DenseMatrix> residual_trail;   // L+1 matrices; [0] is the input itself
};

// Seeds level 1 from K rows sampled with replacement from the batch, each
// deeper level from the residuals left after quantizing through shallower
// levels. EMA counts start at 1.0. Draw order: K uniform_index draws per
// level, shallow to deep, from Rng(seed).
RvqState init_codebooks(const DenseMatrix& first_batch_embeddings, int64_t codebook_size,
                        int64_t num_levels, uint64_t seed, double decay = 0.99,
                        double expire_threshold = 1.0, double smoothing_eps = 1e-5);

// Nearest-prototype assignment per level (ties break to the lowest index),
// residual cascade, and summed reconstruction. Pure: state is untouched.
QuantizeResult quantize(const DenseMatrix& embeddings, const RvqState& state);

// Straight-through combination: forward value equals the reconstruction
// exactly; the training graph routes its gradient to the embedding unchanged
// and never into the codebooks.
DenseMatrix ste_combine(const DenseMatrix& embeddings, const DenseMatrix& reconstruction);

// EMA move of each assigned code toward the mean of the residuals it was
// assigned at its level; counts decay everywhere, rise where assigned.
void ema_update(RvqState& state, const std::vector<DenseMatrix>& residual_trail,
                const std::vector<std::vector<int>>& codes);

// Laplace-smoothed counts used only for expiration decisions.
std::vector<double> smoothed_counts(const Codebook& cb);

// Replaces every code whose smoothed count is strictly below the threshold
// with a sampled batch embedding (level 1) or sampled level-l residual
// (deeper levels), resetting its count to 1.0.
void expire_codes(RvqState& state, const DenseMatrix& batch_embeddings, uint64_t seed);

}  // namespace groupce
