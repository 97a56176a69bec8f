#include "groupce/rvq.hpp"

#include <limits>

#include "groupce/error.hpp"
#include "groupce/rng.hpp"

namespace groupce {

namespace {

int nearest_code(const Codebook& cb, const DenseMatrix& residuals, int64_t row) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int64_t k = 0; k < cb.num_codes(); ++k) {
        const double d = squared_distance_rows(residuals, row, cb.vectors, k);
        if (d < best_dist) {
            best_dist = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

}  // namespace

RvqState init_codebooks(const DenseMatrix& first_batch_embeddings, int64_t codebook_size,
                        int64_t num_levels, uint64_t seed, double decay, double expire_threshold,
                        double smoothing_eps) {
    if (codebook_size < 1) throw ConfigError("rvq: codebook size must be >= 1");
    if (num_levels < 1) throw ConfigError("rvq: number of levels must be >= 1");
    if (first_batch_embeddings.rows < 1) throw DataError("rvq: empty seeding batch");

    RvqState state;
    state.decay = decay;
    state.expire_threshold = expire_threshold;

    Rng rng(seed);
    const int64_t n = first_batch_embeddings.rows;
    const int64_t d = first_batch_embeddings.cols;
    DenseMatrix residuals = first_batch_embeddings;
    for (int64_t l = 0; l < num_levels; ++l) {
        Codebook cb;
        cb.level = static_cast<int>(l + 1);
        cb.smoothing_eps = smoothing_eps;
        cb.vectors = DenseMatrix(codebook_size, d);
        cb.ema_count.assign(static_cast<size_t>(codebook_size), 1.0);
        for (int64_t k = 0; k < codebook_size; ++k) {
            const int64_t pick = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(n)));
            std::copy(residuals.row_ptr(pick), residuals.row_ptr(pick) + d, cb.vectors.row_ptr(k));
        }
        // residuals feeding the next deeper level
        for (int64_t r = 0; r < n; ++r) {
            const int code = nearest_code(cb, residuals, r);
            const double* cv = cb.vectors.row_ptr(code);
            double* rr = residuals.row_ptr(r);
            for (int64_t j = 0; j < d; ++j) rr[j] -= cv[j];
        }
        state.codebooks.push_back(std::move(cb));
    }
    state.initialized = true;
    return state;
}

QuantizeResult quantize(const DenseMatrix& embeddings, const RvqState& state) {
    if (!state.initialized) throw ConfigError("rvq: quantize called on uninitialized state");
    if (embeddings.cols != state.dim()) throw ShapeError("rvq: embedding dim disagrees with codebooks");

    const int64_t n = embeddings.rows;
    const int64_t d = embeddings.cols;
    const int64_t levels = state.levels();

    QuantizeResult out;
    out.codes.assign(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(levels), 0));
    out.reconstruction = DenseMatrix(n, d);
    out.residual_trail.reserve(static_cast<size_t>(levels + 1));
    out.residual_trail.push_back(embeddings);

    DenseMatrix residuals = embeddings;
    for (int64_t l = 0; l < levels; ++l) {
        const Codebook& cb = state.codebooks[static_cast<size_t>(l)];
        for (int64_t r = 0; r < n; ++r) {
            const int code = nearest_code(cb, residuals, r);
            out.codes[static_cast<size_t>(r)][static_cast<size_t>(l)] = code;
            const double* cv = cb.vectors.row_ptr(code);
            double* rec = out.reconstruction.row_ptr(r);
            double* rr = residuals.row_ptr(r);
            for (int64_t j = 0; j < d; ++j) {
                rec[j] += cv[j];
                rr[j] -= cv[j];
            }
        }
        out.residual_trail.push_back(residuals);
    }
    return out;
}

DenseMatrix ste_combine(const DenseMatrix& embeddings, const DenseMatrix& reconstruction) {
    require_same_shape(embeddings, reconstruction, "ste_combine");
    return reconstruction;
}

void ema_update(RvqState& state, const std::vector<DenseMatrix>& residual_trail,
                const std::vector<std::vector<int>>& codes) {
    if (!state.initialized) throw ConfigError("rvq: ema_update on uninitialized state");
    const int64_t levels = state.levels();
    if (static_cast<int64_t>(residual_trail.size()) != levels + 1)
        throw ShapeError("rvq: residual trail length disagrees with level count");
    const int64_t n = residual_trail.front().rows;
    const int64_t d = state.dim();
    const double m = state.decay;

    for (int64_t l = 0; l < levels; ++l) {
        Codebook& cb = state.codebooks[static_cast<size_t>(l)];
        const DenseMatrix& level_input = residual_trail[static_cast<size_t>(l)];
        const int64_t K = cb.num_codes();
        DenseMatrix sums(K, d);
        std::vector<int64_t> counts(static_cast<size_t>(K), 0);
        for (int64_t r = 0; r < n; ++r) {
            const int k = codes[static_cast<size_t>(r)][static_cast<size_t>(l)];
            counts[static_cast<size_t>(k)] += 1;
            const double* src = level_input.row_ptr(r);
            double* dst = sums.row_ptr(k);
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        for (int64_t k = 0; k < K; ++k) {
            const int64_t nk = counts[static_cast<size_t>(k)];
            double& count = cb.ema_count[static_cast<size_t>(k)];
            if (nk >= 1) {
                double* cv = cb.vectors.row_ptr(k);
                const double* sum = sums.row_ptr(k);
                for (int64_t j = 0; j < d; ++j)
                    cv[j] = m * cv[j] + (1.0 - m) * (sum[j] / static_cast<double>(nk));
                count = m * count + (1.0 - m) * static_cast<double>(nk);
            } else {
                count = m * count;
            }
        }
    }
}

std::vector<double> smoothed_counts(const Codebook& cb) {
    const size_t K = cb.ema_count.size();
    double total = 0.0;
    for (double c : cb.ema_count) total += c;
    std::vector<double> out(K, 0.0);
    if (total <= 0.0) return out;
    const double eps = cb.smoothing_eps;
    const double denom = total + static_cast<double>(K) * eps;
    for (size_t k = 0; k < K; ++k) out[k] = (cb.ema_count[k] + eps) / denom * total;
    return out;
}

void expire_codes(RvqState& state, const DenseMatrix& batch_embeddings, uint64_t seed) {
    if (!state.initialized) throw ConfigError("rvq: expire_codes on uninitialized state");
    if (batch_embeddings.rows < 1) throw DataError("rvq: expire_codes needs a nonempty batch");

    // Level-l replacements come from the level-l residuals of the current
    // batch under the current codebooks (level 1 residuals are the
    // embeddings themselves).
    const QuantizeResult qr = quantize(batch_embeddings, state);
    Rng rng(seed);
    const int64_t n = batch_embeddings.rows;
    const int64_t d = state.dim();
    for (int64_t l = 0; l < state.levels(); ++l) {
        Codebook& cb = state.codebooks[static_cast<size_t>(l)];
        const DenseMatrix& pool = qr.residual_trail[static_cast<size_t>(l)];
        const std::vector<double> smoothed = smoothed_counts(cb);
        for (int64_t k = 0; k < cb.num_codes(); ++k) {
            if (smoothed[static_cast<size_t>(k)] < state.expire_threshold) {
                const int64_t pick =
                    static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(n)));
                std::copy(pool.row_ptr(pick), pool.row_ptr(pick) + d, cb.vectors.row_ptr(k));
                cb.ema_count[static_cast<size_t>(k)] = 1.0;
            }
        }
    }
}

}  // namespace groupce
