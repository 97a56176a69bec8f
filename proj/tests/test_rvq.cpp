#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "groupce/error.hpp"
#include "groupce/rng.hpp"
#include "groupce/rvq.hpp"

using namespace groupce;

namespace {

DenseMatrix random_matrix(Rng& rng, int64_t rows, int64_t cols, double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-scale, scale);
    return m;
}

bool row_in(const DenseMatrix& haystack, const DenseMatrix& m, int64_t row) {
    for (int64_t r = 0; r < haystack.rows; ++r)
        if (squared_distance_rows(haystack, r, m, row) == 0.0) return true;
    return false;
}

}  // namespace

TEST_CASE("init_codebooks seeds level 1 from the documented sample sequence") {
    Rng rng(123);
    const DenseMatrix batch = random_matrix(rng, 6, 4);
    const uint64_t seed = 2024;
    const RvqState state = init_codebooks(batch, 6, 1, seed);

    // replay the documented draw order: K uniform_index draws from Rng(seed)
    Rng oracle(seed);
    for (int64_t k = 0; k < 6; ++k) {
        const int64_t pick = static_cast<int64_t>(oracle.uniform_index(6));
        CHECK(squared_distance_rows(state.codebooks[0].vectors, k, batch, pick) == 0.0);
    }
    for (double c : state.codebooks[0].ema_count) CHECK(c == 1.0);
    CHECK(state.initialized);
}

TEST_CASE("init_codebooks with K=1, L=1 maps every row to code 0") {
    Rng rng(5);
    const DenseMatrix batch = random_matrix(rng, 8, 3);
    const RvqState state = init_codebooks(batch, 1, 1, 77);
    CHECK(row_in(batch, state.codebooks[0].vectors, 0));
    const QuantizeResult qr = quantize(batch, state);
    for (const auto& codes : qr.codes) CHECK(codes[0] == 0);
}

TEST_CASE("init_codebooks rejects a zero-sized configuration") {
    const DenseMatrix batch(2, 2, 1.0);
    CHECK_THROWS_AS(init_codebooks(batch, 0, 1, 1), ConfigError);
    CHECK_THROWS_AS(init_codebooks(batch, 1, 0, 1), ConfigError);
}

TEST_CASE("deeper levels are seeded from shallower-level residuals") {
    Rng rng(9);
    const DenseMatrix batch = random_matrix(rng, 10, 3);
    const uint64_t seed = 31;
    const RvqState state = init_codebooks(batch, 2, 2, seed);
    // level-2 vectors must be residuals of the batch after level-1
    // quantization; reproduce them with a truncated 1-level state
    RvqState level1 = state;
    level1.codebooks.resize(1);
    const QuantizeResult qr = quantize(batch, level1);
    const DenseMatrix& residuals = qr.residual_trail[1];
    for (int64_t k = 0; k < 2; ++k) CHECK(row_in(residuals, state.codebooks[1].vectors, k));
}

TEST_CASE("quantize picks the nearest code by inspection") {
    RvqState state;
    state.initialized = true;
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix::from_rows({{0.0, 0.0}, {1.0, 1.0}});
    cb.ema_count = {1.0, 1.0};
    state.codebooks.push_back(cb);

    const DenseMatrix e = DenseMatrix::from_rows({{0.9, 1.2}});
    const QuantizeResult qr = quantize(e, state);
    CHECK(qr.codes[0][0] == 1);
    CHECK(qr.reconstruction.at(0, 0) == doctest::Approx(1.0));
    CHECK(qr.reconstruction.at(0, 1) == doctest::Approx(1.0));
    CHECK(qr.residual_trail[1].at(0, 0) == doctest::Approx(-0.1));
    CHECK(qr.residual_trail[1].at(0, 1) == doctest::Approx(0.2));
}

TEST_CASE("an embedding equal to a code reconstructs exactly") {
    RvqState state;
    state.initialized = true;
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix::from_rows({{0.5, -0.25}, {2.0, 2.0}});
    cb.ema_count = {1.0, 1.0};
    state.codebooks.push_back(cb);
    const DenseMatrix e = DenseMatrix::from_rows({{2.0, 2.0}});
    const QuantizeResult qr = quantize(e, state);
    CHECK(qr.codes[0][0] == 1);
    CHECK(max_abs(qr.residual_trail[1]) == 0.0);
}

TEST_CASE("quantize ties break to the lowest code index") {
    RvqState state;
    state.initialized = true;
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}});
    cb.ema_count = {1.0, 1.0, 1.0};
    state.codebooks.push_back(cb);
    const DenseMatrix e = DenseMatrix::from_rows({{0.0, 0.0}});  // codes 0,1,2 equidistant? no: 0 and 1 identical, 2 same distance
    const QuantizeResult qr = quantize(e, state);
    CHECK(qr.codes[0][0] == 0);
}

TEST_CASE("telescoping identity holds to 1e-12 across depths") {
    Rng rng(17);
    for (int64_t levels = 1; levels <= 4; ++levels) {
        const DenseMatrix seed_batch = random_matrix(rng, 64, 6);
        const RvqState state = init_codebooks(seed_batch, 4, levels, 1000 + levels);
        const DenseMatrix e = random_matrix(rng, 100, 6, 2.0);
        const QuantizeResult qr = quantize(e, state);
        const DenseMatrix gap = sub(sub(e, qr.reconstruction), qr.residual_trail.back());
        CHECK(max_abs(gap) < 1e-12);
    }
}

TEST_CASE("chosen codes are argmin over their level (exhaustive check)") {
    Rng rng(23);
    const DenseMatrix seed_batch = random_matrix(rng, 32, 4);
    const RvqState state = init_codebooks(seed_batch, 5, 3, 55);
    const DenseMatrix e = random_matrix(rng, 40, 4, 1.5);
    const QuantizeResult qr = quantize(e, state);
    for (int64_t r = 0; r < e.rows; ++r) {
        DenseMatrix residual = take_row(e, r);
        for (size_t l = 0; l < state.codebooks.size(); ++l) {
            const Codebook& cb = state.codebooks[l];
            const int chosen = qr.codes[static_cast<size_t>(r)][l];
            const double chosen_dist =
                squared_distance_rows(residual, 0, cb.vectors, chosen);
            for (int64_t k = 0; k < cb.num_codes(); ++k)
                CHECK(chosen_dist <= squared_distance_rows(residual, 0, cb.vectors, k));
            for (int64_t j = 0; j < residual.cols; ++j)
                residual.at(0, j) -= cb.vectors.at(chosen, j);
        }
    }
}

TEST_CASE("quantize is pure and translation-equivariant at level 1") {
    Rng rng(31);
    const DenseMatrix seed_batch = random_matrix(rng, 16, 3);
    const RvqState state = init_codebooks(seed_batch, 4, 1, 3);
    const DenseMatrix e = random_matrix(rng, 20, 3);

    const QuantizeResult a = quantize(e, state);
    const QuantizeResult b = quantize(e, state);
    CHECK(a.codes == b.codes);
    CHECK(max_abs_diff(a.reconstruction, b.reconstruction) == 0.0);

    // shift every input and every level-1 code by the same constant vector
    RvqState shifted = state;
    DenseMatrix e_shifted = e;
    const double shift[3] = {0.7, -1.3, 0.2};
    for (int64_t k = 0; k < shifted.codebooks[0].num_codes(); ++k)
        for (int64_t j = 0; j < 3; ++j) shifted.codebooks[0].vectors.at(k, j) += shift[j];
    for (int64_t r = 0; r < e_shifted.rows; ++r)
        for (int64_t j = 0; j < 3; ++j) e_shifted.at(r, j) += shift[j];
    const QuantizeResult c = quantize(e_shifted, shifted);
    CHECK(c.codes == a.codes);
}

TEST_CASE("ste_combine forwards the reconstruction exactly") {
    Rng rng(41);
    const DenseMatrix e = random_matrix(rng, 5, 4);
    const DenseMatrix recon = random_matrix(rng, 5, 4);
    const DenseMatrix out = ste_combine(e, recon);
    CHECK(max_abs_diff(out, recon) == 0.0);
    const DenseMatrix same = ste_combine(e, e);
    CHECK(max_abs_diff(same, e) == 0.0);
}

TEST_CASE("ema_update one-step arithmetic") {
    RvqState state;
    state.initialized = true;
    state.decay = 0.99;
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix::from_rows({{0.0, 0.0}, {5.0, 5.0}});
    cb.ema_count = {1.0, 2.0};
    state.codebooks.push_back(cb);

    // two rows assigned to code 0 with mean (1,1); code 1 unassigned
    std::vector<DenseMatrix> trail;
    trail.push_back(DenseMatrix::from_rows({{0.5, 0.5}, {1.5, 1.5}}));
    trail.push_back(DenseMatrix(2, 2));
    const std::vector<std::vector<int>> codes = {{0}, {0}};
    ema_update(state, trail, codes);

    CHECK(state.codebooks[0].vectors.at(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(state.codebooks[0].vectors.at(0, 1) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(state.codebooks[0].ema_count[0] == doctest::Approx(0.99 * 1.0 + 0.01 * 2.0));
    // decay-only branch
    CHECK(state.codebooks[0].vectors.at(1, 0) == 5.0);
    CHECK(state.codebooks[0].ema_count[1] == doctest::Approx(1.98));
}

TEST_CASE("fixed assignments contract codebook error geometrically at rate m") {
    Rng rng(47);
    RvqState state;
    state.initialized = true;
    state.decay = 0.99;
    Codebook cb;
    cb.level = 1;
    cb.vectors = random_matrix(rng, 2, 3, 2.0);
    cb.ema_count = {1.0, 1.0};
    state.codebooks.push_back(cb);

    // fixed residual set: rows 0,1 -> code 0; row 2 -> code 1
    std::vector<DenseMatrix> trail;
    trail.push_back(DenseMatrix::from_rows(
        {{1.0, 2.0, -1.0}, {3.0, 0.0, 1.0}, {-2.0, -2.0, 0.5}}));
    trail.push_back(DenseMatrix(3, 3));
    const std::vector<std::vector<int>> codes = {{0}, {0}, {1}};
    const DenseMatrix mu = DenseMatrix::from_rows({{2.0, 1.0, 0.0}, {-2.0, -2.0, 0.5}});

    const double initial_error = max_abs_diff(state.codebooks[0].vectors, mu);
    double prev_error = initial_error;
    for (int t = 0; t < 500; ++t) {
        ema_update(state, trail, codes);
        const double err = max_abs_diff(state.codebooks[0].vectors, mu);
        CHECK(err == doctest::Approx(0.99 * prev_error).epsilon(1e-9));
        prev_error = err;
    }
    // geometric recurrence evaluated directly: factor m^500
    const double predicted = std::pow(0.99, 500.0);
    CHECK(predicted == doctest::Approx(6.57e-3).epsilon(1e-3));
    CHECK(prev_error / initial_error == doctest::Approx(predicted).epsilon(1e-9));
}

TEST_CASE("smoothed counts at uniform usage equal the raw counts") {
    Codebook cb;
    cb.level = 1;
    cb.vectors = DenseMatrix(4, 2);
    cb.ema_count = {1.0, 1.0, 1.0, 1.0};
    cb.smoothing_eps = 1e-5;
    const std::vector<double> smoothed = smoothed_counts(cb);
    for (double s : smoothed) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expire_codes leaves healthy codebooks untouched") {
    Rng rng(53);
    const DenseMatrix batch = random_matrix(rng, 10, 3);
    RvqState state = init_codebooks(batch, 3, 2, 5);
    for (auto& cb : state.codebooks) cb.ema_count = {4.0, 4.0, 4.0};
    const RvqState before = state;
    expire_codes(state, batch, 99);
    for (size_t l = 0; l < state.codebooks.size(); ++l) {
        CHECK(max_abs_diff(state.codebooks[l].vectors, before.codebooks[l].vectors) == 0.0);
        CHECK(state.codebooks[l].ema_count == before.codebooks[l].ema_count);
    }
}

TEST_CASE("expire_codes replaces a starved level-1 code with a batch row") {
    Rng rng(59);
    const DenseMatrix batch = random_matrix(rng, 12, 3);
    RvqState state = init_codebooks(batch, 3, 1, 7);
    state.codebooks[0].ema_count = {5.0, 0.0, 5.0};
    state.codebooks[0].vectors.at(1, 0) = 1e6;  // park the dead code far away
    expire_codes(state, batch, 1234);
    CHECK(row_in(batch, state.codebooks[0].vectors, 1));
    CHECK(state.codebooks[0].ema_count[1] == 1.0);
}

TEST_CASE("a count exactly at the threshold is not replaced") {
    Rng rng(61);
    const DenseMatrix batch = random_matrix(rng, 8, 2);
    RvqState state = init_codebooks(batch, 2, 1, 9);
    state.expire_threshold = 1.0;
    // smoothing maps equal counts to themselves, so both sit exactly at 1.0
    state.codebooks[0].ema_count = {1.0, 1.0};
    const DenseMatrix before = state.codebooks[0].vectors;
    expire_codes(state, batch, 4321);
    CHECK(max_abs_diff(state.codebooks[0].vectors, before) == 0.0);
}

TEST_CASE("ema_update keeps counts nonnegative and shapes fixed") {
    Rng rng(67);
    const DenseMatrix batch = random_matrix(rng, 20, 4);
    RvqState state = init_codebooks(batch, 4, 2, 13);
    const DenseMatrix e = random_matrix(rng, 20, 4);
    for (int step = 0; step < 50; ++step) {
        const QuantizeResult qr = quantize(e, state);
        ema_update(state, qr.residual_trail, qr.codes);
        for (const auto& cb : state.codebooks) {
            CHECK(cb.vectors.rows == 4);
            CHECK(cb.vectors.cols == 4);
            for (double c : cb.ema_count) CHECK(c >= 0.0);
        }
    }
}

TEST_CASE("quantize on an uninitialized state is an error") {
    RvqState state;
    const DenseMatrix e(2, 2, 0.5);
    CHECK_THROWS_AS(quantize(e, state), ConfigError);
}
