#include "groupce/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "groupce/error.hpp"

namespace groupce {

DenseMatrix::DenseMatrix(int64_t r, int64_t c, double fill_value)
    : rows(r), cols(c), data(static_cast<size_t>(r * c), fill_value) {}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& vals) {
    if (vals.empty()) return {};
    DenseMatrix m(static_cast<int64_t>(vals.size()), static_cast<int64_t>(vals[0].size()));
    for (int64_t i = 0; i < m.rows; ++i) {
        if (static_cast<int64_t>(vals[i].size()) != m.cols)
            throw ShapeError("from_rows: ragged row lengths");
        std::copy(vals[i].begin(), vals[i].end(), m.row_ptr(i));
    }
    return m;
}

void DenseMatrix::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool DenseMatrix::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_shape(const DenseMatrix& m, int64_t rows, int64_t cols, const std::string& what) {
    if (m.rows != rows || m.cols != cols)
        throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows) + "x" + std::to_string(m.cols));
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const std::string& what) {
    if (!a.same_shape(b))
        throw ShapeError(what + ": shape mismatch " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols));
}

void require_finite(const DenseMatrix& m, const std::string& what) {
    if (!m.all_finite()) throw DivergenceError(what + ": non-finite entries");
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions disagree");
    DenseMatrix out(a.rows, b.cols);
    for (int64_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int64_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row_ptr(k);
            for (int64_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: leading dimensions disagree");
    DenseMatrix out(a.cols, b.cols);
    for (int64_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        const double* brow = b.row_ptr(i);
        for (int64_t p = 0; p < a.cols; ++p) {
            const double aip = arow[p];
            double* orow = out.row_ptr(p);
            for (int64_t q = 0; q < b.cols; ++q) orow[q] += aip * brow[q];
        }
    }
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: trailing dimensions disagree");
    DenseMatrix out(a.rows, b.rows);
    for (int64_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int64_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (int64_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
    return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add");
    DenseMatrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "sub");
    DenseMatrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

DenseMatrix scale(const DenseMatrix& a, double k) {
    DenseMatrix out = a;
    for (double& v : out.data) v *= k;
    return out;
}

void add_in_place(DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add_in_place");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy(DenseMatrix& y, double alpha, const DenseMatrix& x) {
    require_same_shape(y, x, "axpy");
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

DenseMatrix add_row_broadcast(const DenseMatrix& a, const DenseMatrix& row) {
    if (row.rows != 1 || row.cols != a.cols) throw ShapeError("add_row_broadcast: bad bias shape");
    DenseMatrix out = a;
    for (int64_t i = 0; i < a.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (int64_t j = 0; j < a.cols; ++j) orow[j] += row.data[static_cast<size_t>(j)];
    }
    return out;
}

DenseMatrix col_sums(const DenseMatrix& a) {
    DenseMatrix out(1, a.cols);
    for (int64_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (int64_t j = 0; j < a.cols; ++j) out.data[static_cast<size_t>(j)] += arow[j];
    }
    return out;
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) throw ShapeError("hcat: row counts disagree");
    DenseMatrix out(a.rows, a.cols + b.cols);
    for (int64_t i = 0; i < a.rows; ++i) {
        std::copy(a.row_ptr(i), a.row_ptr(i) + a.cols, out.row_ptr(i));
        std::copy(b.row_ptr(i), b.row_ptr(i) + b.cols, out.row_ptr(i) + a.cols);
    }
    return out;
}

DenseMatrix slice_cols(const DenseMatrix& a, int64_t begin, int64_t end) {
    if (begin < 0 || end > a.cols || begin > end) throw ShapeError("slice_cols: bad range");
    DenseMatrix out(a.rows, end - begin);
    for (int64_t i = 0; i < a.rows; ++i)
        std::copy(a.row_ptr(i) + begin, a.row_ptr(i) + end, out.row_ptr(i));
    return out;
}

DenseMatrix take_row(const DenseMatrix& a, int64_t r) {
    DenseMatrix out(1, a.cols);
    std::copy(a.row_ptr(r), a.row_ptr(r) + a.cols, out.row_ptr(0));
    return out;
}

double sigmoid_stable(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

DenseMatrix sigmoid(const DenseMatrix& logits) {
    DenseMatrix out = logits;
    for (double& v : out.data) v = sigmoid_stable(v);
    return out;
}

DenseMatrix relu(const DenseMatrix& a) {
    DenseMatrix out = a;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

DenseMatrix relu_backward(const DenseMatrix& d_out, const DenseMatrix& pre_act) {
    require_same_shape(d_out, pre_act, "relu_backward");
    DenseMatrix out = d_out;
    for (size_t i = 0; i < out.data.size(); ++i)
        if (pre_act.data[i] <= 0.0) out.data[i] = 0.0;
    return out;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

double frobenius_norm(const DenseMatrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return std::sqrt(acc);
}

double squared_distance_rows(const DenseMatrix& a, int64_t ar, const DenseMatrix& b, int64_t br) {
    const double* x = a.row_ptr(ar);
    const double* y = b.row_ptr(br);
    double acc = 0.0;
    for (int64_t k = 0; k < a.cols; ++k) {
        const double d = x[k] - y[k];
        acc += d * d;
    }
    return acc;
}

}  // namespace groupce
