#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace groupce {

// Dense row-major f64 matrix. The only tensor type in the library; row and
// column vectors are 1×n / n×1 matrices.
struct DenseMatrix {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(int64_t r, int64_t c, double fill = 0.0);

    static DenseMatrix from_rows(const std::vector<std::vector<double>>& vals);

    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols + c)]; }

    double* row_ptr(int64_t r) { return data.data() + r * cols; }
    const double* row_ptr(int64_t r) const { return data.data() + r * cols; }

    int64_t size() const { return rows * cols; }
    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v);
    bool all_finite() const;
};

void require_shape(const DenseMatrix& m, int64_t rows, int64_t cols, const std::string& what);
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const std::string& what);
void require_finite(const DenseMatrix& m, const std::string& what);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a·b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // aᵀ·b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a·bᵀ

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double k);
void add_in_place(DenseMatrix& a, const DenseMatrix& b);
void axpy(DenseMatrix& y, double alpha, const DenseMatrix& x);  // y += alpha·x

DenseMatrix add_row_broadcast(const DenseMatrix& a, const DenseMatrix& row);  // row is 1×cols
DenseMatrix col_sums(const DenseMatrix& a);                                   // 1×cols

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix slice_cols(const DenseMatrix& a, int64_t begin, int64_t end);  // [begin, end)
DenseMatrix take_row(const DenseMatrix& a, int64_t r);                     // 1×cols copy

// Numerically stable logistic: never overflows, stays positive down to the
// subnormal range for very negative inputs.
double sigmoid_stable(double s);
DenseMatrix sigmoid(const DenseMatrix& logits);

DenseMatrix relu(const DenseMatrix& a);
DenseMatrix relu_backward(const DenseMatrix& d_out, const DenseMatrix& pre_act);

double max_abs(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a);
double squared_distance_rows(const DenseMatrix& a, int64_t ar, const DenseMatrix& b, int64_t br);

}  // namespace groupce
