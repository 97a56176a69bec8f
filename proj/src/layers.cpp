#include "groupce/layers.hpp"

#include "groupce/error.hpp"

namespace groupce {

DenseMatrix affine(const DenseMatrix& input, const DenseMatrix& weight, const DenseMatrix& bias) {
    if (input.cols != weight.rows) throw ShapeError("affine: inner dimensions disagree");
    if (bias.rows != 1 || bias.cols != weight.cols) throw ShapeError("affine: bad bias shape");
    return add_row_broadcast(matmul(input, weight), bias);
}

DenseMatrix affine_backward(const DenseMatrix& d_out, const DenseMatrix& input,
                            const DenseMatrix& weight, DenseMatrix& weight_grad,
                            DenseMatrix& bias_grad) {
    require_shape(d_out, input.rows, weight.cols, "affine_backward: d_out");
    add_in_place(weight_grad, matmul_tn(input, d_out));
    add_in_place(bias_grad, col_sums(d_out));
    return matmul_nt(d_out, weight);
}

}  // namespace groupce
