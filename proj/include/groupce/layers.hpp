#pragma once

#include "groupce/matrix.hpp"

namespace groupce {

// out = input·weight + bias, bias broadcast per row (bias is 1×out_cols).
DenseMatrix affine(const DenseMatrix& input, const DenseMatrix& weight, const DenseMatrix& bias);

// Reverse-mode contract for affine: accumulates dW += inputᵀ·d_out and
// db += colsum(d_out), returns d_input = d_out·Wᵀ.
DenseMatrix affine_backward(const DenseMatrix& d_out, const DenseMatrix& input,
                            const DenseMatrix& weight, DenseMatrix& weight_grad,
                            DenseMatrix& bias_grad);

}  // namespace groupce
