#pragma once

#include <vector>

#include "tapir/common.hpp"
#include "tapir/tensor.hpp"

namespace tapir {

// Elementwise / broadcast
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real c);
Tensor add_rowvec(const Tensor& a, const Tensor& bias);   // [m,n] + [n]
Tensor div_colvec(const Tensor& a, const Tensor& denom);  // row i divided by denom[i]

// Linear algebra (row-major, 2-D)
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_bt(const Tensor& a, const Tensor& b);  // a * b^T, b is [n,k]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b, a is [k,m]
Tensor matvec(const Tensor& a, const Tensor& x);     // [m,n]x[n] -> [m]
Tensor vecmat(const Tensor& x, const Tensor& a);     // x^T * a, [m]x[m,n] -> [n]
Tensor dot(const Tensor& a, const Tensor& b);        // -> scalar
Tensor outer(const Tensor& u, const Tensor& v);      // [m]x[n] -> [m,n]
Tensor div_by_scalar(const Tensor& v, const Tensor& s);  // v / s, s scalar tensor

// Shape plumbing
Tensor concat(const Tensor& a, const Tensor& b);              // 1-D
Tensor slice(const Tensor& a, int offset, int len);           // 1-D
Tensor slice_row(const Tensor& a, int row);                   // [m,n] -> [n]
Tensor slice_cols(const Tensor& a, int offset, int len);      // [m,n] -> [m,len]
Tensor concat_cols(const std::vector<Tensor>& parts);         // [m,n_i] -> [m,sum]
Tensor stack_rows(const std::vector<Tensor>& rows);           // k x [n] -> [k,n]
Tensor stack_scalars(const std::vector<Tensor>& xs);          // k scalars -> [k]
Tensor sum_rows(const Tensor& a);                             // [m,n] -> [n]

// Nonlinearities
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor elu1(const Tensor& x);  // elu(x) + 1, the linear-attention feature map

// Softmax with max-subtraction; row variant optionally applies a causal mask
// (position i attends to j <= i).
Tensor softmax(const Tensor& x);
Tensor row_softmax(const Tensor& scores, bool causal);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, real eps = real(1e-5));

// Inverted dropout: scales kept activations by 1/(1-rate) at train time,
// identity otherwise.
Tensor dropout(const Tensor& x, real rate, Rng& rng, bool train);

// Reductions
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& xs);

// Lookup
Tensor embedding(const Tensor& table, const std::vector<int>& ids);  // -> [T,E]

// Losses. cross_entropy averages -log softmax(logits)[gold] over positions
// whose gold label is >= 0 (negative = ignored). bce clamps the score to
// [eps, 1-eps], eps = 1e-7.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& gold);
Tensor bce(const Tensor& score, real target);

inline constexpr real kBceEps = real(1e-7);

// Non-differentiable helpers
int argmax(const std::vector<real>& v);             // lowest index wins ties
int argmax_row(const Tensor& a, int row);

// Affine layers with weights stored [out,in]
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul_bt(x, w), b);  // x: [T,in] -> [T,out]
}
inline Tensor linear_vec(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matvec(w, x), b);  // x: [in] -> [out]
}

}  // namespace tapir
