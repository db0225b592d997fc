#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ladapt/autodiff/var.hpp"

namespace ladapt {

enum class Activation { ReLU, GELU };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

// Linear algebra. All matrices are rank 2.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);
/// x[m x k] * w[k x n] + b[n], fused.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

// Elementwise.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
/// x[m x n] + b[n] broadcast over rows.
template <typename T> Var<T> add_row(const Var<T>& x, const Var<T>& b);

template <typename T> Var<T> relu(const Var<T>& x);
/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
template <typename T> Var<T> gelu(const Var<T>& x);
template <typename T> Var<T> activate(const Var<T>& x, Activation act);

template <typename T> Var<T> softmax(const Var<T>& x, std::size_t axis);
template <typename T> Var<T> log_softmax(const Var<T>& x, std::size_t axis);

/// Normalizes over the last axis: (x - mean) / sqrt(var + eps) * gamma + beta.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

// Reductions and reshaping.
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
/// [T x d] -> [d]; throws ShapeError when T == 0.
template <typename T> Var<T> mean_over_time(const Var<T>& x);
/// Same storage under a new shape of equal size.
template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t end);
/// Rows of x at the given indices, in order.
template <typename T> Var<T> select_rows(const Var<T>& x, std::span<const std::size_t> rows);
/// Copy of x[T x d] whose listed rows are replaced by v[d].
template <typename T>
Var<T> replace_rows(const Var<T>& x, std::span<const std::size_t> rows, const Var<T>& v);

/// sum_l weights[l] * parts[l]; weights has shape [L].
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& parts, const Var<T>& weights);

/// Scaled dot-product attention over num_heads column blocks of q, k, v
/// ([T x d] each); returns the concatenated per-head contexts [T x d].
template <typename T>
Var<T> multi_head_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                            std::size_t num_heads);

// Losses.
/// -log_softmax(logits)[label] for logits of shape [C].
template <typename T> Var<T> cross_entropy(const Var<T>& logits, std::size_t label);
/// Mean squared error against a constant target of the same shape.
template <typename T> Var<T> mse(const Var<T>& pred, const Tensor<T>& target);

}  // namespace ladapt
