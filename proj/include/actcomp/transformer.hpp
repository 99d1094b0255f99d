#pragma once

#include "actcomp/model.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

// Layer normalization over the trailing axis: (x - mean) / sqrt(var + eps)
// scaled and shifted per channel. Variance is the population form.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);

// Attention context for one batch element and a contiguous head range
// [head_lo, head_hi): rows are seq positions, columns the heads' concatenated
// channels. qkv is that batch element's (seq x 3*h_local) projection, laid out
// [Q | K | V] with h_local = (head_hi - head_lo) * head_dim. Shared by the
// monolithic forward and the tensor-parallel decomposition so a single worker
// reproduces the full computation bit for bit.
Tensor attention_context(const Tensor& qkv, size_t heads_local, size_t head_dim);

// One pre-norm encoder layer: x + Attn(LN1(x)), then + MLP(LN2(.)) with GELU.
// x is batch x seq x hidden.
Tensor transformer_layer_forward(const Tensor& x, const LayerWeights& w, size_t heads);

// The full stack, sequentially.
Tensor model_forward(const Tensor& x, const StackedModel& model);

} // namespace actcomp
