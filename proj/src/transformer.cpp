#include "actcomp/transformer.hpp"

#include <cmath>

namespace actcomp {

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    size_t h = x.last_extent();
    if (gain.numel() != h || bias.numel() != h) {
        throw dimension_error("layer_norm: gain/bias width must match trailing extent");
    }
    Tensor out(x.shape());
    size_t rows = x.leading_rows();
    for (size_t r = 0; r < rows; ++r) {
        const float* in = x.data() + r * h;
        float* o = out.data() + r * h;
        double mean = 0.0;
        for (size_t j = 0; j < h; ++j) mean += in[j];
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (size_t j = 0; j < h; ++j) {
            double d = in[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(h);
        double inv = 1.0 / std::sqrt(var + eps);
        for (size_t j = 0; j < h; ++j) {
            o[j] = static_cast<float>((in[j] - mean) * inv) * gain[j] + bias[j];
        }
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    Tensor out(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) {
        double v = x[i];
        out[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2)));
    }
    return out;
}

Tensor attention_context(const Tensor& qkv, size_t heads_local, size_t head_dim) {
    size_t s = qkv.extent(0);
    size_t h_local = heads_local * head_dim;
    if (qkv.extent(1) != 3 * h_local) {
        throw dimension_error("attention: qkv width does not match head geometry");
    }
    float inv_sqrt_d = static_cast<float>(1.0 / std::sqrt(static_cast<double>(head_dim)));

    Tensor ctx({s, h_local});
    for (size_t hd = 0; hd < heads_local; ++hd) {
        Tensor q = take_cols(qkv, hd * head_dim, (hd + 1) * head_dim);
        Tensor k = take_cols(qkv, h_local + hd * head_dim, h_local + (hd + 1) * head_dim);
        Tensor v = take_cols(qkv, 2 * h_local + hd * head_dim,
                             2 * h_local + (hd + 1) * head_dim);
        Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
        Tensor probs = rowwise_softmax(scores);
        Tensor head_ctx = matmul(probs, v); // s x d
        for (size_t r = 0; r < s; ++r) {
            for (size_t c = 0; c < head_dim; ++c) {
                ctx[r * h_local + hd * head_dim + c] = head_ctx[r * head_dim + c];
            }
        }
    }
    return ctx;
}

Tensor transformer_layer_forward(const Tensor& x, const LayerWeights& w, size_t heads) {
    if (x.rank() != 3) {
        throw dimension_error("layer forward: input must be batch x seq x hidden, got " +
                              x.shape_string());
    }
    size_t b = x.extent(0), s = x.extent(1), h = x.extent(2);
    if (h % heads != 0) throw plan_error("layer forward: heads must divide hidden width");
    size_t d = h / heads;

    // Attention block.
    Tensor normed = layer_norm(x, w.ln1_gain, w.ln1_bias);
    Tensor qkv = matmul_last(normed, w.wqkv); // b x s x 3h
    Tensor attn({b, s, h});
    for (size_t bi = 0; bi < b; ++bi) {
        Tensor qkv_b = take_leading(qkv, bi, bi + 1).reshaped({s, 3 * h});
        Tensor ctx = attention_context(qkv_b, heads, d);
        Tensor out = matmul(ctx, w.wo); // s x h
        for (size_t i = 0; i < s * h; ++i) attn[bi * s * h + i] = out[i];
    }
    Tensor y = add(x, attn);

    // Feed-forward block.
    Tensor normed2 = layer_norm(y, w.ln2_gain, w.ln2_bias);
    Tensor mid = gelu(matmul_last(normed2, w.w1));
    Tensor mlp = matmul_last(mid, w.w2);
    return add(y, mlp);
}

Tensor model_forward(const Tensor& x, const StackedModel& model) {
    Tensor cur = x;
    for (const LayerWeights& w : model.layers) {
        cur = transformer_layer_forward(cur, w, model.config.heads);
    }
    return cur;
}

} // namespace actcomp
