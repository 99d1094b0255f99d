#include "actcomp/autoencoder.hpp"

#include <cmath>
#include <string>

#include "actcomp/rng.hpp"

namespace actcomp {

void AeParams::validate() const {
    if (encoder.rank() != 2 || decoder.rank() != 2) {
        throw dimension_error("ae params: encoder and decoder must be rank 2");
    }
    if (encoder.extent(0) != decoder.extent(1) || encoder.extent(1) != decoder.extent(0)) {
        throw dimension_error("ae params: encoder " + encoder.shape_string() +
                              " and decoder " + decoder.shape_string() +
                              " are not transposed shapes of each other");
    }
    if (code_dim() > hidden()) {
        throw parameter_error("ae params: code width exceeds hidden width");
    }
}

AeParams identity_ae_params(size_t h) {
    AeParams p{Tensor({h, h}), Tensor({h, h})};
    for (size_t i = 0; i < h; ++i) {
        p.encoder[i * h + i] = 1.0f;
        p.decoder[i * h + i] = 1.0f;
    }
    return p;
}

AeParams xavier_ae_params(size_t h, size_t c, uint64_t seed) {
    if (c < 1 || c > h) throw parameter_error("ae params: code width must be in [1, h]");
    double limit = std::sqrt(6.0 / static_cast<double>(h + c));
    Rng rng(seed);
    AeParams p{Tensor({h, c}), Tensor({c, h})};
    for (size_t i = 0; i < h * c; ++i) {
        p.encoder[i] = static_cast<float>((rng.uniform() * 2.0 - 1.0) * limit);
    }
    for (size_t i = 0; i < c * h; ++i) {
        p.decoder[i] = static_cast<float>((rng.uniform() * 2.0 - 1.0) * limit);
    }
    return p;
}

AeGrad ae_loss_grad(const TensorD& x, const TensorD& we, const TensorD& wd) {
    size_t n = x.extent(0);
    size_t h = x.extent(1);
    if (we.extent(0) != h || wd.extent(1) != h || we.extent(1) != wd.extent(0)) {
        throw dimension_error("ae gradient: inconsistent shapes");
    }
    TensorD code = matmul(x, we);            // n x c
    TensorD recon = matmul(code, wd);        // n x h
    TensorD err = subtract(recon, x);        // n x h

    double denom = static_cast<double>(n) * static_cast<double>(h);
    double mse = 0.0;
    for (size_t i = 0; i < err.numel(); ++i) mse += err[i] * err[i];
    mse /= denom;

    double s = 2.0 / denom;
    AeGrad g;
    g.mse = mse;
    g.d_decoder = scale(matmul(transpose(code), err), s);               // c x h
    g.d_encoder = scale(matmul(transpose(x), matmul(err, transpose(wd))), s); // h x c
    return g;
}

AeFitResult ae_fit(const Tensor& samples, size_t c, const AeHyper& hyper) {
    size_t h = samples.last_extent();
    if (c < 1 || c > h) {
        throw parameter_error("ae_fit: code width must be in [1, " + std::to_string(h) +
                              "], got " + std::to_string(c));
    }
    size_t tokens = samples.leading_rows();
    if (tokens == 0) throw dimension_error("ae_fit: no samples");

    TensorD x = widen(samples.reshaped({tokens, h}));
    AeParams init = xavier_ae_params(h, c, hyper.seed);
    TensorD we = widen(init.encoder);
    TensorD wd = widen(init.decoder);

    AeFitResult result;
    result.epoch_loss.reserve(hyper.epochs);
    double lr = hyper.lr;
    AeGrad g = ae_loss_grad(x, we, wd);
    for (size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (!std::isfinite(g.mse)) {
            throw training_error("ae_fit: non-finite loss at epoch " + std::to_string(epoch));
        }
        result.epoch_loss.push_back(g.mse);

        TensorD we_next = subtract(we, scale(g.d_encoder, lr));
        TensorD wd_next = subtract(wd, scale(g.d_decoder, lr));
        AeGrad g_next = ae_loss_grad(x, we_next, wd_next);

        if (g_next.mse > g.mse) {
            // Reject the step and retry smaller; the recorded loss stays put.
            lr *= 0.5;
        } else {
            we = std::move(we_next);
            wd = std::move(wd_next);
            g = std::move(g_next);
        }
    }
    if (!std::isfinite(g.mse)) {
        throw training_error("ae_fit: non-finite loss at epoch " + std::to_string(hyper.epochs));
    }

    result.params = AeParams{narrow(we), narrow(wd)};
    result.final_mse = g.mse;
    return result;
}

CompressedMessage ae_compress(const Tensor& x, const AeParams& params) {
    params.validate();
    if (x.last_extent() != params.hidden()) {
        throw dimension_error("ae_compress: trailing extent " +
                              std::to_string(x.last_extent()) + " does not match encoder " +
                              params.encoder.shape_string());
    }
    Tensor code = matmul_last(x, params.encoder);
    CodePayload p;
    p.code_dim = params.code_dim();
    p.values = code.values();
    CompressedMessage msg;
    msg.original_shape = x.shape();
    msg.payload = std::move(p);
    return msg;
}

Tensor ae_decompress(const CompressedMessage& msg, const AeParams& params) {
    params.validate();
    if (!std::holds_alternative<CodePayload>(msg.payload)) {
        throw parameter_error("ae_decompress: message does not carry a code payload");
    }
    const auto& p = std::get<CodePayload>(msg.payload);
    if (p.code_dim != params.code_dim()) {
        throw dimension_error("ae_decompress: code width mismatch");
    }
    if (msg.original_shape.back() != params.hidden()) {
        throw dimension_error("ae_decompress: decoded width mismatch");
    }
    size_t rows = msg.original_numel() / msg.original_shape.back();
    if (p.values.size() != rows * p.code_dim) {
        throw state_error("ae_decompress: code value count mismatch");
    }
    Tensor code({rows, p.code_dim}, p.values);
    Tensor recon = matmul(code, params.decoder);
    return recon.reshaped(msg.original_shape);
}

} // namespace actcomp
