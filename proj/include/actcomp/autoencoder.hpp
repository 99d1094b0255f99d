#pragma once

#include <cstdint>
#include <vector>

#include "actcomp/compress.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

// Linear autoencoder for one layer's activations: encoder (h x c) maps each
// trailing-axis row to a code, decoder (c x h) maps it back.
struct AeParams {
    Tensor encoder;
    Tensor decoder;

    size_t hidden() const { return encoder.extent(0); }
    size_t code_dim() const { return encoder.extent(1); }
    void validate() const;
};

// Identity configuration (c == h, unit matrices); encode/decode is exact.
AeParams identity_ae_params(size_t h);

// Xavier-uniform initialization, seeded.
AeParams xavier_ae_params(size_t h, size_t c, uint64_t seed);

struct AeHyper {
    double lr = 1e-2;
    size_t epochs = 200;
    uint64_t seed = 0;

    bool operator==(const AeHyper&) const = default;
};

struct AeFitResult {
    AeParams params;
    std::vector<double> epoch_loss; // loss before each accepted/rejected step
    double final_mse = 0.0;
};

// Mean-squared reconstruction loss (normalized by token count x h) and its
// exact gradients for the bilinear model X We Wd ~ X. Exposed so the gradient
// can be checked against finite differences.
struct AeGrad {
    TensorD d_encoder;
    TensorD d_decoder;
    double mse = 0.0;
};
AeGrad ae_loss_grad(const TensorD& x, const TensorD& we, const TensorD& wd);

// Full-batch gradient descent on the reconstruction loss. samples is ...xh;
// leading axes are flattened to tokens. The step size halves whenever a step
// would increase the epoch loss (the step is rejected), so the recorded loss
// curve never increases. Non-finite loss aborts with a training error naming
// the epoch. Training runs in double; the returned params are f32.
AeFitResult ae_fit(const Tensor& samples, size_t c, const AeHyper& hyper = {});

// Codec entry points. Input rows (trailing axis h) map to code rows (c) and
// back; shapes other than the trailing axis are preserved.
CompressedMessage ae_compress(const Tensor& x, const AeParams& params);
Tensor ae_decompress(const CompressedMessage& msg, const AeParams& params);

} // namespace actcomp
