#pragma once

#include "actcomp/autoencoder.hpp"
#include "actcomp/compress.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

// Residual carried between successive compressions at one site. Empty until
// the first step; thereafter its shape is pinned to the site's activation
// shape.
struct ErrorFeedbackState {
    Tensor residual;
    bool initialized = false;
};

struct ErrorFeedbackStep {
    CompressedMessage message;
    Tensor decompressed;
};

// One compensated compression step: y = x + residual is compressed, and the
// part the codec dropped (y - decompress(message)) becomes the next residual.
// With the identity codec the residual stays zero.
ErrorFeedbackStep error_feedback_step(ErrorFeedbackState& state, const Tensor& x,
                                      const CompressorSpec& spec,
                                      const AeParams* ae = nullptr);

} // namespace actcomp
