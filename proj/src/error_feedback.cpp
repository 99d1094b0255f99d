#include "actcomp/error_feedback.hpp"

namespace actcomp {

ErrorFeedbackStep error_feedback_step(ErrorFeedbackState& state, const Tensor& x,
                                      const CompressorSpec& spec, const AeParams* ae) {
    if (!state.initialized) {
        state.residual = Tensor(x.shape());
        state.initialized = true;
    } else if (!state.residual.same_shape(x)) {
        throw state_error("error feedback: activation shape " + x.shape_string() +
                          " does not match residual " + state.residual.shape_string());
    }
    Tensor compensated = add(x, state.residual);
    ErrorFeedbackStep step;
    step.message = compress_with_spec(compensated, spec, ae);
    step.decompressed = decompress_with_spec(step.message, spec, ae);
    state.residual = subtract(compensated, step.decompressed);
    return step;
}

} // namespace actcomp
