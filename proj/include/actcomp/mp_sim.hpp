#pragma once

#include <map>
#include <optional>
#include <vector>

#include "actcomp/autoencoder.hpp"
#include "actcomp/model.hpp"
#include "actcomp/tensor.hpp"
#include "actcomp/transformer.hpp"

namespace actcomp {

// One communication site the forward pass crossed. Byte figures describe one
// worker's message (workers are symmetric); baselines are the dense tensor at
// the same value width. Fidelity is site-local: the deviation the site's
// compression introduced relative to the exact result at that point.
struct SiteRecord {
    enum class Where { tp_attn, tp_mlp, pp_boundary };
    Where where = Where::tp_attn;
    size_t layer = 0;       // pp_boundary: the producing stage's last layer
    size_t boundary = 0;    // pp: boundary index; tp: collective index (0/1)
    size_t micro_batch = 0;
    bool compressed = false;
    size_t bytes_forward = 0;
    size_t bytes_backward = 0;
    size_t baseline_forward = 0;
    size_t baseline_backward = 0;
    double max_abs_err = 0.0;
    double rel_err = 0.0;
};

std::string to_string(SiteRecord::Where w);

struct ForwardResult {
    Tensor output;
    std::vector<SiteRecord> sites;
};

// Per-layer autoencoder parameters for compressed layers.
struct AeBank {
    std::map<size_t, AeParams> per_layer;

    const AeParams* find(size_t layer) const {
        auto it = per_layer.find(layer);
        return it == per_layer.end() ? nullptr : &it->second;
    }
};

// Train one autoencoder per compressed layer on that layer's output
// activations, captured from an uncompressed forward pass over `input`.
AeBank train_ae_bank(const StackedModel& model, const CompressionPlacement& placement,
                     const Tensor& input, const AeHyper& hyper);

// Forward pass under a full parallel plan: the batch is split into
// micro-batches, each traverses the pp stages in order, and every layer runs
// the tensor-parallel decomposition with its two summing collectives. A
// boundary message is compressed when the consuming stage's first layer lies
// in the placement's layer range; a collective is compressed when its layer
// does. Collectives are exact sums (all-gather + local sum for sparse and
// quantized messages, code summation for the autoencoder), so tp=1 with no
// compression reproduces the monolithic forward bit for bit.
ForwardResult parallel_forward(const StackedModel& model, const ParallelPlan& plan,
                               const CompressionPlacement* placement,
                               const AeBank* bank, const Tensor& input);

// Tensor parallelism only (pp = 1, one micro-batch).
ForwardResult tp_forward_sim(const Tensor& input, const StackedModel& model, size_t tp,
                             const CompressionPlacement* placement = nullptr,
                             const AeBank* bank = nullptr);

// Pipeline parallelism only (tp = 1).
ForwardResult pp_forward_sim(const Tensor& input, const StackedModel& model, size_t pp,
                             size_t micro_batches,
                             const CompressionPlacement* placement = nullptr,
                             const AeBank* bank = nullptr);

// Output deviation when compress->decompress is applied to each layer output
// in a window, swept over windows. Reports deviation only; no ordering between
// windows is implied or checked.
struct PerturbationRow {
    size_t layer_lo = 0;
    size_t layer_hi = 0;
    double max_abs = 0.0;
    double rel = 0.0;
};

std::vector<PerturbationRow> perturbation_report(
    const StackedModel& model, const Tensor& input, const CompressorSpec& spec,
    const std::vector<std::pair<size_t, size_t>>& windows,
    const AeHyper& ae_hyper = {});

} // namespace actcomp
