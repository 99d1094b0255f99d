#pragma once

#include <cstdint>
#include <vector>

#include "actcomp/compress.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

// Static geometry of the simulated network.
struct ModelConfig {
    size_t layers = 0;
    size_t hidden = 0;
    size_t heads = 0;
    size_t seq = 0;
    size_t batch = 0;
    size_t vocab = 0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// How the forward pass is split: tp workers per layer, pp sequential stages,
// and the number of micro-batches fed through the pipeline.
struct ParallelPlan {
    size_t tp = 1;
    size_t pp = 1;
    size_t micro_batches = 1;

    void validate(const ModelConfig& cfg) const;
    bool operator==(const ParallelPlan&) const = default;
};

enum class Site { tp_collective, pp_boundary };

// Where compression applies: a contiguous layer window and the sites
// (per-layer collectives, stage boundaries, or both).
struct CompressionPlacement {
    size_t layer_lo = 0;
    size_t layer_hi = 0;
    bool at_tp_collective = false;
    bool at_pp_boundary = false;
    bool error_feedback = false;
    CompressorSpec spec;

    bool contains_layer(size_t layer) const {
        return layer >= layer_lo && layer <= layer_hi;
    }
    void validate(const ModelConfig& cfg) const;
    bool operator==(const CompressionPlacement&) const = default;
};

// Pre-norm encoder layer weights. The attention and feed-forward projections
// carry no bias terms; the two layer norms have gain and bias.
struct LayerWeights {
    Tensor ln1_gain, ln1_bias; // h
    Tensor wqkv;               // h x 3h, columns ordered [Q | K | V]
    Tensor wo;                 // h x h
    Tensor ln2_gain, ln2_bias; // h
    Tensor w1;                 // h x 4h
    Tensor w2;                 // 4h x h
};

struct StackedModel {
    ModelConfig config;
    std::vector<LayerWeights> layers;
};

// Seeded weight initialization: unit layer-norm gains, zero biases, gaussian
// projections scaled by 0.02 so a deep stack keeps activations bounded.
StackedModel random_model(const ModelConfig& cfg, uint64_t seed);

// Seeded batch x seq x hidden gaussian input.
Tensor random_input(const ModelConfig& cfg, uint64_t seed);

} // namespace actcomp
