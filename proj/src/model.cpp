#include "actcomp/model.hpp"

#include <string>

#include "actcomp/rng.hpp"

namespace actcomp {

void ModelConfig::validate() const {
    if (layers == 0 || hidden == 0 || heads == 0 || seq == 0 || batch == 0 || vocab == 0) {
        throw parameter_error("model: all extents must be positive");
    }
    if (hidden % heads != 0) {
        throw plan_error("model: heads " + std::to_string(heads) +
                         " must divide hidden width " + std::to_string(hidden));
    }
}

void ParallelPlan::validate(const ModelConfig& cfg) const {
    if (tp < 1 || pp < 1 || micro_batches < 1) {
        throw plan_error("plan: tp, pp and micro_batches must be at least 1");
    }
    if (cfg.layers % pp != 0) {
        throw plan_error("plan: pp " + std::to_string(pp) + " must divide layer count " +
                         std::to_string(cfg.layers));
    }
    if (cfg.hidden % tp != 0) {
        throw plan_error("plan: tp " + std::to_string(tp) + " must divide hidden width " +
                         std::to_string(cfg.hidden));
    }
    // Heads are assigned whole to workers, so tp | heads; this also covers the
    // 3h and 4h projection splits because heads | h.
    if (cfg.heads % tp != 0) {
        throw plan_error("plan: tp " + std::to_string(tp) + " must divide head count " +
                         std::to_string(cfg.heads));
    }
    if ((4 * cfg.hidden) % tp != 0) {
        throw plan_error("plan: tp must divide the feed-forward width");
    }
    if (cfg.batch % micro_batches != 0) {
        throw plan_error("plan: micro_batches " + std::to_string(micro_batches) +
                         " must divide batch " + std::to_string(cfg.batch));
    }
}

void CompressionPlacement::validate(const ModelConfig& cfg) const {
    if (layer_lo > layer_hi || layer_hi >= cfg.layers) {
        throw plan_error("placement: layer range [" + std::to_string(layer_lo) + ", " +
                         std::to_string(layer_hi) + "] out of bounds for " +
                         std::to_string(cfg.layers) + " layers");
    }
    if (!at_tp_collective && !at_pp_boundary) {
        throw plan_error("placement: at least one site must be enabled");
    }
    spec.validate();
    if (spec.kind == CompressorKind::ae && spec.code_dim > cfg.hidden) {
        throw parameter_error("placement: ae code width exceeds hidden width");
    }
    if (spec.kind == CompressorKind::quant && spec.group_len != 0 &&
        cfg.hidden % spec.group_len != 0) {
        throw dimension_error("placement: quant group length must divide hidden width");
    }
    if ((spec.kind == CompressorKind::topk || spec.kind == CompressorKind::randk) &&
        spec.k > cfg.hidden) {
        throw parameter_error("placement: per-token k exceeds hidden width");
    }
}

StackedModel random_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t h = cfg.hidden;
    const float scale = 0.02f;
    StackedModel model;
    model.config = cfg;
    model.layers.reserve(cfg.layers);
    Rng rng(seed);

    auto gauss_matrix = [&](size_t rows, size_t cols) {
        Tensor t({rows, cols});
        for (size_t i = 0; i < t.numel(); ++i) {
            t[i] = static_cast<float>(rng.gaussian()) * scale;
        }
        return t;
    };
    auto ones = [&](size_t n) {
        Tensor t({n});
        for (size_t i = 0; i < n; ++i) t[i] = 1.0f;
        return t;
    };

    for (size_t l = 0; l < cfg.layers; ++l) {
        LayerWeights w;
        w.ln1_gain = ones(h);
        w.ln1_bias = Tensor({h});
        w.wqkv = gauss_matrix(h, 3 * h);
        w.wo = gauss_matrix(h, h);
        w.ln2_gain = ones(h);
        w.ln2_bias = Tensor({h});
        w.w1 = gauss_matrix(h, 4 * h);
        w.w2 = gauss_matrix(4 * h, h);
        model.layers.push_back(std::move(w));
    }
    return model;
}

Tensor random_input(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    return random_tensor({cfg.batch, cfg.seq, cfg.hidden}, Dist::gaussian, seed);
}

} // namespace actcomp
