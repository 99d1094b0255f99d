#include "actcomp/mp_sim.hpp"

#include <array>

#include "actcomp/error_feedback.hpp"
#include "actcomp/rng.hpp"

namespace actcomp {

std::string to_string(SiteRecord::Where w) {
    switch (w) {
        case SiteRecord::Where::tp_attn: return "tp_attn";
        case SiteRecord::Where::tp_mlp: return "tp_mlp";
        case SiteRecord::Where::pp_boundary: return "pp_boundary";
    }
    return "tp_attn";
}

namespace {

// Error-feedback residuals keyed by (site kind, layer-or-boundary, collective,
// worker); one state per physical compression point, carried across
// micro-batches.
using EfBank = std::map<std::array<size_t, 4>, ErrorFeedbackState>;

struct SimContext {
    const CompressionPlacement* placement = nullptr;
    const AeBank* bank = nullptr;
    EfBank* ef = nullptr;
    std::vector<SiteRecord>* log = nullptr;
    size_t micro_batch = 0;
};

size_t dense_bytes(const Tensor& t, size_t value_bytes) {
    return t.numel() * value_bytes;
}

size_t wire_value_bytes(const SimContext& ctx) {
    return ctx.placement ? ctx.placement->spec.value_bytes : 2;
}

// Per-token k scaled to this tensor's token count.
size_t whole_tensor_k(const CompressorSpec& spec, const Tensor& t) {
    size_t k = spec.k * t.leading_rows();
    return std::min(k, t.numel());
}

// Compress one worker's contribution (or one boundary activation), with error
// feedback when enabled. Returns the message and the receiver-side tensor.
ErrorFeedbackStep compress_at_site(const Tensor& x, const CompressorSpec& site_spec,
                                   const AeParams* ae, bool error_feedback,
                                   EfBank& bank, const std::array<size_t, 4>& key) {
    if (error_feedback) {
        return error_feedback_step(bank[key], x, site_spec, ae);
    }
    ErrorFeedbackStep step;
    step.message = compress_with_spec(x, site_spec, ae);
    step.decompressed = decompress_with_spec(step.message, site_spec, ae);
    return step;
}

// Sum of per-worker partials with the site's communication applied. Writes
// one SiteRecord describing a single worker's message.
Tensor summing_collective(std::vector<Tensor> partials, size_t layer,
                          size_t collective_index, SiteRecord::Where where,
                          const SimContext& ctx) {
    // The exact sum serves as the uncompressed result and the fidelity
    // reference. Worker order is fixed, so this is deterministic.
    Tensor exact = partials[0];
    for (size_t w = 1; w < partials.size(); ++w) exact = add(exact, partials[w]);

    SiteRecord rec;
    rec.where = where;
    rec.layer = layer;
    rec.boundary = collective_index;
    rec.micro_batch = ctx.micro_batch;
    size_t vb = wire_value_bytes(ctx);
    rec.baseline_forward = dense_bytes(exact, vb);
    rec.baseline_backward = rec.baseline_forward;

    bool compress = ctx.placement != nullptr && ctx.placement->at_tp_collective &&
                    ctx.placement->contains_layer(layer);
    if (!compress) {
        rec.compressed = false;
        rec.bytes_forward = rec.baseline_forward;
        rec.bytes_backward = rec.baseline_backward;
        ctx.log->push_back(rec);
        return exact;
    }

    const CompressorSpec& spec = ctx.placement->spec;
    const AeParams* ae = nullptr;
    if (spec.kind == CompressorKind::ae) {
        ae = ctx.bank ? ctx.bank->find(layer) : nullptr;
        if (ae == nullptr) {
            throw state_error("tp collective: no trained autoencoder for layer " +
                              std::to_string(layer));
        }
    }

    Tensor result(exact.shape());
    size_t site_kind = static_cast<size_t>(where);
    bool logged_bytes = false;

    if (spec.kind == CompressorKind::ae) {
        // Encode before the collective; the all-reduce sums codes and the
        // summed code is decoded once on the receiver side.
        Tensor code_sum;
        for (size_t w = 0; w < partials.size(); ++w) {
            ErrorFeedbackStep step =
                compress_at_site(partials[w], spec, ae, ctx.placement->error_feedback,
                                 *ctx.ef, {site_kind, layer, collective_index, w});
            const auto& code = std::get<CodePayload>(step.message.payload);
            Tensor code_t({partials[w].leading_rows(), code.code_dim}, code.values);
            code_sum = w == 0 ? code_t : add(code_sum, code_t);
            if (!logged_bytes) {
                rec.bytes_forward = message_bytes(step.message, Direction::forward, spec);
                rec.bytes_backward = message_bytes(step.message, Direction::backward, spec);
                logged_bytes = true;
            }
        }
        CompressedMessage summed;
        summed.original_shape = exact.shape();
        summed.payload = CodePayload{code_sum.values(), ae->code_dim()};
        result = ae_decompress(summed, *ae);
    } else {
        // Sparse and quantized messages do not sum in compressed form; the
        // collective becomes an all-gather and each receiver decompresses and
        // sums the contributions.
        Tensor acc(exact.shape());
        for (size_t w = 0; w < partials.size(); ++w) {
            CompressorSpec site_spec = spec;
            if (spec.kind == CompressorKind::topk || spec.kind == CompressorKind::randk) {
                site_spec.k = whole_tensor_k(spec, partials[w]);
            }
            if (spec.kind == CompressorKind::randk) {
                site_spec.seed = mix_seed(spec.seed, site_kind, layer, collective_index, w,
                                          ctx.micro_batch);
            }
            ErrorFeedbackStep step =
                compress_at_site(partials[w], site_spec, nullptr,
                                 ctx.placement->error_feedback, *ctx.ef,
                                 {site_kind, layer, collective_index, w});
            acc = add(acc, step.decompressed);
            if (!logged_bytes) {
                rec.bytes_forward = message_bytes(step.message, Direction::forward, site_spec);
                rec.bytes_backward = message_bytes(step.message, Direction::backward, site_spec);
                logged_bytes = true;
            }
        }
        result = acc;
    }

    rec.compressed = true;
    rec.max_abs_err = max_abs_diff(result, exact);
    rec.rel_err = rel_deviation(result, exact);
    ctx.log->push_back(rec);
    return result;
}

// One layer under tensor parallelism. Column-parallel first projections,
// row-parallel second projections, two summing collectives.
Tensor tp_layer_forward(const Tensor& x, const LayerWeights& w, size_t heads, size_t tp,
                        size_t layer, const SimContext& ctx) {
    size_t b = x.extent(0), s = x.extent(1), h = x.extent(2);
    size_t d = h / heads;
    size_t heads_per = heads / tp;
    size_t h_per = heads_per * d;
    size_t ff = 4 * h;
    size_t ff_per = ff / tp;

    // Attention block. The layer norm is replicated on every worker.
    Tensor normed = layer_norm(x, w.ln1_gain, w.ln1_bias);
    std::vector<Tensor> attn_partials;
    attn_partials.reserve(tp);
    for (size_t worker = 0; worker < tp; ++worker) {
        size_t c0 = worker * h_per, c1 = (worker + 1) * h_per;
        // Column slices of the fused projection: this worker's heads from each
        // of the Q, K and V blocks.
        Tensor wq = take_cols(w.wqkv, c0, c1);
        Tensor wk = take_cols(w.wqkv, h + c0, h + c1);
        Tensor wv = take_cols(w.wqkv, 2 * h + c0, 2 * h + c1);
        Tensor wqkv_local = concat_cols(concat_cols(wq, wk), wv); // h x 3*h_per
        Tensor qkv = matmul_last(normed, wqkv_local);             // b x s x 3*h_per
        Tensor wo_rows = take_rows(w.wo, c0, c1);                 // h_per x h

        Tensor partial({b, s, h});
        for (size_t bi = 0; bi < b; ++bi) {
            Tensor qkv_b = take_leading(qkv, bi, bi + 1).reshaped({s, 3 * h_per});
            Tensor c = attention_context(qkv_b, heads_per, d);
            Tensor out = matmul(c, wo_rows); // s x h
            for (size_t i = 0; i < s * h; ++i) partial[bi * s * h + i] = out[i];
        }
        attn_partials.push_back(std::move(partial));
    }
    Tensor attn = summing_collective(std::move(attn_partials), layer, 0,
                                     SiteRecord::Where::tp_attn, ctx);
    Tensor y = add(x, attn);

    // Feed-forward block.
    Tensor normed2 = layer_norm(y, w.ln2_gain, w.ln2_bias);
    std::vector<Tensor> mlp_partials;
    mlp_partials.reserve(tp);
    for (size_t worker = 0; worker < tp; ++worker) {
        size_t c0 = worker * ff_per, c1 = (worker + 1) * ff_per;
        Tensor mid = gelu(matmul_last(normed2, take_cols(w.w1, c0, c1)));
        mlp_partials.push_back(matmul_last(mid, take_rows(w.w2, c0, c1)));
    }
    Tensor mlp = summing_collective(std::move(mlp_partials), layer, 1,
                                    SiteRecord::Where::tp_mlp, ctx);
    return add(y, mlp);
}

// Stage boundary: compress iff the consuming stage's first layer is inside
// the placement window (the message entering the compressed region is the one
// that shrinks).
Tensor cross_boundary(const Tensor& x, size_t boundary, size_t producing_layer,
                      size_t consumer_first_layer, const SimContext& ctx) {
    SiteRecord rec;
    rec.where = SiteRecord::Where::pp_boundary;
    rec.layer = producing_layer;
    rec.boundary = boundary;
    rec.micro_batch = ctx.micro_batch;
    size_t vb = wire_value_bytes(ctx);
    rec.baseline_forward = dense_bytes(x, vb);
    rec.baseline_backward = rec.baseline_forward;

    bool compress = ctx.placement != nullptr && ctx.placement->at_pp_boundary &&
                    ctx.placement->contains_layer(consumer_first_layer);
    if (!compress) {
        rec.compressed = false;
        rec.bytes_forward = rec.baseline_forward;
        rec.bytes_backward = rec.baseline_backward;
        ctx.log->push_back(rec);
        return x;
    }

    const CompressorSpec& spec = ctx.placement->spec;
    CompressorSpec site_spec = spec;
    const AeParams* ae = nullptr;
    if (spec.kind == CompressorKind::ae) {
        ae = ctx.bank ? ctx.bank->find(consumer_first_layer) : nullptr;
        if (ae == nullptr) {
            throw state_error("pp boundary: no trained autoencoder for layer " +
                              std::to_string(consumer_first_layer));
        }
    }
    if (spec.kind == CompressorKind::topk || spec.kind == CompressorKind::randk) {
        site_spec.k = whole_tensor_k(spec, x);
    }
    if (spec.kind == CompressorKind::randk) {
        site_spec.seed = mix_seed(spec.seed, static_cast<size_t>(SiteRecord::Where::pp_boundary),
                                  boundary, size_t(0), size_t(0), ctx.micro_batch);
    }

    ErrorFeedbackStep step = compress_at_site(
        x, site_spec, ae, ctx.placement->error_feedback, *ctx.ef,
        {static_cast<size_t>(SiteRecord::Where::pp_boundary), boundary, 0, 0});

    rec.compressed = true;
    rec.bytes_forward = message_bytes(step.message, Direction::forward, site_spec);
    rec.bytes_backward = message_bytes(step.message, Direction::backward, site_spec);
    rec.max_abs_err = max_abs_diff(step.decompressed, x);
    rec.rel_err = rel_deviation(step.decompressed, x);
    ctx.log->push_back(rec);
    return step.decompressed;
}

} // namespace

AeBank train_ae_bank(const StackedModel& model, const CompressionPlacement& placement,
                     const Tensor& input, const AeHyper& hyper) {
    placement.validate(model.config);
    if (placement.spec.kind != CompressorKind::ae) return {};

    AeBank bank;
    Tensor cur = input;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        cur = transformer_layer_forward(cur, model.layers[l], model.config.heads);
        if (placement.contains_layer(l)) {
            AeHyper layer_hyper = hyper;
            layer_hyper.seed = mix_seed(hyper.seed, l);
            bank.per_layer.emplace(l,
                                   ae_fit(cur, placement.spec.code_dim, layer_hyper).params);
        }
    }
    return bank;
}

ForwardResult parallel_forward(const StackedModel& model, const ParallelPlan& plan,
                               const CompressionPlacement* placement,
                               const AeBank* bank, const Tensor& input) {
    model.config.validate();
    plan.validate(model.config);
    if (placement != nullptr) placement->validate(model.config);
    if (input.rank() != 3 || input.extent(0) != model.config.batch ||
        input.extent(1) != model.config.seq || input.extent(2) != model.config.hidden) {
        throw dimension_error("parallel_forward: input " + input.shape_string() +
                              " does not match the model geometry");
    }

    size_t m = plan.micro_batches;
    size_t mb_size = model.config.batch / m;
    size_t layers_per_stage = model.config.layers / plan.pp;

    EfBank ef;
    ForwardResult result;
    SimContext ctx;
    ctx.placement = placement;
    ctx.bank = bank;
    ctx.ef = &ef;
    ctx.log = &result.sites;

    std::vector<Tensor> outputs;
    outputs.reserve(m);
    for (size_t mb = 0; mb < m; ++mb) {
        ctx.micro_batch = mb;
        Tensor cur = take_leading(input, mb * mb_size, (mb + 1) * mb_size);
        for (size_t stage = 0; stage < plan.pp; ++stage) {
            for (size_t l = stage * layers_per_stage; l < (stage + 1) * layers_per_stage; ++l) {
                cur = tp_layer_forward(cur, model.layers[l], model.config.heads, plan.tp, l,
                                       ctx);
            }
            if (stage + 1 < plan.pp) {
                size_t producing = (stage + 1) * layers_per_stage - 1;
                cur = cross_boundary(cur, stage, producing, producing + 1, ctx);
            }
        }
        outputs.push_back(std::move(cur));
    }
    result.output = concat_leading(outputs);
    return result;
}

ForwardResult tp_forward_sim(const Tensor& input, const StackedModel& model, size_t tp,
                             const CompressionPlacement* placement, const AeBank* bank) {
    ParallelPlan plan;
    plan.tp = tp;
    return parallel_forward(model, plan, placement, bank, input);
}

ForwardResult pp_forward_sim(const Tensor& input, const StackedModel& model, size_t pp,
                             size_t micro_batches, const CompressionPlacement* placement,
                             const AeBank* bank) {
    ParallelPlan plan;
    plan.pp = pp;
    plan.micro_batches = micro_batches;
    return parallel_forward(model, plan, placement, bank, input);
}

std::vector<PerturbationRow> perturbation_report(
    const StackedModel& model, const Tensor& input, const CompressorSpec& spec,
    const std::vector<std::pair<size_t, size_t>>& windows, const AeHyper& ae_hyper) {
    spec.validate();
    Tensor clean = model_forward(input, model);

    std::vector<PerturbationRow> rows;
    rows.reserve(windows.size());
    for (auto [lo, hi] : windows) {
        if (lo > hi || hi >= model.layers.size()) {
            throw plan_error("perturbation: window [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] out of bounds");
        }
        AeBank bank;
        if (spec.kind == CompressorKind::ae) {
            CompressionPlacement ae_placement;
            ae_placement.layer_lo = lo;
            ae_placement.layer_hi = hi;
            ae_placement.at_pp_boundary = true;
            ae_placement.spec = spec;
            bank = train_ae_bank(model, ae_placement, input, ae_hyper);
        }

        Tensor cur = input;
        for (size_t l = 0; l < model.layers.size(); ++l) {
            cur = transformer_layer_forward(cur, model.layers[l], model.config.heads);
            if (l < lo || l > hi) continue;
            CompressorSpec site_spec = spec;
            const AeParams* ae = nullptr;
            if (spec.kind == CompressorKind::ae) {
                ae = bank.find(l);
            } else if (spec.kind == CompressorKind::topk ||
                       spec.kind == CompressorKind::randk) {
                site_spec.k = std::min(spec.k * cur.leading_rows(), cur.numel());
                if (spec.kind == CompressorKind::randk) {
                    site_spec.seed = mix_seed(spec.seed, l);
                }
            }
            cur = decompress_with_spec(compress_with_spec(cur, site_spec, ae), site_spec, ae);
        }
        PerturbationRow row;
        row.layer_lo = lo;
        row.layer_hi = hi;
        row.max_abs = max_abs_diff(cur, clean);
        row.rel = rel_deviation(cur, clean);
        rows.push_back(row);
    }
    return rows;
}

} // namespace actcomp
