#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "actcomp/mp_sim.hpp"
#include "oracles.hpp"

using namespace actcomp;

namespace {

ModelConfig make_config(size_t layers, size_t hidden, size_t heads, size_t seq,
                        size_t batch) {
    ModelConfig cfg;
    cfg.layers = layers;
    cfg.hidden = hidden;
    cfg.heads = heads;
    cfg.seq = seq;
    cfg.batch = batch;
    cfg.vocab = 1;
    return cfg;
}

// Batch of two identical halves, so micro-batches see the same data.
Tensor twinned_input(const ModelConfig& cfg, uint64_t seed) {
    Tensor half = random_tensor({1, cfg.seq, cfg.hidden}, Dist::gaussian, seed);
    return concat_leading(std::vector<Tensor>{half, half});
}

CompressionPlacement topk_placement(size_t lo, size_t hi, size_t k) {
    CompressionPlacement p;
    p.layer_lo = lo;
    p.layer_hi = hi;
    p.at_tp_collective = true;
    p.at_pp_boundary = true;
    p.spec.kind = CompressorKind::topk;
    p.spec.k = k;
    return p;
}

bool records_equal(const SiteRecord& a, const SiteRecord& b) {
    return a.where == b.where && a.layer == b.layer && a.boundary == b.boundary &&
           a.micro_batch == b.micro_batch && a.compressed == b.compressed &&
           a.bytes_forward == b.bytes_forward && a.bytes_backward == b.bytes_backward &&
           a.baseline_forward == b.baseline_forward &&
           a.baseline_backward == b.baseline_backward && a.max_abs_err == b.max_abs_err &&
           a.rel_err == b.rel_err;
}

} // namespace

TEST_CASE("a single worker with no compression reproduces the monolithic pass") {
    ModelConfig cfg = make_config(3, 8, 2, 5, 2);
    StackedModel model = random_model(cfg, 100);
    Tensor x = random_input(cfg, 101);
    ForwardResult r = tp_forward_sim(x, model, 1);
    Tensor mono = model_forward(x, model);
    CHECK(max_abs_diff(r.output, mono) == 0.0);
    // Each layer still logs its two summing collectives.
    REQUIRE(r.sites.size() == 6);
    for (size_t l = 0; l < 3; ++l) {
        CHECK(r.sites[2 * l].where == SiteRecord::Where::tp_attn);
        CHECK(r.sites[2 * l].layer == l);
        CHECK(r.sites[2 * l].boundary == 0);
        CHECK(r.sites[2 * l + 1].where == SiteRecord::Where::tp_mlp);
        CHECK(r.sites[2 * l + 1].boundary == 1);
        CHECK(!r.sites[2 * l].compressed);
        CHECK(r.sites[2 * l].bytes_forward == r.sites[2 * l].baseline_forward);
    }
}

TEST_CASE("tensor-parallel splits agree with the monolithic forward") {
    ModelConfig cfg = make_config(2, 16, 4, 5, 2);
    StackedModel model = random_model(cfg, 110);
    Tensor x = random_input(cfg, 111);
    Tensor mono = model_forward(x, model);
    for (size_t tp : {2UL, 4UL}) {
        ForwardResult r = tp_forward_sim(x, model, tp);
        CHECK(rel_deviation(r.output, mono) <= 1e-4);
        CHECK(r.sites.size() == 4);
    }
}

TEST_CASE("pipeline stages with uncompressed handoffs are exact") {
    ModelConfig cfg = make_config(4, 8, 2, 3, 4);
    StackedModel model = random_model(cfg, 120);
    Tensor x = random_input(cfg, 121);
    Tensor mono = model_forward(x, model);
    for (size_t micro : {1UL, 2UL, 4UL}) {
        ForwardResult r = pp_forward_sim(x, model, 2, micro);
        CHECK(max_abs_diff(r.output, mono) == 0.0);
        // Per micro-batch: four layers x two collectives plus one boundary.
        CHECK(r.sites.size() == micro * 9);
    }
}

TEST_CASE("site records enumerate collectives and boundaries in execution order") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 130);
    Tensor x = random_input(cfg, 131);
    ParallelPlan plan;
    plan.tp = 2;
    plan.pp = 2;
    plan.micro_batches = 2;
    ForwardResult r = parallel_forward(model, plan, nullptr, nullptr, x);
    REQUIRE(r.sites.size() == 10);
    const SiteRecord::Where want[] = {
        SiteRecord::Where::tp_attn, SiteRecord::Where::tp_mlp,
        SiteRecord::Where::pp_boundary, SiteRecord::Where::tp_attn,
        SiteRecord::Where::tp_mlp};
    for (size_t mb = 0; mb < 2; ++mb) {
        for (size_t i = 0; i < 5; ++i) {
            const SiteRecord& rec = r.sites[mb * 5 + i];
            CHECK(rec.where == want[i]);
            CHECK(rec.micro_batch == mb);
        }
        // The boundary record names the producing layer.
        CHECK(r.sites[mb * 5 + 2].layer == 0);
        CHECK(r.sites[mb * 5 + 2].boundary == 0);
        CHECK(r.sites[mb * 5 + 3].layer == 1);
    }
    // Uncompressed messages move one worker's dense partial: 1x3x8 halves.
    for (const SiteRecord& rec : r.sites) {
        CHECK(rec.baseline_forward == 1 * 3 * 8 * 2);
        CHECK(rec.bytes_forward == rec.baseline_forward);
        CHECK(rec.max_abs_err == 0.0);
    }
}

TEST_CASE("a boundary is compressed only when the consuming stage starts inside the window") {
    ModelConfig cfg = make_config(4, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 140);
    Tensor x = random_input(cfg, 141);

    // Stage 1 starts at layer 2. A window covering the back half catches the
    // handoff; a window covering only the producing layers does not.
    CompressionPlacement back = topk_placement(2, 3, 2);
    back.at_tp_collective = false;
    ForwardResult rb = pp_forward_sim(x, model, 2, 1, &back);
    REQUIRE(rb.sites.size() == 9);
    const SiteRecord& handoff = rb.sites[4];
    REQUIRE(handoff.where == SiteRecord::Where::pp_boundary);
    CHECK(handoff.layer == 1);
    CHECK(handoff.compressed);
    CHECK(handoff.bytes_forward < handoff.baseline_forward);
    CHECK(handoff.max_abs_err > 0.0);

    CompressionPlacement front = topk_placement(0, 1, 2);
    front.at_tp_collective = false;
    ForwardResult rf = pp_forward_sim(x, model, 2, 1, &front);
    const SiteRecord& untouched = rf.sites[4];
    REQUIRE(untouched.where == SiteRecord::Where::pp_boundary);
    CHECK(!untouched.compressed);
    CHECK(untouched.max_abs_err == 0.0);
    CHECK(max_abs_diff(rf.output, model_forward(x, model)) == 0.0);
}

TEST_CASE("collective compression stays inside the layer window") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 150);
    Tensor x = random_input(cfg, 151);
    CompressionPlacement p = topk_placement(1, 1, 2);
    p.at_pp_boundary = false;
    ForwardResult r = tp_forward_sim(x, model, 2, &p);
    REQUIRE(r.sites.size() == 4);
    CHECK(!r.sites[0].compressed);
    CHECK(!r.sites[1].compressed);
    CHECK(r.sites[2].compressed);
    CHECK(r.sites[3].compressed);
    CHECK(r.sites[0].max_abs_err == 0.0);
    CHECK(r.sites[2].max_abs_err > 0.0);
}

TEST_CASE("compressed site bytes follow the codec wire formats") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 160);
    Tensor x = random_input(cfg, 161);

    // Top-k keeps k per token: 6 tokens x 2 kept = 12 of 48 elements.
    CompressionPlacement tk = topk_placement(0, 1, 2);
    tk.at_pp_boundary = false;
    ForwardResult rt = tp_forward_sim(x, model, 2, &tk);
    for (const SiteRecord& rec : rt.sites) {
        CHECK(rec.compressed);
        CHECK(rec.baseline_forward == 2 * 3 * 8 * 2);
        CHECK(rec.bytes_forward == 12 * (2 + 4));
        CHECK(rec.bytes_backward == 12 * 2);
    }

    CompressionPlacement q = topk_placement(0, 1, 0);
    q.at_pp_boundary = false;
    q.spec = CompressorSpec{};
    q.spec.kind = CompressorKind::quant;
    q.spec.bits = 4;
    ForwardResult rq = tp_forward_sim(x, model, 2, &q);
    for (const SiteRecord& rec : rq.sites) {
        // 48 nibbles pack into 24 bytes; one (scale, zero) pair per token row.
        CHECK(rec.bytes_forward == 24 + 6 * 8);
        CHECK(rec.bytes_backward == 48 * 2);
    }

    CompressionPlacement ae = topk_placement(0, 1, 0);
    ae.at_pp_boundary = false;
    ae.spec = CompressorSpec{};
    ae.spec.kind = CompressorKind::ae;
    ae.spec.code_dim = 4;
    AeBank bank;
    bank.per_layer[0] = xavier_ae_params(8, 4, 1);
    bank.per_layer[1] = xavier_ae_params(8, 4, 2);
    ForwardResult ra = tp_forward_sim(x, model, 2, &ae, &bank);
    for (const SiteRecord& rec : ra.sites) {
        CHECK(rec.bytes_forward == 6 * 4 * 2); // six tokens, four code values
        CHECK(rec.bytes_backward == rec.bytes_forward);
    }
}

TEST_CASE("an identity-width autoencoder leaves the forward pass untouched") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 170);
    Tensor x = random_input(cfg, 171);

    CompressionPlacement p = topk_placement(0, 1, 0);
    p.spec = CompressorSpec{};
    p.spec.kind = CompressorKind::ae;
    p.spec.code_dim = 8;
    AeBank bank;
    bank.per_layer[0] = identity_ae_params(8);
    bank.per_layer[1] = identity_ae_params(8);

    ForwardResult with = tp_forward_sim(x, model, 2, &p, &bank);
    ForwardResult without = tp_forward_sim(x, model, 2);
    CHECK(max_abs_diff(with.output, without.output) == 0.0);
    for (const SiteRecord& rec : with.sites) {
        CHECK(rec.compressed);
        CHECK(rec.max_abs_err == 0.0);
    }
}

TEST_CASE("trained banks cover exactly the compressed layers") {
    ModelConfig cfg = make_config(3, 8, 2, 4, 2);
    StackedModel model = random_model(cfg, 180);
    Tensor x = random_input(cfg, 181);
    CompressionPlacement p = topk_placement(1, 2, 0);
    p.spec = CompressorSpec{};
    p.spec.kind = CompressorKind::ae;
    p.spec.code_dim = 3;
    AeHyper hyper;
    hyper.epochs = 40;
    hyper.lr = 0.05;
    hyper.seed = 17;
    AeBank bank = train_ae_bank(model, p, x, hyper);
    CHECK(bank.find(0) == nullptr);
    REQUIRE(bank.find(1) != nullptr);
    REQUIRE(bank.find(2) != nullptr);
    CHECK(bank.find(1)->hidden() == 8);
    CHECK(bank.find(1)->code_dim() == 3);
    // Layer banks are trained on different activations.
    CHECK(max_abs_diff(bank.find(1)->encoder, bank.find(2)->encoder) > 0.0);

    AeBank again = train_ae_bank(model, p, x, hyper);
    CHECK(max_abs_diff(bank.find(2)->decoder, again.find(2)->decoder) == 0.0);
}

TEST_CASE("error feedback persists across micro-batches at a boundary") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 190);
    Tensor x = twinned_input(cfg, 191);

    CompressionPlacement plain = topk_placement(1, 1, 2);
    plain.at_tp_collective = false;
    CompressionPlacement fed = plain;
    fed.error_feedback = true;

    ForwardResult off = pp_forward_sim(x, model, 2, 2, &plain);
    ForwardResult on = pp_forward_sim(x, model, 2, 2, &fed);
    REQUIRE(off.sites.size() == 10);

    auto boundary_at = [](const ForwardResult& r, size_t mb) -> const SiteRecord& {
        for (const SiteRecord& rec : r.sites) {
            if (rec.where == SiteRecord::Where::pp_boundary && rec.micro_batch == mb) {
                return rec;
            }
        }
        throw std::logic_error("boundary record not found");
    };

    // Identical micro-batches: without feedback both handoffs look the same.
    CHECK(boundary_at(off, 0).max_abs_err == boundary_at(off, 1).max_abs_err);
    // With feedback the first step matches (empty residual), the second
    // transmits compensated values and must differ.
    CHECK(boundary_at(on, 0).max_abs_err == boundary_at(off, 0).max_abs_err);
    CHECK(boundary_at(on, 1).max_abs_err != boundary_at(off, 1).max_abs_err);
}

TEST_CASE("repeated runs are bitwise identical") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 4);
    StackedModel model = random_model(cfg, 200);
    Tensor x = random_input(cfg, 201);
    ParallelPlan plan;
    plan.tp = 2;
    plan.pp = 2;
    plan.micro_batches = 2;
    CompressionPlacement p = topk_placement(0, 1, 2);
    p.spec.kind = CompressorKind::randk;
    p.spec.seed = 77;
    p.error_feedback = true;

    ForwardResult a = parallel_forward(model, plan, &p, nullptr, x);
    ForwardResult b = parallel_forward(model, plan, &p, nullptr, x);
    CHECK(max_abs_diff(a.output, b.output) == 0.0);
    REQUIRE(a.sites.size() == b.sites.size());
    for (size_t i = 0; i < a.sites.size(); ++i) {
        CHECK(records_equal(a.sites[i], b.sites[i]));
    }
}

TEST_CASE("random index draws decorrelate across sites and micro-batches") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 210);
    Tensor x = twinned_input(cfg, 211);
    CompressionPlacement p = topk_placement(0, 1, 2);
    p.spec.kind = CompressorKind::randk;
    p.spec.seed = 5;
    ForwardResult r = pp_forward_sim(x, model, 2, 2, &p);
    // Same data in both micro-batches, yet the drawn indices differ, so the
    // boundary deviations differ too.
    std::vector<double> errs;
    for (const SiteRecord& rec : r.sites) {
        if (rec.where == SiteRecord::Where::pp_boundary) errs.push_back(rec.max_abs_err);
    }
    REQUIRE(errs.size() == 2);
    CHECK(errs[0] != errs[1]);
}

TEST_CASE("input and plan mismatches are rejected") {
    ModelConfig cfg = make_config(2, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 220);
    ParallelPlan plan;
    CHECK_THROWS_AS(
        parallel_forward(model, plan, nullptr, nullptr, Tensor({2, 3, 7})),
        dimension_error);
    CHECK_THROWS_AS(
        parallel_forward(model, plan, nullptr, nullptr, Tensor({1, 3, 8})),
        dimension_error);
    ParallelPlan bad;
    bad.tp = 3;
    CHECK_THROWS_AS(
        parallel_forward(model, bad, nullptr, nullptr, random_input(cfg, 1)),
        plan_error);
    CompressionPlacement p = topk_placement(0, 2, 2);
    CHECK_THROWS_AS(
        parallel_forward(model, plan, &p, nullptr, random_input(cfg, 1)),
        plan_error);
    // An ae placement without a trained bank cannot run.
    CompressionPlacement ae = topk_placement(0, 1, 0);
    ae.spec = CompressorSpec{};
    ae.spec.kind = CompressorKind::ae;
    ae.spec.code_dim = 4;
    CHECK_THROWS_AS(
        parallel_forward(model, plan, &ae, nullptr, random_input(cfg, 1)),
        state_error);
}

TEST_CASE("perturbation sweeps report zero deviation for lossless codecs") {
    ModelConfig cfg = make_config(3, 8, 2, 3, 2);
    StackedModel model = random_model(cfg, 230);
    Tensor x = random_input(cfg, 231);
    std::vector<std::pair<size_t, size_t>> windows = {{0, 0}, {1, 2}, {0, 2}};

    CompressorSpec id;
    auto rows = perturbation_report(model, x, id, windows);
    REQUIRE(rows.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(rows[i].layer_lo == windows[i].first);
        CHECK(rows[i].layer_hi == windows[i].second);
        CHECK(rows[i].max_abs == 0.0);
    }

    // Keeping every element per token is equally lossless.
    CompressorSpec full;
    full.kind = CompressorKind::topk;
    full.k = 8;
    for (const auto& row : perturbation_report(model, x, full, windows)) {
        CHECK(row.max_abs == 0.0);
    }

    CompressorSpec tight;
    tight.kind = CompressorKind::topk;
    tight.k = 2;
    auto lossy = perturbation_report(model, x, tight, windows);
    for (const auto& row : lossy) CHECK(row.max_abs > 0.0);
    auto lossy2 = perturbation_report(model, x, tight, windows);
    for (size_t i = 0; i < lossy.size(); ++i) CHECK(lossy[i].rel == lossy2[i].rel);

    CHECK_THROWS_AS(perturbation_report(model, x, id, {{1, 3}}), plan_error);
    CHECK_THROWS_AS(perturbation_report(model, x, id, {{2, 1}}), plan_error);
}
