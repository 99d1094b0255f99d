#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "actcomp/autoencoder.hpp"
#include "actcomp/compress.hpp"
#include "actcomp/error_feedback.hpp"
#include "actcomp/tensor.hpp"
#include "oracles.hpp"

using namespace actcomp;

namespace {

const SparsePayload& sparse(const CompressedMessage& m) {
    return std::get<SparsePayload>(m.payload);
}

const QuantPayload& quantized(const CompressedMessage& m) {
    return std::get<QuantPayload>(m.payload);
}

CompressorSpec spec_of(CompressorKind kind) {
    CompressorSpec s;
    s.kind = kind;
    switch (kind) {
        case CompressorKind::topk:
        case CompressorKind::randk:
            s.k = 3;
            break;
        case CompressorKind::quant:
            s.bits = 4;
            break;
        case CompressorKind::ae:
            s.code_dim = 2;
            break;
        default:
            break;
    }
    return s;
}

} // namespace

TEST_CASE("topk keeps the largest magnitudes with ties to the lower index") {
    Tensor x({1, 5}, {1.0f, -2.0f, 2.0f, -1.0f, 3.0f});
    CompressedMessage m = topk_compress(x, 2);
    const auto& p = sparse(m);
    REQUIRE(p.indices.size() == 2);
    CHECK(p.indices[0] == 1); // |-2| ties |2|, lower index wins
    CHECK(p.indices[1] == 4);
    CHECK(p.values[0] == -2.0f);
    CHECK(p.values[1] == 3.0f);

    Tensor back = decompress(m);
    CHECK(back[0] == 0.0f);
    CHECK(back[1] == -2.0f);
    CHECK(back[4] == 3.0f);
}

TEST_CASE("topk agrees with the full-sort oracle on random tensors") {
    for (uint64_t seed : {3ULL, 14ULL, 159ULL}) {
        Tensor x = random_tensor({8, 33}, Dist::gaussian, seed);
        for (size_t k : {1UL, 7UL, 64UL, 264UL}) {
            CompressedMessage m = topk_compress(x, k);
            const auto& p = sparse(m);
            std::vector<uint32_t> want = oracle::topk_indices(x, k);
            REQUIRE(p.indices == want);
            for (size_t i = 0; i < k; ++i) CHECK(p.values[i] == x[p.indices[i]]);
        }
        // Keeping everything reconstructs the tensor exactly.
        Tensor all = decompress(topk_compress(x, x.numel()));
        CHECK(max_abs_diff(all, x) == 0.0);
    }
    CHECK_THROWS_AS(topk_compress(Tensor({2, 2}), 0), parameter_error);
    CHECK_THROWS_AS(topk_compress(Tensor({2, 2}), 5), parameter_error);
}

TEST_CASE("randk draws distinct seeded indices and transmits exact values") {
    Tensor x = random_tensor({4, 25}, Dist::gaussian, 77);
    CompressedMessage a = randk_compress(x, 10, 12345);
    CompressedMessage b = randk_compress(x, 10, 12345);
    CompressedMessage c = randk_compress(x, 10, 54321);
    const auto& pa = sparse(a);
    REQUIRE(pa.indices.size() == 10);
    std::set<uint32_t> uniq(pa.indices.begin(), pa.indices.end());
    CHECK(uniq.size() == 10);
    for (size_t i = 1; i < 10; ++i) CHECK(pa.indices[i] > pa.indices[i - 1]);
    for (size_t i = 0; i < 10; ++i) CHECK(pa.values[i] == x[pa.indices[i]]);
    CHECK(pa.indices == sparse(b).indices);
    CHECK(pa.indices != sparse(c).indices);

    Tensor full = decompress(randk_compress(x, x.numel(), 9));
    CHECK(max_abs_diff(full, x) == 0.0);
    CHECK_THROWS_AS(randk_compress(x, 0, 1), parameter_error);
    CHECK_THROWS_AS(randk_compress(x, 101, 1), parameter_error);
}

TEST_CASE("randk index frequencies are roughly uniform") {
    // 2000 draws of 5 from 50; each index lands ~200 times, sigma ~13.4.
    std::vector<size_t> hits(50, 0);
    Tensor x = random_tensor({1, 50}, Dist::gaussian, 1);
    for (uint64_t s = 0; s < 2000; ++s) {
        CompressedMessage m = randk_compress(x, 5, s);
        for (uint32_t i : sparse(m).indices) ++hits[i];
    }
    for (size_t i = 0; i < 50; ++i) {
        CHECK(hits[i] > 200 - 4 * 14);
        CHECK(hits[i] < 200 + 4 * 14);
    }
}

TEST_CASE("quantization error stays within half a step") {
    for (int bits : {2, 4, 8}) {
        Tensor x = random_tensor({16, 64}, Dist::uniform, 1000 + bits);
        for (size_t i = 0; i < x.numel(); ++i) x[i] = 2.0f * x[i] - 1.0f;
        CompressedMessage m = quant_compress(x, bits, 0);
        const auto& p = quantized(m);
        REQUIRE(p.scales.size() == 16);
        uint32_t maxcode = (1u << bits) - 1u;
        for (uint8_t code : p.codes) CHECK(code <= maxcode);
        Tensor back = decompress(m);
        for (size_t r = 0; r < 16; ++r) {
            double half_step = 0.5 * p.scales[r];
            for (size_t j = 0; j < 64; ++j) {
                double err = std::abs(static_cast<double>(back[r * 64 + j]) -
                                      static_cast<double>(x[r * 64 + j]));
                CHECK(err <= half_step + 1e-7);
            }
        }
    }
}

TEST_CASE("quantizing a constant row is exact and grouping divides rows") {
    Tensor flat({2, 8});
    for (size_t i = 0; i < 8; ++i) flat[i] = 0.75f;
    for (size_t i = 8; i < 16; ++i) flat[i] = -1.25f;
    CompressedMessage m = quant_compress(flat, 2, 0);
    CHECK(quantized(m).scales[0] == 0.0f);
    Tensor back = decompress(m);
    CHECK(max_abs_diff(back, flat) == 0.0);

    Tensor x = random_tensor({3, 12}, Dist::gaussian, 8);
    CompressedMessage g = quant_compress(x, 4, 4);
    CHECK(quantized(g).scales.size() == 9); // 3 rows x 3 groups
    CHECK(quantized(g).group_len == 4);

    CHECK_THROWS_AS(quant_compress(x, 3, 0), parameter_error);
    CHECK_THROWS_AS(quant_compress(x, 4, 5), dimension_error);
}

TEST_CASE("identity round-trips exactly and reports dense bytes") {
    Tensor x = random_tensor({3, 7}, Dist::gaussian, 2);
    CompressedMessage m = identity_compress(x);
    Tensor back = decompress(m);
    CHECK(max_abs_diff(back, x) == 0.0);
    CompressorSpec s;
    CHECK(message_bytes(m, Direction::forward, s) == 21 * 2);
    s.value_bytes = 4;
    CHECK(message_bytes(m, Direction::backward, s) == 21 * 4);
}

TEST_CASE("byte accounting follows the documented wire formats") {
    CompressorSpec s;
    s.kind = CompressorKind::topk;
    s.k = 100;

    Tensor x = random_tensor({10, 100}, Dist::gaussian, 21);
    CompressedMessage m = topk_compress(x, 100);
    CHECK(message_bytes(m, Direction::forward, s) == 100 * (2 + 4));
    CHECK(message_bytes(m, Direction::backward, s) == 100 * 2);

    CompressorSpec q;
    q.kind = CompressorKind::quant;
    q.bits = 4;
    CompressedMessage qm = quant_compress(x, 4, 0);
    // 1000 nibbles pack to 500 bytes; 10 groups carry 8 metadata bytes each.
    CHECK(message_bytes(qm, Direction::forward, q) == 500 + 10 * 8);
    CHECK(message_bytes(qm, Direction::backward, q) == 1000 * 2);

    AeParams ae = identity_ae_params(4);
    Tensor small = random_tensor({5, 4}, Dist::gaussian, 3);
    CompressedMessage cm = ae_compress(small, ae);
    CompressorSpec cs;
    cs.kind = CompressorKind::ae;
    cs.code_dim = 4;
    CHECK(message_bytes(cm, Direction::forward, cs) == 5 * 4 * 2);
    CHECK(message_bytes(cm, Direction::backward, cs) == 5 * 4 * 2);
}

TEST_CASE("message_bytes equals the emitted wire payload size") {
    Tensor x = random_tensor({6, 32}, Dist::gaussian, 400);
    AeParams ae = xavier_ae_params(32, 5, 9);

    struct Case {
        CompressedMessage msg;
        CompressorSpec spec;
    };
    std::vector<Case> cases;
    cases.push_back({identity_compress(x), spec_of(CompressorKind::identity)});
    cases.push_back({topk_compress(x, 17), spec_of(CompressorKind::topk)});
    cases.push_back({randk_compress(x, 40, 8), spec_of(CompressorKind::randk)});
    cases.push_back({quant_compress(x, 4, 0), spec_of(CompressorKind::quant)});
    cases.push_back({quant_compress(x, 2, 8), [] {
                         CompressorSpec s = spec_of(CompressorKind::quant);
                         s.bits = 2;
                         s.group_len = 8;
                         return s;
                     }()});
    cases.push_back({ae_compress(x, ae), [] {
                         CompressorSpec s = spec_of(CompressorKind::ae);
                         s.code_dim = 5;
                         return s;
                     }()});
    for (auto& c : cases) {
        for (Direction dir : {Direction::forward, Direction::backward}) {
            CHECK(message_bytes(c.msg, dir, c.spec) ==
                  wire_payload(c.msg, dir, c.spec).size());
        }
        CompressorSpec wide = c.spec;
        wide.value_bytes = 4;
        CHECK(message_bytes(c.msg, Direction::forward, wide) ==
              wire_payload(c.msg, Direction::forward, wide).size());
    }
}

TEST_CASE("framed serialization round-trips every payload kind") {
    Tensor x = random_tensor({4, 16}, Dist::gaussian, 91);
    AeParams ae = xavier_ae_params(16, 3, 5);

    auto roundtrip = [](const CompressedMessage& msg, const CompressorSpec& spec,
                        bool exact_values) {
        std::vector<uint8_t> frame = serialize_message(msg, spec);
        CompressedMessage back = deserialize_message(frame);
        REQUIRE(back.original_shape == msg.original_shape);
        REQUIRE(back.payload.index() == msg.payload.index());
        Tensor a = std::holds_alternative<CodePayload>(msg.payload)
                       ? Tensor({1, 1})
                       : decompress(msg);
        if (std::holds_alternative<CodePayload>(msg.payload)) {
            const auto& pb = std::get<CodePayload>(back.payload);
            const auto& pm = std::get<CodePayload>(msg.payload);
            REQUIRE(pb.code_dim == pm.code_dim);
            REQUIRE(pb.values.size() == pm.values.size());
            for (size_t i = 0; i < pb.values.size(); ++i) {
                if (exact_values) {
                    CHECK(pb.values[i] == pm.values[i]);
                } else {
                    CHECK(pb.values[i] ==
                          half_to_float(float_to_half(pm.values[i])));
                }
            }
            return;
        }
        Tensor b = decompress(back);
        if (exact_values) {
            CHECK(max_abs_diff(a, b) == 0.0);
        } else {
            for (size_t i = 0; i < a.numel(); ++i) {
                CHECK(b[i] == half_to_float(float_to_half(a[i])));
            }
        }
    };

    CompressorSpec f32 = spec_of(CompressorKind::identity);
    f32.value_bytes = 4;
    roundtrip(identity_compress(x), f32, true);
    roundtrip(identity_compress(x), spec_of(CompressorKind::identity), false);

    CompressorSpec tk = spec_of(CompressorKind::topk);
    tk.value_bytes = 4;
    roundtrip(topk_compress(x, 9), tk, true);
    roundtrip(randk_compress(x, 5, 3), spec_of(CompressorKind::randk), false);

    // Quantized codes and their f32 grid survive exactly at either width.
    roundtrip(quant_compress(x, 8, 0), spec_of(CompressorKind::quant), true);

    CompressorSpec cs = spec_of(CompressorKind::ae);
    cs.code_dim = 3;
    cs.value_bytes = 4;
    roundtrip(ae_compress(x, ae), cs, true);
}

TEST_CASE("deserialization rejects malformed frames") {
    Tensor x = random_tensor({2, 8}, Dist::gaussian, 6);
    std::vector<uint8_t> frame =
        serialize_message(topk_compress(x, 3), spec_of(CompressorKind::topk));

    std::vector<uint8_t> bad = frame;
    bad[0] = 0x00;
    CHECK_THROWS_AS(deserialize_message(bad), parse_error);

    bad = frame;
    bad[1] = 0x7F;
    CHECK_THROWS_AS(deserialize_message(bad), parse_error);

    bad = frame;
    bad.resize(bad.size() / 2);
    CHECK_THROWS_AS(deserialize_message(bad), parse_error);

    CHECK_THROWS_AS(deserialize_message({}), parse_error);
}

TEST_CASE("compress_with_spec dispatches and validates") {
    Tensor x = random_tensor({2, 6}, Dist::gaussian, 44);

    CompressorSpec topk = spec_of(CompressorKind::topk);
    CompressedMessage m = compress_with_spec(x, topk);
    CHECK(std::holds_alternative<SparsePayload>(m.payload));
    Tensor back = decompress_with_spec(m, topk);
    CHECK(back.same_shape(x));

    CompressorSpec ae = spec_of(CompressorKind::ae);
    CHECK_THROWS_AS(compress_with_spec(x, ae), parameter_error);
    AeParams params = identity_ae_params(6);
    CompressedMessage cm = compress_with_spec(x, ae, &params);
    Tensor dec = decompress_with_spec(cm, ae, &params);
    CHECK(max_abs_diff(dec, x) < 1e-6);

    CompressorSpec bad = spec_of(CompressorKind::quant);
    bad.bits = 5;
    CHECK_THROWS_AS(compress_with_spec(x, bad), parameter_error);
    bad = spec_of(CompressorKind::topk);
    bad.value_bytes = 3;
    CHECK_THROWS_AS(compress_with_spec(x, bad), parameter_error);
}

TEST_CASE("matched budgets convert code width to sparse k") {
    CHECK(matched_k(MatchPolicy::same_cost, 1024, 50, 2, 4) == 16);
    CHECK(matched_k(MatchPolicy::same_cost, 1024, 100, 2, 4) == 33);
    CHECK(matched_k(MatchPolicy::same_cost, 1024, 50, 4, 4) == 25);
    CHECK(matched_k(MatchPolicy::same_ratio, 1024, 50, 2, 4) == 50);
    CHECK(matched_k(MatchPolicy::same_ratio, 8, 8, 2, 4) == 8);
    CHECK_THROWS_AS(matched_k(MatchPolicy::same_cost, 1024, 1, 2, 4), parameter_error);
    CHECK_THROWS_AS(matched_k(MatchPolicy::same_cost, 4, 5, 2, 4), parameter_error);
    CHECK_THROWS_AS(matched_k(MatchPolicy::same_ratio, 4, 0, 2, 4), parameter_error);
}

TEST_CASE("half-precision wire encoding") {
    for (float v : {0.0f, 1.0f, -1.0f, 0.5f, -0.25f, 2.5f, 65504.0f, 0x1.0p-14f}) {
        CHECK(half_to_float(float_to_half(v)) == v);
    }
    // Re-encoding a decoded half is stable.
    for (uint64_t seed = 0; seed < 4; ++seed) {
        Tensor x = random_tensor({1, 64}, Dist::gaussian, seed);
        for (size_t i = 0; i < x.numel(); ++i) {
            float once = half_to_float(float_to_half(x[i]));
            CHECK(half_to_float(float_to_half(once)) == once);
            CHECK(std::abs(once - x[i]) <= 1e-3f * std::max(1.0f, std::abs(x[i])));
        }
    }
    CHECK(float_to_half(1.0f) == 0x3C00);
    CHECK(float_to_half(-2.0f) == 0xC000);
    CHECK(half_to_float(0x7C00) == std::numeric_limits<float>::infinity());
}

TEST_CASE("error feedback carries dropped mass into the next step") {
    CompressorSpec topk = spec_of(CompressorKind::topk);
    topk.k = 2;
    ErrorFeedbackState state;
    Tensor x({1, 4}, {4.0f, 3.0f, 1.0f, 0.5f});

    ErrorFeedbackStep step = error_feedback_step(state, x, topk);
    // First step compresses x itself; residual is what topk dropped.
    Tensor expect = subtract(x, step.decompressed);
    CHECK(state.initialized);
    CHECK(max_abs_diff(state.residual, expect) == 0.0);
    CHECK(step.decompressed[0] == 4.0f);
    CHECK(step.decompressed[2] == 0.0f);

    // Second step compresses x + residual, so the dropped tail resurfaces.
    ErrorFeedbackStep step2 = error_feedback_step(state, x, topk);
    Tensor compensated = add(x, expect);
    Tensor expect2 = subtract(compensated, step2.decompressed);
    CHECK(max_abs_diff(state.residual, expect2) == 0.0);

    // The identity codec never accumulates a residual.
    ErrorFeedbackState id_state;
    CompressorSpec id = spec_of(CompressorKind::identity);
    error_feedback_step(id_state, x, id);
    error_feedback_step(id_state, x, id);
    CHECK(max_abs(id_state.residual) == 0.0);

    // Shape drift across steps is a protocol violation.
    CHECK_THROWS_AS(error_feedback_step(state, Tensor({2, 4}), topk), state_error);
}
