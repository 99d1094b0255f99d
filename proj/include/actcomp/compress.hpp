#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "actcomp/tensor.hpp"

namespace actcomp {

struct AeParams; // autoencoder.hpp

enum class CompressorKind { identity, topk, randk, quant, ae };

std::string to_string(CompressorKind k);
CompressorKind compressor_kind_from_string(const std::string& s);

// Static description of a compressor. Only the fields relevant to `kind` are
// meaningful; validate() enforces that per-kind requirements are met.
//
// For topk/randk used through a placement, `k` counts kept elements per
// trailing-axis row (one token); the standalone codec entry points below take
// the whole-tensor count instead.
struct CompressorSpec {
    CompressorKind kind = CompressorKind::identity;
    size_t k = 0;            // topk/randk: kept elements
    int bits = 0;            // quant: 2, 4 or 8
    size_t code_dim = 0;     // ae: code width c (1 <= c <= h; c == h is the
                             // degenerate identity configuration)
    uint64_t seed = 0;       // randk index draws
    size_t value_bytes = 2;  // wire bytes per value: 2 (half) or 4 (float)
    size_t index_bytes = 4;  // wire bytes per transmitted index
    size_t group_len = 0;    // quant: 0 means one group per trailing row

    void validate() const;

    bool operator==(const CompressorSpec&) const = default;
};

// --- message payloads -------------------------------------------------------

// Kept values at strictly increasing flat indices.
struct SparsePayload {
    std::vector<float> values;
    std::vector<uint32_t> indices;
};

// Per-group uniform codes plus the f32 (scale, zero) pair that dequantizes
// them; every code is < 2^bits.
struct QuantPayload {
    std::vector<uint8_t> codes;
    std::vector<float> scales;
    std::vector<float> zeros;
    int bits = 0;
    size_t group_len = 0;
};

// Autoencoder code values; the trailing axis shrank from h to code_dim.
struct CodePayload {
    std::vector<float> values;
    size_t code_dim = 0;
};

struct DensePayload {
    std::vector<float> values;
};

struct CompressedMessage {
    std::vector<size_t> original_shape;
    std::variant<DensePayload, SparsePayload, QuantPayload, CodePayload> payload;

    size_t original_numel() const {
        size_t n = 1;
        for (size_t e : original_shape) n *= e;
        return original_shape.empty() ? 0 : n;
    }
};

enum class Direction { forward, backward };

// --- codecs -----------------------------------------------------------------

CompressedMessage identity_compress(const Tensor& x);

// Keep the k largest-magnitude elements; ties resolve to the lower flat index.
CompressedMessage topk_compress(const Tensor& x, size_t k);

// Keep k elements at seeded uniformly drawn distinct indices. The indices are
// part of the message (they are transmitted, not re-derived by the receiver).
CompressedMessage randk_compress(const Tensor& x, size_t k, uint64_t seed);

// Per-group min-max uniform quantization. group_len must divide the trailing
// extent (0 selects the whole row); scale = (max-min)/(2^bits-1) and codes
// round half away from zero.
CompressedMessage quant_compress(const Tensor& x, int bits, size_t group_len = 0);

// Reconstruct a dense tensor. Code messages carry no decoder weights and must
// go through ae_decompress instead.
Tensor decompress(const CompressedMessage& msg);

// Kind dispatch used by the simulators and error feedback. `ae` requires
// non-null params.
CompressedMessage compress_with_spec(const Tensor& x, const CompressorSpec& spec,
                                     const AeParams* ae = nullptr);
Tensor decompress_with_spec(const CompressedMessage& msg, const CompressorSpec& spec,
                            const AeParams* ae = nullptr);

// --- byte accounting --------------------------------------------------------

// Bytes this message occupies on the wire in the given direction:
//   Dense        numel * vb                     both directions
//   Sparse       k * (vb + ib) forward          k * vb backward (indices are
//                                               reused from the forward send)
//   Quantized    ceil(numel * bits / 8) + groups * 2 * 4 forward;
//                numel * vb backward (the gradient engine handles only float
//                gradients, so the backward tensor travels uncompressed)
//   Code         code_numel * vb                both directions
size_t message_bytes(const CompressedMessage& msg, Direction dir,
                     const CompressorSpec& spec);

// The exact wire bytes behind message_bytes: values encoded at value_bytes
// (IEEE half when 2), indices as u32, quantization codes bit-packed LSB-first
// with the f32 (scale, zero) pairs in front. message_bytes(msg, dir, spec) ==
// wire_payload(msg, dir, spec).size() always.
std::vector<uint8_t> wire_payload(const CompressedMessage& msg, Direction dir,
                                  const CompressorSpec& spec);

// Self-describing persistence frame: u8 magic 0xAC, u8 version, u8 payload
// tag, u8 value_bytes, u8 rank, u64-le extents, then the kind-specific fields
// and the forward wire payload. Half-encoded values round-trip with half
// precision; everything else round-trips exactly.
std::vector<uint8_t> serialize_message(const CompressedMessage& msg,
                                       const CompressorSpec& spec);
CompressedMessage deserialize_message(const std::vector<uint8_t>& bytes);

// --- budget matching --------------------------------------------------------

enum class MatchPolicy { same_cost, same_ratio };

// Per-token sparse budget matched to an autoencoder of code width c:
//   same_cost   largest k with k * (vb + ib) <= c * vb
//   same_ratio  k = c (same kept-element count per token)
// k < 1 is a parameter error (the budget cannot fit a single element).
size_t matched_k(MatchPolicy policy, size_t h, size_t c, size_t value_bytes,
                 size_t index_bytes);

// --- half-precision wire encoding ------------------------------------------

uint16_t float_to_half(float v);
float half_to_float(uint16_t h);

} // namespace actcomp
