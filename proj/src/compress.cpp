#include "actcomp/compress.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "actcomp/autoencoder.hpp"
#include "actcomp/rng.hpp"

namespace actcomp {

std::string to_string(CompressorKind k) {
    switch (k) {
        case CompressorKind::identity: return "identity";
        case CompressorKind::topk: return "topk";
        case CompressorKind::randk: return "randk";
        case CompressorKind::quant: return "quant";
        case CompressorKind::ae: return "ae";
    }
    return "identity";
}

CompressorKind compressor_kind_from_string(const std::string& s) {
    if (s == "identity") return CompressorKind::identity;
    if (s == "topk") return CompressorKind::topk;
    if (s == "randk") return CompressorKind::randk;
    if (s == "quant") return CompressorKind::quant;
    if (s == "ae") return CompressorKind::ae;
    throw parse_error("unknown compressor kind '" + s + "'");
}

void CompressorSpec::validate() const {
    if (value_bytes != 2 && value_bytes != 4) {
        throw parameter_error("compressor: value_bytes must be 2 or 4, got " +
                              std::to_string(value_bytes));
    }
    if (index_bytes != 4) {
        throw parameter_error("compressor: index_bytes must be 4, got " +
                              std::to_string(index_bytes));
    }
    switch (kind) {
        case CompressorKind::identity:
            break;
        case CompressorKind::topk:
        case CompressorKind::randk:
            if (k < 1) throw parameter_error("compressor: k must be at least 1");
            break;
        case CompressorKind::quant:
            if (bits != 2 && bits != 4 && bits != 8) {
                throw parameter_error("compressor: bits must be 2, 4 or 8, got " +
                                      std::to_string(bits));
            }
            break;
        case CompressorKind::ae:
            if (code_dim < 1) throw parameter_error("compressor: code_dim must be at least 1");
            break;
    }
}

// --- half-precision ---------------------------------------------------------

// IEEE binary16 with round-to-nearest-even, the usual bit-twiddling route.
uint16_t float_to_half(float v) {
    uint32_t f;
    std::memcpy(&f, &v, 4);
    uint32_t sign = (f >> 16) & 0x8000u;
    uint32_t exp = (f >> 23) & 0xFFu;
    uint32_t mant = f & 0x7FFFFFu;

    if (exp == 0xFF) { // inf / nan
        return static_cast<uint16_t>(sign | 0x7C00u | (mant ? 0x200u : 0u));
    }
    int e = static_cast<int>(exp) - 127 + 15;
    if (e >= 0x1F) { // overflow -> inf
        return static_cast<uint16_t>(sign | 0x7C00u);
    }
    if (e <= 0) { // subnormal or zero
        if (e < -10) return static_cast<uint16_t>(sign);
        mant |= 0x800000u;
        uint32_t shift = static_cast<uint32_t>(14 - e);
        uint32_t half_mant = mant >> shift;
        uint32_t rem = mant & ((1u << shift) - 1);
        uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_mant & 1u))) ++half_mant;
        return static_cast<uint16_t>(sign | half_mant);
    }
    uint32_t half = sign | (static_cast<uint32_t>(e) << 10) | (mant >> 13);
    uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half; // carries into exp correctly
    return static_cast<uint16_t>(half);
}

float half_to_float(uint16_t h) {
    uint32_t sign = (static_cast<uint32_t>(h) & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1Fu;
    uint32_t mant = h & 0x3FFu;
    uint32_t f;
    if (exp == 0) {
        if (mant == 0) {
            f = sign;
        } else { // subnormal: normalize
            int e = -1;
            do {
                ++e;
                mant <<= 1;
            } while (!(mant & 0x400u));
            mant &= 0x3FFu;
            f = sign | (static_cast<uint32_t>(127 - 15 - e) << 23) | (mant << 13);
        }
    } else if (exp == 0x1F) {
        f = sign | 0x7F800000u | (mant << 13);
    } else {
        f = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float out;
    std::memcpy(&out, &f, 4);
    return out;
}

// --- codecs -----------------------------------------------------------------

CompressedMessage identity_compress(const Tensor& x) {
    CompressedMessage msg;
    msg.original_shape = x.shape();
    msg.payload = DensePayload{x.values()};
    return msg;
}

CompressedMessage topk_compress(const Tensor& x, size_t k) {
    if (k < 1 || k > x.numel()) {
        throw parameter_error("topk: k must be in [1, numel], got " + std::to_string(k) +
                              " for " + std::to_string(x.numel()) + " elements");
    }
    std::vector<uint32_t> order(x.numel());
    std::iota(order.begin(), order.end(), 0u);
    auto larger = [&](uint32_t a, uint32_t b) {
        float aa = std::abs(x[a]);
        float ab = std::abs(x[b]);
        if (aa != ab) return aa > ab;
        return a < b; // tie: lower flat index wins
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), larger);
    order.resize(k);
    std::sort(order.begin(), order.end());

    SparsePayload p;
    p.indices = std::move(order);
    p.values.reserve(k);
    for (uint32_t i : p.indices) p.values.push_back(x[i]);

    CompressedMessage msg;
    msg.original_shape = x.shape();
    msg.payload = std::move(p);
    return msg;
}

CompressedMessage randk_compress(const Tensor& x, size_t k, uint64_t seed) {
    if (k < 1 || k > x.numel()) {
        throw parameter_error("randk: k must be in [1, numel], got " + std::to_string(k) +
                              " for " + std::to_string(x.numel()) + " elements");
    }
    Rng rng(seed);
    std::vector<size_t> picked = rng.sample_without_replacement(x.numel(), k);

    SparsePayload p;
    p.indices.reserve(k);
    p.values.reserve(k);
    for (size_t i : picked) {
        p.indices.push_back(static_cast<uint32_t>(i));
        p.values.push_back(x[i]);
    }
    CompressedMessage msg;
    msg.original_shape = x.shape();
    msg.payload = std::move(p);
    return msg;
}

CompressedMessage quant_compress(const Tensor& x, int bits, size_t group_len) {
    if (bits != 2 && bits != 4 && bits != 8) {
        throw parameter_error("quant: bits must be 2, 4 or 8, got " + std::to_string(bits));
    }
    size_t row = x.last_extent();
    if (group_len == 0) group_len = row;
    if (row % group_len != 0) {
        throw dimension_error("quant: group_len " + std::to_string(group_len) +
                              " must divide the trailing extent " + std::to_string(row));
    }
    size_t n = x.numel();
    size_t groups = n / group_len;
    const double levels = static_cast<double>((1 << bits) - 1);

    QuantPayload p;
    p.bits = bits;
    p.group_len = group_len;
    p.codes.resize(n);
    p.scales.resize(groups);
    p.zeros.resize(groups);

    for (size_t g = 0; g < groups; ++g) {
        const float* in = x.data() + g * group_len;
        float lo = in[0], hi = in[0];
        for (size_t i = 1; i < group_len; ++i) {
            lo = std::min(lo, in[i]);
            hi = std::max(hi, in[i]);
        }
        // Metadata is stored at f32; the code computation uses the stored
        // values (in double) so encode and decode see the same grid.
        float scale = static_cast<float>((static_cast<double>(hi) - lo) / levels);
        p.scales[g] = scale;
        p.zeros[g] = lo;
        uint8_t* codes = p.codes.data() + g * group_len;
        if (scale == 0.0f) {
            std::fill(codes, codes + group_len, uint8_t(0));
            continue;
        }
        for (size_t i = 0; i < group_len; ++i) {
            double v = (static_cast<double>(in[i]) - static_cast<double>(p.zeros[g])) /
                       static_cast<double>(scale);
            // Round half away from zero; v is nonnegative here so this is
            // floor(v + 0.5), clamped against float roundoff spilling past
            // the top level.
            double q = std::floor(v + 0.5);
            if (q < 0.0) q = 0.0;
            if (q > levels) q = levels;
            codes[i] = static_cast<uint8_t>(q);
        }
    }

    CompressedMessage msg;
    msg.original_shape = x.shape();
    msg.payload = std::move(p);
    return msg;
}

namespace {

void check_sparse_indices(const SparsePayload& p, size_t numel) {
    if (p.values.size() != p.indices.size()) {
        throw state_error("sparse message: value/index count mismatch");
    }
    uint32_t prev = 0;
    for (size_t i = 0; i < p.indices.size(); ++i) {
        if (p.indices[i] >= numel) {
            throw state_error("sparse message: index out of range");
        }
        if (i > 0 && p.indices[i] <= prev) {
            throw state_error("sparse message: indices must be strictly increasing");
        }
        prev = p.indices[i];
    }
}

} // namespace

Tensor decompress(const CompressedMessage& msg) {
    size_t n = msg.original_numel();
    if (std::holds_alternative<DensePayload>(msg.payload)) {
        const auto& p = std::get<DensePayload>(msg.payload);
        if (p.values.size() != n) throw state_error("dense message: value count mismatch");
        return Tensor(msg.original_shape, p.values);
    }
    if (std::holds_alternative<SparsePayload>(msg.payload)) {
        const auto& p = std::get<SparsePayload>(msg.payload);
        check_sparse_indices(p, n);
        Tensor out(msg.original_shape);
        for (size_t i = 0; i < p.indices.size(); ++i) out[p.indices[i]] = p.values[i];
        return out;
    }
    if (std::holds_alternative<QuantPayload>(msg.payload)) {
        const auto& p = std::get<QuantPayload>(msg.payload);
        if (p.codes.size() != n) throw state_error("quant message: code count mismatch");
        size_t groups = p.scales.size();
        if (groups * p.group_len != n || p.zeros.size() != groups) {
            throw state_error("quant message: group metadata mismatch");
        }
        Tensor out(msg.original_shape);
        const int maxcode = (1 << p.bits) - 1;
        for (size_t g = 0; g < groups; ++g) {
            double scale = p.scales[g];
            double zero = p.zeros[g];
            for (size_t i = 0; i < p.group_len; ++i) {
                uint8_t code = p.codes[g * p.group_len + i];
                if (code > maxcode) throw state_error("quant message: code exceeds bit width");
                out[g * p.group_len + i] =
                    static_cast<float>(zero + static_cast<double>(code) * scale);
            }
        }
        return out;
    }
    throw parameter_error("decompress: code messages carry no decoder; use ae_decompress");
}

CompressedMessage compress_with_spec(const Tensor& x, const CompressorSpec& spec,
                                     const AeParams* ae) {
    spec.validate();
    switch (spec.kind) {
        case CompressorKind::identity:
            return identity_compress(x);
        case CompressorKind::topk:
            return topk_compress(x, spec.k);
        case CompressorKind::randk:
            return randk_compress(x, spec.k, spec.seed);
        case CompressorKind::quant:
            return quant_compress(x, spec.bits, spec.group_len);
        case CompressorKind::ae:
            if (ae == nullptr) {
                throw parameter_error("compress: ae requires trained parameters");
            }
            return ae_compress(x, *ae);
    }
    throw parameter_error("compress: unknown kind");
}

Tensor decompress_with_spec(const CompressedMessage& msg, const CompressorSpec& spec,
                            const AeParams* ae) {
    if (spec.kind == CompressorKind::ae) {
        if (ae == nullptr) {
            throw parameter_error("decompress: ae requires trained parameters");
        }
        return ae_decompress(msg, *ae);
    }
    return decompress(msg);
}

// --- byte accounting --------------------------------------------------------

size_t message_bytes(const CompressedMessage& msg, Direction dir,
                     const CompressorSpec& spec) {
    size_t vb = spec.value_bytes;
    size_t ib = spec.index_bytes;
    size_t n = msg.original_numel();
    if (std::holds_alternative<DensePayload>(msg.payload)) {
        return n * vb;
    }
    if (std::holds_alternative<SparsePayload>(msg.payload)) {
        size_t k = std::get<SparsePayload>(msg.payload).values.size();
        return dir == Direction::forward ? k * (vb + ib) : k * vb;
    }
    if (std::holds_alternative<QuantPayload>(msg.payload)) {
        const auto& p = std::get<QuantPayload>(msg.payload);
        if (dir == Direction::forward) {
            size_t code_bytes = (n * static_cast<size_t>(p.bits) + 7) / 8;
            return code_bytes + p.scales.size() * 2 * 4;
        }
        // The gradient engine only moves float tensors, so the backward
        // message is the full dense gradient.
        return n * vb;
    }
    const auto& p = std::get<CodePayload>(msg.payload);
    return p.values.size() * vb;
}

namespace {

void append_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void append_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_u32(out, bits);
}

void append_value(std::vector<uint8_t>& out, float v, size_t value_bytes) {
    if (value_bytes == 2) {
        uint16_t h = float_to_half(v);
        out.push_back(static_cast<uint8_t>(h & 0xFF));
        out.push_back(static_cast<uint8_t>(h >> 8));
    } else {
        append_f32(out, v);
    }
}

void append_values(std::vector<uint8_t>& out, const std::vector<float>& vs,
                   size_t value_bytes) {
    for (float v : vs) append_value(out, v, value_bytes);
}

// Codes packed LSB-first within each byte, in element order.
void append_packed_codes(std::vector<uint8_t>& out, const std::vector<uint8_t>& codes,
                         int bits) {
    size_t total_bits = codes.size() * static_cast<size_t>(bits);
    size_t nbytes = (total_bits + 7) / 8;
    size_t start = out.size();
    out.resize(start + nbytes, 0);
    size_t bitpos = 0;
    for (uint8_t c : codes) {
        size_t byte = start + bitpos / 8;
        size_t off = bitpos % 8;
        out[byte] |= static_cast<uint8_t>(c << off);
        if (off + static_cast<size_t>(bits) > 8) {
            out[byte + 1] |= static_cast<uint8_t>(c >> (8 - off));
        }
        bitpos += static_cast<size_t>(bits);
    }
}

} // namespace

std::vector<uint8_t> wire_payload(const CompressedMessage& msg, Direction dir,
                                  const CompressorSpec& spec) {
    std::vector<uint8_t> out;
    size_t vb = spec.value_bytes;
    if (std::holds_alternative<DensePayload>(msg.payload)) {
        append_values(out, std::get<DensePayload>(msg.payload).values, vb);
        return out;
    }
    if (std::holds_alternative<SparsePayload>(msg.payload)) {
        const auto& p = std::get<SparsePayload>(msg.payload);
        if (dir == Direction::forward) {
            for (uint32_t i : p.indices) append_u32(out, i);
        }
        append_values(out, p.values, vb);
        return out;
    }
    if (std::holds_alternative<QuantPayload>(msg.payload)) {
        const auto& p = std::get<QuantPayload>(msg.payload);
        if (dir == Direction::forward) {
            for (size_t g = 0; g < p.scales.size(); ++g) {
                append_f32(out, p.scales[g]);
                append_f32(out, p.zeros[g]);
            }
            append_packed_codes(out, p.codes, p.bits);
        } else {
            // Stand-in for the float gradient of the same shape: the
            // dequantized activation, value-encoded like any dense tensor.
            Tensor grad_shape = decompress(msg);
            append_values(out, grad_shape.values(), vb);
        }
        return out;
    }
    append_values(out, std::get<CodePayload>(msg.payload).values, vb);
    return out;
}

// --- framed persistence -----------------------------------------------------

namespace {

constexpr uint8_t kMagic = 0xAC;
constexpr uint8_t kVersion = 1;

struct Cursor {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    uint8_t u8() {
        if (pos + 1 > buf.size()) throw parse_error("message frame: truncated");
        return buf[pos++];
    }
    uint32_t u32() {
        if (pos + 4 > buf.size()) throw parse_error("message frame: truncated");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        if (pos + 8 > buf.size()) throw parse_error("message frame: truncated");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    float value(size_t value_bytes) {
        if (value_bytes == 2) {
            uint16_t h = static_cast<uint16_t>(u8());
            h |= static_cast<uint16_t>(u8()) << 8;
            return half_to_float(h);
        }
        return f32();
    }
};

uint8_t payload_tag(const CompressedMessage& msg) {
    if (std::holds_alternative<DensePayload>(msg.payload)) return 0;
    if (std::holds_alternative<SparsePayload>(msg.payload)) return 1;
    if (std::holds_alternative<QuantPayload>(msg.payload)) return 2;
    return 3;
}

} // namespace

std::vector<uint8_t> serialize_message(const CompressedMessage& msg,
                                       const CompressorSpec& spec) {
    std::vector<uint8_t> out;
    out.push_back(kMagic);
    out.push_back(kVersion);
    out.push_back(payload_tag(msg));
    out.push_back(static_cast<uint8_t>(spec.value_bytes));
    out.push_back(static_cast<uint8_t>(msg.original_shape.size()));
    for (size_t e : msg.original_shape) append_u64(out, e);

    if (std::holds_alternative<SparsePayload>(msg.payload)) {
        append_u64(out, std::get<SparsePayload>(msg.payload).values.size());
    } else if (std::holds_alternative<QuantPayload>(msg.payload)) {
        const auto& p = std::get<QuantPayload>(msg.payload);
        out.push_back(static_cast<uint8_t>(p.bits));
        append_u64(out, p.group_len);
    } else if (std::holds_alternative<CodePayload>(msg.payload)) {
        append_u64(out, std::get<CodePayload>(msg.payload).code_dim);
    }

    std::vector<uint8_t> body = wire_payload(msg, Direction::forward, spec);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

CompressedMessage deserialize_message(const std::vector<uint8_t>& bytes) {
    Cursor cur{bytes};
    if (cur.u8() != kMagic) throw parse_error("message frame: bad magic");
    if (cur.u8() != kVersion) throw parse_error("message frame: unsupported version");
    uint8_t tag = cur.u8();
    size_t vb = cur.u8();
    if (vb != 2 && vb != 4) throw parse_error("message frame: bad value width");
    uint8_t rank = cur.u8();
    if (rank == 0 || rank > 8) throw parse_error("message frame: bad rank");

    CompressedMessage msg;
    msg.original_shape.resize(rank);
    for (size_t i = 0; i < rank; ++i) {
        uint64_t e = cur.u64();
        if (e == 0) throw parse_error("message frame: zero extent");
        msg.original_shape[i] = static_cast<size_t>(e);
    }
    size_t n = msg.original_numel();

    switch (tag) {
        case 0: {
            DensePayload p;
            p.values.reserve(n);
            for (size_t i = 0; i < n; ++i) p.values.push_back(cur.value(vb));
            msg.payload = std::move(p);
            break;
        }
        case 1: {
            uint64_t k = cur.u64();
            if (k > n) throw parse_error("message frame: sparse k exceeds numel");
            SparsePayload p;
            p.indices.reserve(k);
            p.values.reserve(k);
            for (uint64_t i = 0; i < k; ++i) p.indices.push_back(cur.u32());
            for (uint64_t i = 0; i < k; ++i) p.values.push_back(cur.value(vb));
            check_sparse_indices(p, n);
            msg.payload = std::move(p);
            break;
        }
        case 2: {
            QuantPayload p;
            p.bits = cur.u8();
            if (p.bits != 2 && p.bits != 4 && p.bits != 8) {
                throw parse_error("message frame: bad quant bit width");
            }
            p.group_len = static_cast<size_t>(cur.u64());
            if (p.group_len == 0 || n % p.group_len != 0) {
                throw parse_error("message frame: bad quant group length");
            }
            size_t groups = n / p.group_len;
            p.scales.reserve(groups);
            p.zeros.reserve(groups);
            for (size_t g = 0; g < groups; ++g) {
                p.scales.push_back(cur.f32());
                p.zeros.push_back(cur.f32());
            }
            p.codes.resize(n);
            size_t total_bits = n * static_cast<size_t>(p.bits);
            size_t nbytes = (total_bits + 7) / 8;
            if (cur.pos + nbytes > bytes.size()) throw parse_error("message frame: truncated");
            const uint8_t mask = static_cast<uint8_t>((1 << p.bits) - 1);
            size_t bitpos = 0;
            for (size_t i = 0; i < n; ++i) {
                size_t byte = cur.pos + bitpos / 8;
                size_t off = bitpos % 8;
                uint16_t window = bytes[byte];
                if (off + static_cast<size_t>(p.bits) > 8) {
                    window |= static_cast<uint16_t>(bytes[byte + 1]) << 8;
                }
                p.codes[i] = static_cast<uint8_t>((window >> off) & mask);
                bitpos += static_cast<size_t>(p.bits);
            }
            cur.pos += nbytes;
            msg.payload = std::move(p);
            break;
        }
        case 3: {
            uint64_t c = cur.u64();
            if (c == 0) throw parse_error("message frame: zero code width");
            size_t rows = n / msg.original_shape.back();
            CodePayload p;
            p.code_dim = static_cast<size_t>(c);
            size_t count = rows * p.code_dim;
            p.values.reserve(count);
            for (size_t i = 0; i < count; ++i) p.values.push_back(cur.value(vb));
            msg.payload = std::move(p);
            break;
        }
        default:
            throw parse_error("message frame: unknown payload tag");
    }
    if (cur.pos != bytes.size()) throw parse_error("message frame: trailing bytes");
    return msg;
}

// --- budget matching --------------------------------------------------------

size_t matched_k(MatchPolicy policy, size_t h, size_t c, size_t value_bytes,
                 size_t index_bytes) {
    if (c < 1 || c > h) {
        throw parameter_error("matched_k: code width must be in [1, h]");
    }
    size_t k;
    if (policy == MatchPolicy::same_cost) {
        k = (c * value_bytes) / (value_bytes + index_bytes);
    } else {
        k = c;
    }
    if (k < 1) {
        throw parameter_error("matched_k: budget of " + std::to_string(c * value_bytes) +
                              " bytes cannot fit one indexed value");
    }
    if (k > h) k = h;
    return k;
}

} // namespace actcomp
