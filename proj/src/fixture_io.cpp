#include "actcomp/fixture_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace actcomp {

static_assert(std::endian::native == std::endian::little,
              "fixture format is little-endian; big-endian hosts need byte swaps");

namespace {

constexpr uint64_t kAeVersion = 1;
constexpr uint64_t kMaxRank = 8;
constexpr uint64_t kMaxExtent = 1ull << 32;

void put_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}

uint64_t get_u64(std::istream& is, const std::string& path) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw io_error("tensor fixture '" + path + "': truncated header");
    return v;
}

void write_tensor_block(std::ostream& os, const Tensor& t) {
    put_u64(os, t.rank());
    for (size_t e : t.shape()) put_u64(os, e);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

Tensor read_tensor_block(std::istream& is, const std::string& path) {
    uint64_t rank = get_u64(is, path);
    if (rank == 0 || rank > kMaxRank) {
        throw io_error("tensor fixture '" + path + "': implausible rank " +
                       std::to_string(rank));
    }
    std::vector<size_t> shape(rank);
    for (uint64_t i = 0; i < rank; ++i) {
        uint64_t e = get_u64(is, path);
        if (e == 0 || e > kMaxExtent) {
            throw io_error("tensor fixture '" + path + "': implausible extent " +
                           std::to_string(e));
        }
        shape[i] = static_cast<size_t>(e);
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw io_error("tensor fixture '" + path + "': truncated data");
    return t;
}

} // namespace

void write_tensor_file(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    write_tensor_block(os, t);
    if (!os) throw io_error("write failed for '" + path + "'");
}

void write_tensor_file(const std::string& path, const TensorD& t) {
    write_tensor_file(path, narrow(t));
}

Tensor read_tensor_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "'");
    Tensor t = read_tensor_block(is, path);
    is.peek();
    if (!is.eof()) throw io_error("tensor fixture '" + path + "': trailing bytes");
    return t;
}

void write_ae_params_file(const std::string& path, const AeParams& params) {
    params.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path + "' for writing");
    put_u64(os, kAeVersion);
    put_u64(os, params.hidden());
    put_u64(os, params.code_dim());
    write_tensor_block(os, params.encoder);
    write_tensor_block(os, params.decoder);
    if (!os) throw io_error("write failed for '" + path + "'");
}

AeParams read_ae_params_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "'");
    uint64_t version = get_u64(is, path);
    if (version != kAeVersion) {
        throw io_error("ae params '" + path + "': unsupported version " +
                       std::to_string(version));
    }
    uint64_t h = get_u64(is, path);
    uint64_t c = get_u64(is, path);
    AeParams params{read_tensor_block(is, path), read_tensor_block(is, path)};
    is.peek();
    if (!is.eof()) throw io_error("ae params '" + path + "': trailing bytes");
    params.validate();
    if (params.hidden() != h || params.code_dim() != c) {
        throw io_error("ae params '" + path + "': header (h=" + std::to_string(h) +
                       ", c=" + std::to_string(c) + ") disagrees with tensor shapes");
    }
    return params;
}

} // namespace actcomp
