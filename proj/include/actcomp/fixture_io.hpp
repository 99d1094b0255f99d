#pragma once

#include <string>

#include "actcomp/autoencoder.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

// Binary tensor fixtures, little-endian throughout:
//   u64 rank, u64 extents[rank], then f32 values in row-major order.
// Double tensors are narrowed to f32 on write.
void write_tensor_file(const std::string& path, const Tensor& t);
void write_tensor_file(const std::string& path, const TensorD& t);
Tensor read_tensor_file(const std::string& path);

// Autoencoder parameter files: a small header (u64 version = 1, u64 h, u64 c)
// followed by the encoder and decoder as embedded tensor fixtures.
void write_ae_params_file(const std::string& path, const AeParams& params);
AeParams read_ae_params_file(const std::string& path);

} // namespace actcomp
