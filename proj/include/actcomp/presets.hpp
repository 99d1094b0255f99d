#pragma once

#include <string>
#include <vector>

#include "actcomp/compress.hpp"

namespace actcomp {

// Expands a notation-table preset into a concrete compressor spec.
//   w/o          identity (no compression)
//   A1, A2       linear autoencoder, code width 50 / 100
//   T1, T2       top-k matched to A1 / A2 by communication cost
//   T3, T4       top-k matched to A1 / A2 by compression ratio
//   R1..R4       random-k, matched the same way as T1..T4
//   Q1, Q2, Q3   uniform quantization to 2 / 4 / 8 bits
// hidden is the model width the matched-k rules are evaluated against;
// value_bytes/index_bytes are the wire widths they assume.
CompressorSpec expand_preset(const std::string& name, size_t hidden,
                             size_t value_bytes = 2, size_t index_bytes = 4);

bool is_preset_name(const std::string& name);
const std::vector<std::string>& preset_names();

} // namespace actcomp
