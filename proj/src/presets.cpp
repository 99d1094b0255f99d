#include "actcomp/presets.hpp"

namespace actcomp {

namespace {

CompressorSpec sparse_preset(CompressorKind kind, MatchPolicy policy, size_t code_dim,
                             size_t hidden, size_t value_bytes, size_t index_bytes) {
    CompressorSpec spec;
    spec.kind = kind;
    spec.value_bytes = value_bytes;
    spec.index_bytes = index_bytes;
    spec.k = matched_k(policy, hidden, code_dim, value_bytes, index_bytes);
    return spec;
}

} // namespace

CompressorSpec expand_preset(const std::string& name, size_t hidden,
                             size_t value_bytes, size_t index_bytes) {
    if (hidden == 0) throw parameter_error("preset expansion: hidden must be positive");
    CompressorSpec spec;
    spec.value_bytes = value_bytes;
    spec.index_bytes = index_bytes;

    if (name == "w/o") {
        spec.kind = CompressorKind::identity;
        return spec;
    }
    if (name == "A1" || name == "A2") {
        spec.kind = CompressorKind::ae;
        spec.code_dim = name == "A1" ? 50 : 100;
        if (spec.code_dim > hidden) {
            throw parameter_error("preset " + name + ": code width " +
                                  std::to_string(spec.code_dim) + " exceeds hidden " +
                                  std::to_string(hidden));
        }
        return spec;
    }
    if (name == "T1" || name == "R1") {
        return sparse_preset(name[0] == 'T' ? CompressorKind::topk : CompressorKind::randk,
                             MatchPolicy::same_cost, 50, hidden, value_bytes, index_bytes);
    }
    if (name == "T2" || name == "R2") {
        return sparse_preset(name[0] == 'T' ? CompressorKind::topk : CompressorKind::randk,
                             MatchPolicy::same_cost, 100, hidden, value_bytes, index_bytes);
    }
    if (name == "T3" || name == "R3") {
        return sparse_preset(name[0] == 'T' ? CompressorKind::topk : CompressorKind::randk,
                             MatchPolicy::same_ratio, 50, hidden, value_bytes, index_bytes);
    }
    if (name == "T4" || name == "R4") {
        return sparse_preset(name[0] == 'T' ? CompressorKind::topk : CompressorKind::randk,
                             MatchPolicy::same_ratio, 100, hidden, value_bytes, index_bytes);
    }
    if (name == "Q1" || name == "Q2" || name == "Q3") {
        spec.kind = CompressorKind::quant;
        spec.bits = name == "Q1" ? 2 : name == "Q2" ? 4 : 8;
        return spec;
    }
    throw parameter_error("unknown preset '" + name + "'");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "w/o", "A1", "A2", "T1", "T2", "T3", "T4",
        "R1",  "R2", "R3", "R4", "Q1", "Q2", "Q3",
    };
    return names;
}

bool is_preset_name(const std::string& name) {
    for (const std::string& n : preset_names()) {
        if (n == name) return true;
    }
    return false;
}

} // namespace actcomp
