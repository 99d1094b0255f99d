#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actcomp/autoencoder.hpp"
#include "actcomp/cost_model.hpp"
#include "actcomp/model.hpp"
#include "actcomp/tensor.hpp"

namespace actcomp {

enum class RunMode { simulate, predict, fit, bench, spectrum };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct PredictOptions {
    std::vector<ScalingCase> rows; // empty: single-node prediction only
    double micro_batch_size = 16.0;

    bool operator==(const PredictOptions&) const = default;
};

struct FitOptions {
    std::string measurements;  // CSV path (kind,size,time)
    double w = 1.0;            // bandwidth, not fitted
    double e = 1.0;            // encoder width, not fitted
    std::string out_coeffs;    // optional: write fitted coefficients here

    bool operator==(const FitOptions&) const = default;
};

struct BenchOptions {
    size_t repetitions = 11;

    bool operator==(const BenchOptions&) const = default;
};

struct SpectrumOptions {
    std::string source = "random"; // "random" or "file"
    std::string file;              // tensor fixture path when source = file
    size_t rows = 64;
    size_t cols = 64;
    Dist dist = Dist::gaussian;

    bool operator==(const SpectrumOptions&) const = default;
};

// One experiment, as described by a config file. The compression section is
// optional (identity placement otherwise); when a preset is named it fully
// determines the codec, so explicit codec keys next to it are rejected.
struct ExperimentSpec {
    RunMode mode = RunMode::simulate;
    uint64_t seed = 0;
    std::string output; // report path; empty writes to stdout

    ModelConfig model;
    ParallelPlan plan;

    bool has_compression = false;
    std::string preset; // empty when the codec was given explicitly
    CompressionPlacement placement;
    // Autoencoder training settings (ae codec only). The training seed is
    // derived from the run seed at execution time; the field here stays 0.
    AeHyper ae_hyper;

    bool has_coeffs = false;
    std::string coeffs_file; // empty when coefficients were inline
    CostCoefficients coeffs;

    PredictOptions predict;
    FitOptions fit;
    BenchOptions bench;
    SpectrumOptions spectrum;

    bool operator==(const ExperimentSpec&) const = default;
};

// Parses the documented INI-style config text (sections in brackets, one
// key = value per line, '#' comments) and validates it for its mode.
// Violations raise parse_error naming the offending [section].key.
ExperimentSpec parse_config(const std::string& text);

ExperimentSpec read_config_file(const std::string& path);

// Canonical text form; parse_config(emit_config(spec)) == spec.
std::string emit_config(const ExperimentSpec& spec);

} // namespace actcomp
