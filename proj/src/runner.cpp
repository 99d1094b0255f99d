#include "actcomp/runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "actcomp/compress.hpp"
#include "actcomp/cost_model.hpp"
#include "actcomp/fixture_io.hpp"
#include "actcomp/mp_sim.hpp"
#include "actcomp/rng.hpp"
#include "actcomp/schedule.hpp"
#include "actcomp/spectrum.hpp"

namespace actcomp {

namespace {

// Seed words for the independent random streams of one run.
enum : uint64_t { kSeedModel = 1, kSeedInput = 2, kSeedAeTraining = 3 };

ordered_json site_to_fidelity(const SiteRecord& rec) {
    ordered_json j;
    j["site"] = to_string(rec.where);
    j["layer"] = rec.layer;
    j["boundary"] = rec.boundary;
    j["micro_batch"] = rec.micro_batch;
    j["compressed"] = rec.compressed;
    j["max_abs_err"] = rec.max_abs_err;
    j["rel_err"] = rec.rel_err;
    return j;
}

ordered_json site_to_bytes(const SiteRecord& rec) {
    ordered_json j;
    j["site"] = to_string(rec.where);
    j["layer"] = rec.layer;
    j["boundary"] = rec.boundary;
    j["micro_batch"] = rec.micro_batch;
    j["compressed"] = rec.compressed;
    j["forward"] = rec.bytes_forward;
    j["backward"] = rec.bytes_backward;
    j["baseline_forward"] = rec.baseline_forward;
    j["baseline_backward"] = rec.baseline_backward;
    return j;
}

void run_simulate(const ExperimentSpec& spec, const std::string& trace_path,
                  ordered_json& report) {
    StackedModel model = random_model(spec.model, mix_seed(spec.seed, kSeedModel));
    Tensor input = random_input(spec.model, mix_seed(spec.seed, kSeedInput));

    const CompressionPlacement* placement =
        spec.has_compression ? &spec.placement : nullptr;
    AeBank bank;
    if (placement != nullptr && placement->spec.kind == CompressorKind::ae) {
        AeHyper hyper = spec.ae_hyper;
        hyper.seed = mix_seed(spec.seed, kSeedAeTraining);
        bank = train_ae_bank(model, *placement, input, hyper);
    }

    ForwardResult result = parallel_forward(model, spec.plan, placement, &bank, input);

    ordered_json fidelity = ordered_json::array();
    ordered_json bytes = ordered_json::array();
    for (const SiteRecord& rec : result.sites) {
        fidelity.push_back(site_to_fidelity(rec));
        bytes.push_back(site_to_bytes(rec));
    }
    report["fidelity"] = std::move(fidelity);
    report["bytes"] = std::move(bytes);

    if (!trace_path.empty()) {
        // Unit stage time, no hop cost: the trace shows the schedule shape of
        // this plan, not fitted times (those belong to predict mode).
        ScheduleResult schedule =
            pipeline_makespan_sim(spec.plan.pp, spec.plan.micro_batches, 1.0, 0.0);
        write_trace_file(trace_path, schedule.events);
    }
}

CostCoefficients resolve_coeffs(const ExperimentSpec& spec) {
    if (!spec.has_coeffs) {
        throw parameter_error("predictions need cost coefficients");
    }
    if (!spec.coeffs_file.empty()) return read_coefficients_file(spec.coeffs_file);
    CostCoefficients k = spec.coeffs;
    k.validate();
    return k;
}

void run_predict(const ExperimentSpec& spec, ordered_json& report) {
    CostCoefficients coeffs = resolve_coeffs(spec);
    if (!comm_monotone(coeffs)) {
        std::cerr << "warning: t_comm is not monotone for these coefficients "
                     "(beta*d < c); predictions near the threshold step down\n";
    }

    // Per-layer times are evaluated at the micro-batch size: a pipeline stage
    // processes one micro-batch at a time.
    double micro = static_cast<double>(spec.model.batch) /
                   static_cast<double>(spec.plan.micro_batches);
    double t = layer_time(micro, spec.model.seq, spec.model.hidden, coeffs);
    double t_ae = layer_time_ae(micro, spec.model.seq, spec.model.hidden, coeffs);

    ordered_json block;
    block["micro_batch"] = micro;
    block["layer_time"] = t;
    block["layer_time_ae"] = t_ae;
    block["speedup_single_node"] =
        speedup_single_node(micro, spec.model.seq, spec.model.hidden, coeffs);

    ordered_json scaling = ordered_json::array();
    if (!spec.predict.rows.empty()) {
        std::vector<ScalingRow> rows =
            weak_scaling_table(spec.predict.rows, coeffs, spec.predict.micro_batch_size,
                               static_cast<double>(spec.model.seq));
        for (const ScalingRow& row : rows) {
            ordered_json j;
            j["h"] = row.h;
            j["L"] = row.L;
            j["n"] = row.n;
            j["B"] = row.B;
            j["m"] = row.m;
            j["s"] = row.s;
            j["speedup"] = row.speedup;
            scaling.push_back(std::move(j));
        }
    }
    block["scaling"] = std::move(scaling);
    report["predictions"] = std::move(block);
}

void run_fit(const ExperimentSpec& spec, ordered_json& report) {
    MeasurementTable table = read_measurement_csv(spec.fit.measurements);
    if (table.comp.empty()) {
        throw parameter_error("no comp measurements in " + spec.fit.measurements);
    }
    if (table.overhead.empty()) {
        throw parameter_error("no overhead measurements in " + spec.fit.measurements);
    }
    AlphaFit alpha = fit_alpha(table.comp);
    CommFit comm = fit_comm_piecewise(table.comm);
    if (comm.single_regime) {
        std::cerr << "warning: communication measurements cover only one regime; "
                     "the piecewise fit is degenerate\n";
    }
    double gamma = fit_gamma(table.overhead);

    CostCoefficients k;
    k.alpha = alpha.alpha;
    k.beta = comm.beta;
    k.c = comm.c;
    k.d = comm.d;
    k.gamma = gamma;
    k.w = spec.fit.w;
    k.e = spec.fit.e;
    k.validate();
    if (!comm_monotone(k)) {
        std::cerr << "warning: fitted t_comm is not monotone (beta*d < c)\n";
    }

    ordered_json block;
    block["alpha"] = k.alpha;
    block["implied_alpha"] = alpha.implied;
    block["beta"] = k.beta;
    block["c"] = k.c;
    block["d"] = k.d;
    block["comm_single_regime"] = comm.single_regime;
    block["gamma"] = k.gamma;
    block["w"] = k.w;
    block["e"] = k.e;
    block["comm_monotone"] = comm_monotone(k);
    report["fit"] = std::move(block);

    if (!spec.fit.out_coeffs.empty()) {
        write_coefficients_file(spec.fit.out_coeffs, k,
                                {
                                    "fitted from " + spec.fit.measurements,
                                    "w and e supplied by the fit config, not fitted",
                                });
    }
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_bench(const ExperimentSpec& spec, ordered_json& report) {
    Tensor input = random_input(spec.model, mix_seed(spec.seed, kSeedInput));

    CompressorSpec codec;
    if (spec.has_compression) codec = spec.placement.spec;
    if (codec.kind == CompressorKind::topk || codec.kind == CompressorKind::randk) {
        codec.k = std::min(codec.k * input.leading_rows(), input.numel());
    }
    AeParams ae;
    const AeParams* ae_ptr = nullptr;
    if (codec.kind == CompressorKind::ae) {
        // Untrained parameters: encode/decode cost does not depend on the
        // values, and bench never reports fidelity.
        ae = xavier_ae_params(spec.model.hidden, codec.code_dim,
                              mix_seed(spec.seed, kSeedAeTraining));
        ae_ptr = &ae;
    }

    using clock = std::chrono::steady_clock;
    std::vector<double> encode_ms, decode_ms;
    encode_ms.reserve(spec.bench.repetitions);
    decode_ms.reserve(spec.bench.repetitions);
    for (size_t rep = 0; rep < spec.bench.repetitions; ++rep) {
        auto t0 = clock::now();
        CompressedMessage msg = compress_with_spec(input, codec, ae_ptr);
        auto t1 = clock::now();
        Tensor back = decompress_with_spec(msg, codec, ae_ptr);
        auto t2 = clock::now();
        encode_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        decode_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        // Keep the decompressed tensor alive past the clock read.
        (void)back;
    }

    ordered_json block;
    block["codec"] = to_string(codec.kind);
    block["repetitions"] = spec.bench.repetitions;
    block["encode_ms"] = encode_ms;
    block["decode_ms"] = decode_ms;
    block["encode_median_ms"] = median_of(encode_ms);
    block["decode_median_ms"] = median_of(decode_ms);
    report["timings"] = std::move(block);
}

void run_spectrum(const ExperimentSpec& spec, ordered_json& report) {
    Tensor matrix;
    if (spec.spectrum.source == "file") {
        matrix = read_tensor_file(spec.spectrum.file);
    } else {
        matrix = random_tensor({spec.spectrum.rows, spec.spectrum.cols},
                               spec.spectrum.dist, mix_seed(spec.seed, kSeedInput));
    }
    SpectrumCurve curve = singular_spectrum(matrix);

    ordered_json block;
    block["rows"] = matrix.extent(0);
    block["cols"] = matrix.extent(1);
    block["singular_values"] = curve.singular_values;
    block["cumulative_mass"] = curve.cumulative_mass;
    report["spectrum"] = std::move(block);
}

} // namespace

ordered_json run(const ExperimentSpec& spec, const std::string& trace_path) {
    if (!trace_path.empty() && spec.mode != RunMode::simulate) {
        throw parameter_error("trace output is only available in simulate mode");
    }

    ordered_json report;
    report["schema"] = kReportSchema;
    report["mode"] = to_string(spec.mode);
    ordered_json provenance;
    provenance["seed"] = spec.seed;
    provenance["version"] = kToolVersion;
    provenance["coefficients"] = !spec.has_coeffs ? "none"
                                 : spec.coeffs_file.empty()
                                     ? "inline"
                                     : "file:" + spec.coeffs_file;
    report["provenance"] = std::move(provenance);
    report["config"] = emit_config(spec);

    try {
        switch (spec.mode) {
            case RunMode::simulate: run_simulate(spec, trace_path, report); break;
            case RunMode::predict: run_predict(spec, report); break;
            case RunMode::fit: run_fit(spec, report); break;
            case RunMode::bench: run_bench(spec, report); break;
            case RunMode::spectrum: run_spectrum(spec, report); break;
        }
    } catch (const error& e) {
        throw error(e.code(), to_string(spec.mode) + ": " + e.what());
    }

    validate_report(report);
    return report;
}

std::string run_and_write(const ExperimentSpec& spec, const std::string& trace_path) {
    ordered_json report = run(spec, trace_path);
    std::string text = dump_report(report);
    if (spec.output.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(spec.output, std::ios::binary);
        if (!out) throw io_error("cannot write report: " + spec.output);
        out << text;
        if (!out) throw io_error("write failed: " + spec.output);
    }
    return text;
}

} // namespace actcomp
