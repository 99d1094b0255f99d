#pragma once

#include <string>
#include <vector>

#include "actcomp/errors.hpp"

namespace actcomp {

// Coefficients of the analytical performance model. Times are in "model time
// units": whatever unit the fitting measurements used (the shipped fixture is
// in milliseconds). alpha is time per FLOP, beta time per message element, c
// the small-message latency floor, d the message-size threshold in elements,
// gamma the compression overhead per tensor element, w the inter-node
// bandwidth in elements per time unit, and e the encoder output width used by
// the compressed-path predictions.
struct CostCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
    double c = 0.0;
    double d = 1.0;
    double gamma = 0.0;
    double w = 1.0;
    double e = 1.0;

    void validate() const;
    bool operator==(const CostCoefficients&) const = default;
};

// True when t_comm is monotone non-decreasing in the message size, i.e. the
// linear regime starts at or above the latency floor (beta*d >= c).
bool comm_monotone(const CostCoefficients& k);

// Training FLOPs of one transformer layer: 96*B*s*h^2 + 16*B*s^2*h.
double flops_per_layer(double batch, double seq, double hidden);

// Piecewise communication time: c below the threshold, beta*elems at or
// above it.
double t_comm(double msg_elems, const CostCoefficients& k);

// Per-layer time without compression: alpha*FLOPs + t_comm(B*s*h).
double layer_time(double batch, double seq, double hidden, const CostCoefficients& k);

// Per-layer time with the linear encoder on the collective: the message
// shrinks to B*s*e and the codec itself costs gamma*B*s*h.
double layer_time_ae(double batch, double seq, double hidden, const CostCoefficients& k);

// layer_time / layer_time_ae. The layer count cancels, so this is also the
// whole-model single-node speedup.
double speedup_single_node(double batch, double seq, double hidden,
                           const CostCoefficients& k);

// One weak-scaling configuration: B is the global batch, m the micro-batch
// count per mini-batch (so the micro-batch size is B/m).
struct ScalingRow {
    double h = 0.0;
    double L = 0.0;
    double n = 0.0;
    double B = 0.0;
    double m = 0.0;
    double s = 0.0;
    double speedup = 0.0;

    void validate() const;
};

// Balanced fill-drain pipeline time: (m + n - 1) * stage_time +
// (n - 1) * hop_time. Closed form of the event schedule with non-blocking
// links; pipeline_makespan_sim reproduces it exactly.
double pipeline_time(double stages, double micro_batches, double stage_time,
                     double hop_time);

// Whole-pipeline time for one row: stage time L*T/n with T evaluated at the
// micro-batch size, hop time (B/m)*s*h/w (or *e/w when compressed).
double cluster_time(const ScalingRow& row, const CostCoefficients& k, bool compressed);

// Uncompressed over compressed cluster_time. n = 1 returns
// speedup_single_node at the micro-batch size (the pipeline terms cancel
// algebraically; the collapse is explicit so the identity holds bit for bit).
double cluster_speedup(const ScalingRow& row, const CostCoefficients& k);

struct ScalingCase {
    double h = 0.0;
    double L = 0.0;
    double n = 0.0;
    double B = 0.0;

    bool operator==(const ScalingCase&) const = default;
};

// Expands each case with m = B / micro_batch_size (which must divide) and the
// shared sequence length, then evaluates cluster_speedup per row.
std::vector<ScalingRow> weak_scaling_table(const std::vector<ScalingCase>& cases,
                                           const CostCoefficients& k,
                                           double micro_batch_size, double seq);

// --- coefficient fitting ----------------------------------------------------

// One fitting observation: size is FLOPs (comp), message elements (comm), or
// tensor elements (overhead); time is the measured wall time.
struct Measurement {
    double size = 0.0;
    double time = 0.0;
};

struct AlphaFit {
    double alpha = 0.0;
    // time/FLOPs of every input point, in input order; diagnostics only.
    std::vector<double> implied;
};

// alpha = time/FLOPs of the measurement with the largest FLOPs. Small
// workloads overstate per-FLOP cost (fixed overheads dominate), so the
// largest point is the representative one.
AlphaFit fit_alpha(const std::vector<Measurement>& points);

struct CommFit {
    double beta = 0.0;
    double c = 0.0;
    double d = 1.0;
    bool has_constant = false; // left regime non-empty; c is meaningful
    bool has_linear = false;   // right regime non-empty; beta is meaningful
    bool single_regime = false; // all points fell on one side; warn
    double sse = 0.0;
};

// Piecewise fit of t_comm. Candidate thresholds are the measured sizes plus
// one sentinel past the largest size; for each candidate, c is the mean of
// the points below it and beta the through-origin least-squares slope of the
// rest; the candidate with the smallest total squared error wins (ties to
// the smallest threshold). Requires at least 4 points.
CommFit fit_comm_piecewise(const std::vector<Measurement>& points);

// Through-origin least-squares slope of time against element count.
// Requires at least 2 points.
double fit_gamma(const std::vector<Measurement>& points);

// --- measurement and coefficient files --------------------------------------

struct MeasurementTable {
    std::vector<Measurement> comp;     // size in FLOPs
    std::vector<Measurement> comm;     // size in message elements
    std::vector<Measurement> overhead; // size in tensor elements
};

// CSV with header "kind,size,time"; kind is comp, comm or overhead. Blank
// lines and lines starting with '#' are skipped.
MeasurementTable read_measurement_csv(const std::string& path);

// Flat key=value file with '#' comment lines. All seven keys are required
// exactly once: alpha, beta, c, d, gamma, w, e.
CostCoefficients read_coefficients_file(const std::string& path);
void write_coefficients_file(const std::string& path, const CostCoefficients& k,
                             const std::vector<std::string>& comments);

} // namespace actcomp
