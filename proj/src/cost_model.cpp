#include "actcomp/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace actcomp {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

double through_origin_slope(const std::vector<Measurement>& pts, size_t begin, size_t end) {
    double sxy = 0.0, sxx = 0.0;
    for (size_t i = begin; i < end; ++i) {
        sxy += pts[i].size * pts[i].time;
        sxx += pts[i].size * pts[i].size;
    }
    if (sxx == 0.0) {
        throw parameter_error("fit: slope undefined, all sizes are zero");
    }
    return sxy / sxx;
}

} // namespace

void CostCoefficients::validate() const {
    if (!finite_nonneg(alpha) || !finite_nonneg(beta) || !finite_nonneg(c) ||
        !finite_nonneg(gamma) || !finite_nonneg(w) || !finite_nonneg(e) ||
        !std::isfinite(d)) {
        throw parameter_error("cost coefficients must be finite and non-negative");
    }
    if (d < 1.0) throw parameter_error("cost coefficient d must be at least 1");
    if (w <= 0.0 || e <= 0.0) {
        throw parameter_error("cost coefficients w and e must be positive");
    }
}

bool comm_monotone(const CostCoefficients& k) { return k.beta * k.d >= k.c; }

double flops_per_layer(double batch, double seq, double hidden) {
    if (batch <= 0.0 || seq <= 0.0 || hidden <= 0.0) {
        throw parameter_error("flops_per_layer: dimensions must be positive");
    }
    return 96.0 * batch * seq * hidden * hidden + 16.0 * batch * seq * seq * hidden;
}

double t_comm(double msg_elems, const CostCoefficients& k) {
    if (msg_elems < 0.0) throw parameter_error("t_comm: negative message size");
    return msg_elems < k.d ? k.c : k.beta * msg_elems;
}

double layer_time(double batch, double seq, double hidden, const CostCoefficients& k) {
    return k.alpha * flops_per_layer(batch, seq, hidden) + t_comm(batch * seq * hidden, k);
}

double layer_time_ae(double batch, double seq, double hidden, const CostCoefficients& k) {
    return k.alpha * flops_per_layer(batch, seq, hidden) + t_comm(batch * seq * k.e, k) +
           k.gamma * batch * seq * hidden;
}

double speedup_single_node(double batch, double seq, double hidden,
                           const CostCoefficients& k) {
    return layer_time(batch, seq, hidden, k) / layer_time_ae(batch, seq, hidden, k);
}

void ScalingRow::validate() const {
    if (h <= 0.0 || L <= 0.0 || n <= 0.0 || B <= 0.0 || m <= 0.0 || s <= 0.0) {
        throw parameter_error("scaling row: h, L, n, B, m, s must all be positive");
    }
}

double pipeline_time(double stages, double micro_batches, double stage_time,
                     double hop_time) {
    if (stages < 1.0 || micro_batches < 1.0) {
        throw parameter_error("pipeline_time: stages and micro_batches must be >= 1");
    }
    return (micro_batches + stages - 1.0) * stage_time + (stages - 1.0) * hop_time;
}

double cluster_time(const ScalingRow& row, const CostCoefficients& k, bool compressed) {
    row.validate();
    double micro = row.B / row.m;
    double per_layer = compressed ? layer_time_ae(micro, row.s, row.h, k)
                                  : layer_time(micro, row.s, row.h, k);
    double hop_elems = micro * row.s * (compressed ? k.e : row.h);
    return pipeline_time(row.n, row.m, row.L * per_layer / row.n, hop_elems / k.w);
}

double cluster_speedup(const ScalingRow& row, const CostCoefficients& k) {
    row.validate();
    if (row.n == 1.0) {
        return speedup_single_node(row.B / row.m, row.s, row.h, k);
    }
    return cluster_time(row, k, false) / cluster_time(row, k, true);
}

std::vector<ScalingRow> weak_scaling_table(const std::vector<ScalingCase>& cases,
                                           const CostCoefficients& k,
                                           double micro_batch_size, double seq) {
    if (micro_batch_size <= 0.0) {
        throw parameter_error("weak_scaling_table: micro_batch_size must be positive");
    }
    std::vector<ScalingRow> rows;
    rows.reserve(cases.size());
    for (const ScalingCase& cs : cases) {
        ScalingRow row;
        row.h = cs.h;
        row.L = cs.L;
        row.n = cs.n;
        row.B = cs.B;
        row.s = seq;
        row.m = cs.B / micro_batch_size;
        if (row.m != std::floor(row.m) || row.m < 1.0) {
            throw parameter_error("weak_scaling_table: batch " + std::to_string(cs.B) +
                                  " is not a multiple of the micro-batch size");
        }
        row.speedup = cluster_speedup(row, k);
        rows.push_back(row);
    }
    return rows;
}

AlphaFit fit_alpha(const std::vector<Measurement>& points) {
    if (points.empty()) throw parameter_error("fit_alpha: no measurements");
    AlphaFit fit;
    fit.implied.reserve(points.size());
    size_t best = 0;
    for (size_t i = 0; i < points.size(); ++i) {
        if (points[i].size <= 0.0) {
            throw parameter_error("fit_alpha: FLOPs must be positive");
        }
        fit.implied.push_back(points[i].time / points[i].size);
        if (points[i].size > points[best].size) best = i;
    }
    fit.alpha = fit.implied[best];
    return fit;
}

CommFit fit_comm_piecewise(const std::vector<Measurement>& points) {
    if (points.size() < 4) {
        throw parameter_error("fit_comm_piecewise: need at least 4 measurements");
    }
    std::vector<Measurement> pts = points;
    std::sort(pts.begin(), pts.end(),
              [](const Measurement& a, const Measurement& b) { return a.size < b.size; });

    // Candidate thresholds: every distinct measured size (points below the
    // candidate are the constant regime) plus a sentinel past the largest
    // size, which puts everything in the constant regime.
    std::vector<double> candidates;
    for (const Measurement& p : pts) {
        if (candidates.empty() || candidates.back() != p.size) candidates.push_back(p.size);
    }
    candidates.push_back(pts.back().size + 1.0);

    CommFit best;
    best.sse = std::numeric_limits<double>::infinity();
    for (double cand : candidates) {
        size_t split = 0;
        while (split < pts.size() && pts[split].size < cand) ++split;

        // A regime holding exactly one point would be fit perfectly no matter
        // what the data says; such splits are unfalsifiable and skipped. Empty
        // regimes stay allowed (they are the honest single-regime outcomes).
        if (split == 1 || split + 1 == pts.size()) continue;

        CommFit fit;
        fit.d = cand;
        fit.has_constant = split > 0;
        fit.has_linear = split < pts.size();
        fit.single_regime = !(fit.has_constant && fit.has_linear);
        if (fit.has_constant) {
            double sum = 0.0;
            for (size_t i = 0; i < split; ++i) sum += pts[i].time;
            fit.c = sum / static_cast<double>(split);
            for (size_t i = 0; i < split; ++i) {
                double r = pts[i].time - fit.c;
                fit.sse += r * r;
            }
        }
        if (fit.has_linear) {
            fit.beta = through_origin_slope(pts, split, pts.size());
            for (size_t i = split; i < pts.size(); ++i) {
                double r = pts[i].time - fit.beta * pts[i].size;
                fit.sse += r * r;
            }
        }
        if (fit.sse < best.sse) best = fit;
    }
    return best;
}

double fit_gamma(const std::vector<Measurement>& points) {
    if (points.size() < 2) throw parameter_error("fit_gamma: need at least 2 measurements");
    return through_origin_slope(points, 0, points.size());
}

MeasurementTable read_measurement_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open measurement file: " + path);

    MeasurementTable table;
    std::string line;
    size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "kind,size,time") {
                throw parse_error(path + ":" + std::to_string(line_no) +
                                  ": expected header 'kind,size,time'");
            }
            saw_header = true;
            continue;
        }
        std::istringstream fields(line);
        std::string kind, size_s, time_s;
        if (!std::getline(fields, kind, ',') || !std::getline(fields, size_s, ',') ||
            !std::getline(fields, time_s)) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": expected 3 comma-separated fields");
        }
        Measurement m;
        try {
            size_t used = 0;
            m.size = std::stod(size_s, &used);
            if (used != size_s.size()) throw std::invalid_argument(size_s);
            m.time = std::stod(time_s, &used);
            if (used != time_s.size()) throw std::invalid_argument(time_s);
        } catch (const std::exception&) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": size and time must be numbers");
        }
        if (!std::isfinite(m.size) || !std::isfinite(m.time)) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": size and time must be finite");
        }
        if (kind == "comp") {
            table.comp.push_back(m);
        } else if (kind == "comm") {
            table.comm.push_back(m);
        } else if (kind == "overhead") {
            table.overhead.push_back(m);
        } else {
            throw parse_error(path + ":" + std::to_string(line_no) + ": unknown kind '" +
                              kind + "' (expected comp, comm or overhead)");
        }
    }
    if (!saw_header) throw parse_error(path + ": empty measurement file");
    return table;
}

CostCoefficients read_coefficients_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open coefficients file: " + path);

    std::map<std::string, double> values;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t");
            size_t e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (values.count(key)) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        }
        try {
            size_t used = 0;
            values[key] = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
        } catch (const std::exception&) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": value of '" + key +
                              "' is not a number");
        }
    }

    const char* required[] = {"alpha", "beta", "c", "d", "gamma", "w", "e"};
    for (const char* key : required) {
        if (!values.count(key)) {
            throw parse_error(path + ": missing coefficient '" + std::string(key) + "'");
        }
    }
    for (const auto& [key, value] : values) {
        (void)value;
        bool known = false;
        for (const char* k : required) known = known || key == k;
        if (!known) throw parse_error(path + ": unknown coefficient '" + key + "'");
    }

    CostCoefficients k;
    k.alpha = values["alpha"];
    k.beta = values["beta"];
    k.c = values["c"];
    k.d = values["d"];
    k.gamma = values["gamma"];
    k.w = values["w"];
    k.e = values["e"];
    k.validate();
    return k;
}

void write_coefficients_file(const std::string& path, const CostCoefficients& k,
                             const std::vector<std::string>& comments) {
    k.validate();
    std::ofstream out(path);
    if (!out) throw io_error("cannot write coefficients file: " + path);
    for (const std::string& c : comments) out << "# " << c << "\n";
    char buf[64];
    auto emit = [&](const char* key, double value) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out << key << " = " << buf << "\n";
    };
    emit("alpha", k.alpha);
    emit("beta", k.beta);
    emit("c", k.c);
    emit("d", k.d);
    emit("gamma", k.gamma);
    emit("w", k.w);
    emit("e", k.e);
    if (!out) throw io_error("write failed: " + path);
}

} // namespace actcomp
