#include "actcomp/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "actcomp/compress.hpp"
#include "actcomp/presets.hpp"

namespace actcomp {

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::simulate: return "simulate";
        case RunMode::predict: return "predict";
        case RunMode::fit: return "fit";
        case RunMode::bench: return "bench";
        case RunMode::spectrum: return "spectrum";
    }
    return "simulate";
}

RunMode run_mode_from_string(const std::string& s) {
    if (s == "simulate") return RunMode::simulate;
    if (s == "predict") return RunMode::predict;
    if (s == "fit") return RunMode::fit;
    if (s == "bench") return RunMode::bench;
    if (s == "spectrum") return RunMode::spectrum;
    throw parse_error("unknown mode '" + s +
                      "' (expected simulate, predict, fit, bench or spectrum)");
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Raw config text split into sections of (key, value) pairs, with duplicate
// detection. The top level is the section with the empty name.
struct RawConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section) const { return sections.count(section) != 0; }

    const std::string* find(const std::string& section, const std::string& key) const {
        auto s = sections.find(section);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }
};

std::string key_path(const std::string& section, const std::string& key) {
    return section.empty() ? key : "[" + section + "] " + key;
}

RawConfig split_sections(const std::string& text) {
    RawConfig raw;
    raw.sections[""];
    std::istringstream in(text);
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw parse_error("config line " + std::to_string(line_no) +
                                  ": malformed section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (raw.sections.count(section)) {
                throw parse_error("config line " + std::to_string(line_no) +
                                  ": duplicate section [" + section + "]");
            }
            raw.sections[section];
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw parse_error("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw parse_error("config line " + std::to_string(line_no) + ": empty key");
        }
        if (value.empty()) {
            throw parse_error("config line " + std::to_string(line_no) + ": key '" + key +
                              "' has no value");
        }
        if (raw.sections[section].count(key)) {
            throw parse_error("config line " + std::to_string(line_no) + ": duplicate key " +
                              key_path(section, key));
        }
        raw.sections[section][key] = value;
    }
    return raw;
}

// Tracks which keys of a section were consumed so leftovers can be reported.
class SectionReader {
  public:
    SectionReader(const RawConfig& raw, std::string section)
        : raw_(raw), section_(std::move(section)) {}

    const std::string* find(const std::string& key) {
        used_.insert(key);
        return raw_.find(section_, key);
    }

    bool has(const std::string& key) { return find(key) != nullptr; }

    std::string get_string(const std::string& key, const std::string& fallback = {}) {
        const std::string* v = find(key);
        return v ? *v : fallback;
    }

    std::string require_string(const std::string& key) {
        const std::string* v = find(key);
        if (!v) throw parse_error("config: missing " + key_path(section_, key));
        return *v;
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) {
        const std::string* v = find(key);
        if (!v) return fallback;
        try {
            size_t used = 0;
            unsigned long long parsed = std::stoull(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return parsed;
        } catch (const std::exception&) {
            throw parse_error("config: " + key_path(section_, key) +
                              ": expected a non-negative integer, got '" + *v + "'");
        }
    }

    size_t get_size(const std::string& key, size_t fallback) {
        return static_cast<size_t>(get_u64(key, fallback));
    }

    double get_double(const std::string& key, double fallback) {
        const std::string* v = find(key);
        if (!v) return fallback;
        return parse_double(key, *v);
    }

    double require_double(const std::string& key) {
        return parse_double(key, require_string(key));
    }

    bool get_bool(const std::string& key, bool fallback) {
        const std::string* v = find(key);
        if (!v) return fallback;
        if (*v == "true") return true;
        if (*v == "false") return false;
        throw parse_error("config: " + key_path(section_, key) +
                          ": expected true or false, got '" + *v + "'");
    }

    void reject(const std::string& key, const std::string& why) {
        if (find(key)) {
            throw parse_error("config: " + key_path(section_, key) + ": " + why);
        }
    }

    // Every key of the section must have been consumed by now.
    void finish() {
        auto s = raw_.sections.find(section_);
        if (s == raw_.sections.end()) return;
        for (const auto& [key, value] : s->second) {
            (void)value;
            if (!used_.count(key)) {
                throw parse_error("config: unknown key " + key_path(section_, key));
            }
        }
    }

  private:
    double parse_double(const std::string& key, const std::string& v) {
        try {
            size_t used = 0;
            double parsed = std::stod(v, &used);
            if (used != v.size() || !std::isfinite(parsed)) throw std::invalid_argument(v);
            return parsed;
        } catch (const std::exception&) {
            throw parse_error("config: " + key_path(section_, key) +
                              ": expected a finite number, got '" + v + "'");
        }
    }

    const RawConfig& raw_;
    std::string section_;
    std::set<std::string> used_;
};

std::vector<ScalingCase> parse_scaling_rows(const std::string& value) {
    std::vector<ScalingCase> rows;
    std::istringstream in(value);
    std::string tuple;
    while (in >> tuple) {
        ScalingCase cs;
        double* fields[4] = {&cs.h, &cs.L, &cs.n, &cs.B};
        size_t pos = 0;
        for (int f = 0; f < 4; ++f) {
            size_t next = f == 3 ? tuple.size() : tuple.find(':', pos);
            if (next == std::string::npos) {
                throw parse_error("config: [predict] rows: expected h:L:n:B, got '" + tuple +
                                  "'");
            }
            std::string field = tuple.substr(pos, next - pos);
            try {
                size_t used = 0;
                *fields[f] = std::stod(field, &used);
                if (used != field.size()) throw std::invalid_argument(field);
            } catch (const std::exception&) {
                throw parse_error("config: [predict] rows: '" + field +
                                  "' is not a number in '" + tuple + "'");
            }
            pos = next + 1;
        }
        if (pos <= tuple.size() && tuple.find(':', pos) != std::string::npos) {
            throw parse_error("config: [predict] rows: too many fields in '" + tuple + "'");
        }
        rows.push_back(cs);
    }
    if (rows.empty()) {
        throw parse_error("config: [predict] rows: no h:L:n:B tuples given");
    }
    return rows;
}

ModelConfig parse_model(const RawConfig& raw) {
    SectionReader sec(raw, "model");
    ModelConfig m;
    m.layers = sec.get_size("layers", 0);
    m.hidden = sec.get_size("hidden", 0);
    m.heads = sec.get_size("heads", 0);
    m.seq = sec.get_size("seq", 0);
    m.batch = sec.get_size("batch", 0);
    // The vocabulary size never enters the simulated forward pass; 1 is an
    // explicit "not modeled" placeholder.
    m.vocab = sec.get_size("vocab", 1);
    sec.finish();
    try {
        m.validate();
    } catch (const error& e) {
        throw parse_error("config: [model]: " + std::string(e.what()));
    }
    return m;
}

ParallelPlan parse_plan(const RawConfig& raw, const ModelConfig& model) {
    SectionReader sec(raw, "plan");
    ParallelPlan p;
    p.tp = sec.get_size("tp", 1);
    p.pp = sec.get_size("pp", 1);
    p.micro_batches = sec.get_size("micro_batches", 1);
    sec.finish();
    try {
        p.validate(model);
    } catch (const error& e) {
        throw parse_error("config: [plan]: " + std::string(e.what()));
    }
    return p;
}

void parse_compression(const RawConfig& raw, const ModelConfig& model, uint64_t run_seed,
                       ExperimentSpec& spec) {
    SectionReader sec(raw, "compression");
    spec.has_compression = true;

    CompressionPlacement& pl = spec.placement;
    pl.layer_lo = sec.get_size("layer_lo", model.layers / 2);
    pl.layer_hi = sec.get_size("layer_hi", model.layers - 1);
    pl.at_tp_collective = sec.get_bool("at_tp_collective", true);
    pl.at_pp_boundary = sec.get_bool("at_pp_boundary", true);
    pl.error_feedback = sec.get_bool("error_feedback", false);

    spec.ae_hyper.lr = sec.get_double("ae_lr", spec.ae_hyper.lr);
    spec.ae_hyper.epochs = sec.get_size("ae_epochs", spec.ae_hyper.epochs);

    size_t value_bytes = sec.get_size("value_bytes", 2);
    size_t index_bytes = sec.get_size("index_bytes", 4);
    uint64_t codec_seed = sec.get_u64("seed", run_seed);

    if (sec.has("preset")) {
        std::string preset = sec.get_string("preset");
        for (const char* key : {"kind", "k", "bits", "code_dim", "group_len"}) {
            sec.reject(key, "the preset fully determines the codec; drop this key");
        }
        try {
            pl.spec = expand_preset(preset, model.hidden, value_bytes, index_bytes);
        } catch (const error& e) {
            throw parse_error("config: [compression] preset: " + std::string(e.what()));
        }
        spec.preset = preset;
    } else {
        CompressorSpec cs;
        std::string kind = sec.require_string("kind");
        try {
            cs.kind = compressor_kind_from_string(kind);
        } catch (const error& e) {
            throw parse_error("config: [compression] kind: " + std::string(e.what()));
        }
        cs.k = sec.get_size("k", 0);
        cs.bits = static_cast<int>(sec.get_size("bits", 0));
        cs.code_dim = sec.get_size("code_dim", 0);
        cs.group_len = sec.get_size("group_len", 0);
        cs.value_bytes = value_bytes;
        cs.index_bytes = index_bytes;
        pl.spec = cs;
    }
    pl.spec.seed = codec_seed;
    sec.finish();

    try {
        pl.validate(model);
    } catch (const error& e) {
        throw parse_error("config: [compression]: " + std::string(e.what()));
    }
}

void parse_coeffs(const RawConfig& raw, ExperimentSpec& spec) {
    SectionReader sec(raw, "coeffs");
    spec.has_coeffs = true;
    if (sec.has("file")) {
        for (const char* key : {"alpha", "beta", "c", "d", "gamma", "w", "e"}) {
            sec.reject(key, "give either a file or inline coefficients, not both");
        }
        spec.coeffs_file = sec.get_string("file");
        sec.finish();
        return;
    }
    CostCoefficients k;
    k.alpha = sec.require_double("alpha");
    k.beta = sec.require_double("beta");
    k.c = sec.require_double("c");
    k.d = sec.require_double("d");
    k.gamma = sec.require_double("gamma");
    k.w = sec.require_double("w");
    k.e = sec.require_double("e");
    sec.finish();
    try {
        k.validate();
    } catch (const error& e) {
        throw parse_error("config: [coeffs]: " + std::string(e.what()));
    }
    spec.coeffs = k;
}

void check_allowed_sections(const RawConfig& raw, RunMode mode) {
    static const std::map<RunMode, std::set<std::string>> allowed = {
        {RunMode::simulate, {"", "model", "plan", "compression"}},
        {RunMode::predict, {"", "model", "plan", "coeffs", "predict"}},
        {RunMode::fit, {"", "fit"}},
        {RunMode::bench, {"", "model", "compression", "bench"}},
        {RunMode::spectrum, {"", "spectrum"}},
    };
    const std::set<std::string>& ok = allowed.at(mode);
    for (const auto& [name, keys] : raw.sections) {
        (void)keys;
        if (!ok.count(name)) {
            throw parse_error("config: section [" + name + "] is not used in " +
                              to_string(mode) + " mode");
        }
    }
}

} // namespace

ExperimentSpec parse_config(const std::string& text) {
    RawConfig raw = split_sections(text);

    ExperimentSpec spec;
    SectionReader top(raw, "");
    spec.mode = run_mode_from_string(top.require_string("mode"));
    spec.seed = top.get_u64("seed", 0);
    spec.output = top.get_string("output");
    top.finish();

    check_allowed_sections(raw, spec.mode);

    switch (spec.mode) {
        case RunMode::simulate: {
            if (!raw.has("model")) {
                throw parse_error("config: simulate mode needs a [model] section");
            }
            spec.model = parse_model(raw);
            spec.plan = parse_plan(raw, spec.model);
            if (raw.has("compression")) {
                parse_compression(raw, spec.model, spec.seed, spec);
            }
            break;
        }
        case RunMode::predict: {
            if (!raw.has("model")) {
                throw parse_error("config: predict mode needs a [model] section");
            }
            if (!raw.has("coeffs")) {
                throw parse_error("config: predict mode needs a [coeffs] section");
            }
            spec.model = parse_model(raw);
            spec.plan = parse_plan(raw, spec.model);
            parse_coeffs(raw, spec);
            SectionReader sec(raw, "predict");
            spec.predict.micro_batch_size =
                sec.get_double("micro_batch_size", spec.predict.micro_batch_size);
            if (spec.predict.micro_batch_size <= 0.0) {
                throw parse_error("config: [predict] micro_batch_size must be positive");
            }
            if (sec.has("rows")) {
                spec.predict.rows = parse_scaling_rows(sec.get_string("rows"));
            }
            sec.finish();
            break;
        }
        case RunMode::fit: {
            SectionReader sec(raw, "fit");
            spec.fit.measurements = sec.require_string("measurements");
            spec.fit.w = sec.get_double("w", spec.fit.w);
            spec.fit.e = sec.get_double("e", spec.fit.e);
            spec.fit.out_coeffs = sec.get_string("out_coeffs");
            if (spec.fit.w <= 0.0 || spec.fit.e <= 0.0) {
                throw parse_error("config: [fit] w and e must be positive");
            }
            sec.finish();
            break;
        }
        case RunMode::bench: {
            if (!raw.has("model")) {
                throw parse_error("config: bench mode needs a [model] section");
            }
            spec.model = parse_model(raw);
            if (raw.has("compression")) {
                parse_compression(raw, spec.model, spec.seed, spec);
            }
            SectionReader sec(raw, "bench");
            spec.bench.repetitions = sec.get_size("repetitions", spec.bench.repetitions);
            if (spec.bench.repetitions == 0) {
                throw parse_error("config: [bench] repetitions must be at least 1");
            }
            sec.finish();
            break;
        }
        case RunMode::spectrum: {
            SectionReader sec(raw, "spectrum");
            spec.spectrum.source = sec.get_string("source", spec.spectrum.source);
            if (spec.spectrum.source == "file") {
                spec.spectrum.file = sec.require_string("file");
                for (const char* key : {"rows", "cols", "dist"}) {
                    sec.reject(key, "only valid with source = random");
                }
            } else if (spec.spectrum.source == "random") {
                sec.reject("file", "only valid with source = file");
                spec.spectrum.rows = sec.get_size("rows", spec.spectrum.rows);
                spec.spectrum.cols = sec.get_size("cols", spec.spectrum.cols);
                std::string dist = sec.get_string("dist", "gaussian");
                if (dist == "uniform") {
                    spec.spectrum.dist = Dist::uniform;
                } else if (dist == "gaussian") {
                    spec.spectrum.dist = Dist::gaussian;
                } else {
                    throw parse_error(
                        "config: [spectrum] dist: expected uniform or gaussian");
                }
                if (spec.spectrum.rows == 0 || spec.spectrum.cols == 0) {
                    throw parse_error("config: [spectrum] rows and cols must be positive");
                }
            } else {
                throw parse_error("config: [spectrum] source: expected random or file");
            }
            sec.finish();
            break;
        }
    }
    return spec;
}

ExperimentSpec read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s = buf;
    // Trim the mantissa when the short form is exact, so emitted configs stay
    // readable for round numbers.
    char probe[64];
    std::snprintf(probe, sizeof(probe), "%g", v);
    if (std::stod(probe) == v) s = probe;
    return s;
}

void emit_model(std::ostream& out, const ModelConfig& m) {
    out << "\n[model]\n";
    out << "layers = " << m.layers << "\n";
    out << "hidden = " << m.hidden << "\n";
    out << "heads = " << m.heads << "\n";
    out << "seq = " << m.seq << "\n";
    out << "batch = " << m.batch << "\n";
    out << "vocab = " << m.vocab << "\n";
}

void emit_plan(std::ostream& out, const ParallelPlan& p) {
    out << "\n[plan]\n";
    out << "tp = " << p.tp << "\n";
    out << "pp = " << p.pp << "\n";
    out << "micro_batches = " << p.micro_batches << "\n";
}

void emit_compression(std::ostream& out, const ExperimentSpec& spec) {
    const CompressionPlacement& pl = spec.placement;
    out << "\n[compression]\n";
    if (!spec.preset.empty()) {
        out << "preset = " << spec.preset << "\n";
    } else {
        out << "kind = " << to_string(pl.spec.kind) << "\n";
        switch (pl.spec.kind) {
            case CompressorKind::topk:
            case CompressorKind::randk: out << "k = " << pl.spec.k << "\n"; break;
            case CompressorKind::quant:
                out << "bits = " << pl.spec.bits << "\n";
                out << "group_len = " << pl.spec.group_len << "\n";
                break;
            case CompressorKind::ae: out << "code_dim = " << pl.spec.code_dim << "\n"; break;
            case CompressorKind::identity: break;
        }
    }
    out << "value_bytes = " << pl.spec.value_bytes << "\n";
    out << "index_bytes = " << pl.spec.index_bytes << "\n";
    out << "seed = " << pl.spec.seed << "\n";
    out << "layer_lo = " << pl.layer_lo << "\n";
    out << "layer_hi = " << pl.layer_hi << "\n";
    out << "at_tp_collective = " << (pl.at_tp_collective ? "true" : "false") << "\n";
    out << "at_pp_boundary = " << (pl.at_pp_boundary ? "true" : "false") << "\n";
    out << "error_feedback = " << (pl.error_feedback ? "true" : "false") << "\n";
    out << "ae_lr = " << format_double(spec.ae_hyper.lr) << "\n";
    out << "ae_epochs = " << spec.ae_hyper.epochs << "\n";
}

void emit_coeffs(std::ostream& out, const ExperimentSpec& spec) {
    out << "\n[coeffs]\n";
    if (!spec.coeffs_file.empty()) {
        out << "file = " << spec.coeffs_file << "\n";
        return;
    }
    const CostCoefficients& k = spec.coeffs;
    out << "alpha = " << format_double(k.alpha) << "\n";
    out << "beta = " << format_double(k.beta) << "\n";
    out << "c = " << format_double(k.c) << "\n";
    out << "d = " << format_double(k.d) << "\n";
    out << "gamma = " << format_double(k.gamma) << "\n";
    out << "w = " << format_double(k.w) << "\n";
    out << "e = " << format_double(k.e) << "\n";
}

} // namespace

std::string emit_config(const ExperimentSpec& spec) {
    std::ostringstream out;
    out << "mode = " << to_string(spec.mode) << "\n";
    out << "seed = " << spec.seed << "\n";
    if (!spec.output.empty()) out << "output = " << spec.output << "\n";

    switch (spec.mode) {
        case RunMode::simulate:
            emit_model(out, spec.model);
            emit_plan(out, spec.plan);
            if (spec.has_compression) emit_compression(out, spec);
            break;
        case RunMode::predict: {
            emit_model(out, spec.model);
            emit_plan(out, spec.plan);
            emit_coeffs(out, spec);
            out << "\n[predict]\n";
            out << "micro_batch_size = " << format_double(spec.predict.micro_batch_size)
                << "\n";
            if (!spec.predict.rows.empty()) {
                out << "rows =";
                for (const ScalingCase& cs : spec.predict.rows) {
                    out << " " << format_double(cs.h) << ":" << format_double(cs.L) << ":"
                        << format_double(cs.n) << ":" << format_double(cs.B);
                }
                out << "\n";
            }
            break;
        }
        case RunMode::fit:
            out << "\n[fit]\n";
            out << "measurements = " << spec.fit.measurements << "\n";
            out << "w = " << format_double(spec.fit.w) << "\n";
            out << "e = " << format_double(spec.fit.e) << "\n";
            if (!spec.fit.out_coeffs.empty()) {
                out << "out_coeffs = " << spec.fit.out_coeffs << "\n";
            }
            break;
        case RunMode::bench:
            emit_model(out, spec.model);
            if (spec.has_compression) emit_compression(out, spec);
            out << "\n[bench]\n";
            out << "repetitions = " << spec.bench.repetitions << "\n";
            break;
        case RunMode::spectrum:
            out << "\n[spectrum]\n";
            out << "source = " << spec.spectrum.source << "\n";
            if (spec.spectrum.source == "file") {
                out << "file = " << spec.spectrum.file << "\n";
            } else {
                out << "rows = " << spec.spectrum.rows << "\n";
                out << "cols = " << spec.spectrum.cols << "\n";
                out << "dist = "
                    << (spec.spectrum.dist == Dist::uniform ? "uniform" : "gaussian")
                    << "\n";
            }
            break;
    }
    return out.str();
}

} // namespace actcomp
