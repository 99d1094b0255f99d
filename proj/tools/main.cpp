#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "actcomp/config.hpp"
#include "actcomp/errors.hpp"
#include "actcomp/runner.hpp"

namespace {

// ACTCOMP_LOG=info|debug turns on progress lines on stderr; anything else
// (or unset) keeps the tool quiet apart from warnings and errors.
int log_level() {
    const char* v = std::getenv("ACTCOMP_LOG");
    if (v == nullptr) return 0;
    std::string s = v;
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[actcomp] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[actcomp] " << msg << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"activation compression: desk-scale model-parallel simulation "
                 "and performance prediction"};
    app.require_subcommand(1);

    std::string config_path;
    std::string coeffs_path;
    std::string out_path;
    std::string trace_path;
    uint64_t seed = 0;

    const struct {
        const char* name;
        const char* help;
    } modes[] = {
        {"simulate", "run the functional parallel forward pass with compression hooks"},
        {"predict", "evaluate the analytical time model and weak-scaling speedups"},
        {"fit", "fit cost coefficients from a measurement CSV"},
        {"bench", "measure host encode/decode wall time for the configured codec"},
        {"spectrum", "compute the singular spectrum of a matrix"},
    };
    for (const auto& mode : modes) {
        CLI::App* sub = app.add_subcommand(mode.name, mode.help);
        sub->add_option("--config", config_path, "experiment config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--coeffs", coeffs_path,
                        "cost coefficients file (predict mode; overrides the config)");
        sub->add_option("--seed", seed, "override the run seed (and the codec seed)");
        sub->add_option("--out", out_path, "report path (overrides the config)");
        sub->add_option("--trace", trace_path,
                        "write the pipeline timeline here (simulate mode)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        actcomp::RunMode mode = actcomp::run_mode_from_string(sub->get_name());
        log_debug("reading config " + config_path);
        actcomp::ExperimentSpec spec = actcomp::read_config_file(config_path);
        if (spec.mode != mode) {
            throw actcomp::parse_error("config mode '" + to_string(spec.mode) +
                                       "' does not match subcommand '" + sub->get_name() +
                                       "'");
        }
        if (sub->count("--seed") > 0) {
            spec.seed = seed;
            spec.placement.spec.seed = seed;
        }
        if (!coeffs_path.empty()) {
            if (mode != actcomp::RunMode::predict) {
                throw actcomp::parameter_error("--coeffs is only used in predict mode");
            }
            spec.has_coeffs = true;
            spec.coeffs_file = coeffs_path;
            spec.coeffs = actcomp::CostCoefficients{};
        }
        if (!out_path.empty()) spec.output = out_path;

        log_info("running " + to_string(mode) + " (seed " + std::to_string(spec.seed) +
                 ")");
        actcomp::run_and_write(spec, trace_path);
        if (!spec.output.empty()) log_info("report written to " + spec.output);
        if (!trace_path.empty()) log_info("trace written to " + trace_path);
        return 0;
    } catch (const actcomp::error& e) {
        std::cerr << "error: " << e.code() << " " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: E_INTERNAL " << e.what() << "\n";
        return 1;
    }
}
