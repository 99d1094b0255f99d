#include "actcomp/report.hpp"

#include <functional>
#include <map>
#include <set>
#include <vector>

namespace actcomp {

namespace {

using Checker = std::function<void(const ordered_json&, const std::string&)>;

void expect_string(const ordered_json& v, const std::string& path) {
    if (!v.is_string()) throw parse_error("report: " + path + " must be a string");
}

void expect_unsigned(const ordered_json& v, const std::string& path) {
    if (!v.is_number_unsigned()) {
        throw parse_error("report: " + path + " must be a non-negative integer");
    }
}

void expect_number(const ordered_json& v, const std::string& path) {
    if (!v.is_number()) throw parse_error("report: " + path + " must be a number");
}

void expect_bool(const ordered_json& v, const std::string& path) {
    if (!v.is_boolean()) throw parse_error("report: " + path + " must be a boolean");
}

void expect_number_array(const ordered_json& v, const std::string& path) {
    if (!v.is_array()) throw parse_error("report: " + path + " must be an array");
    for (size_t i = 0; i < v.size(); ++i) {
        expect_number(v[i], path + "[" + std::to_string(i) + "]");
    }
}

// Checks one JSON object: every listed field present with its type, nothing
// else.
void expect_object(const ordered_json& v, const std::string& path,
                   const std::vector<std::pair<std::string, Checker>>& fields) {
    if (!v.is_object()) throw parse_error("report: " + path + " must be an object");
    std::set<std::string> known;
    for (const auto& [name, check] : fields) {
        known.insert(name);
        auto it = v.find(name);
        if (it == v.end()) {
            throw parse_error("report: " + path + " is missing field '" + name + "'");
        }
        check(*it, path + "." + name);
    }
    for (const auto& [name, value] : v.items()) {
        (void)value;
        if (!known.count(name)) {
            throw parse_error("report: unknown field " + path + "." + name);
        }
    }
}

void expect_object_array(const ordered_json& v, const std::string& path,
                         const std::vector<std::pair<std::string, Checker>>& fields) {
    if (!v.is_array()) throw parse_error("report: " + path + " must be an array");
    for (size_t i = 0; i < v.size(); ++i) {
        expect_object(v[i], path + "[" + std::to_string(i) + "]", fields);
    }
}

const std::vector<std::pair<std::string, Checker>>& site_common() {
    static const std::vector<std::pair<std::string, Checker>> fields = {
        {"site", expect_string},         {"layer", expect_unsigned},
        {"boundary", expect_unsigned},   {"micro_batch", expect_unsigned},
        {"compressed", expect_bool},
    };
    return fields;
}

void check_fidelity(const ordered_json& v, const std::string& path) {
    auto fields = site_common();
    fields.push_back({"max_abs_err", expect_number});
    fields.push_back({"rel_err", expect_number});
    expect_object_array(v, path, fields);
}

void check_bytes(const ordered_json& v, const std::string& path) {
    auto fields = site_common();
    fields.push_back({"forward", expect_unsigned});
    fields.push_back({"backward", expect_unsigned});
    fields.push_back({"baseline_forward", expect_unsigned});
    fields.push_back({"baseline_backward", expect_unsigned});
    expect_object_array(v, path, fields);
}

void check_predictions(const ordered_json& v, const std::string& path) {
    expect_object(v, path,
                  {
                      {"micro_batch", expect_number},
                      {"layer_time", expect_number},
                      {"layer_time_ae", expect_number},
                      {"speedup_single_node", expect_number},
                      {"scaling",
                       [](const ordered_json& s, const std::string& p) {
                           expect_object_array(s, p,
                                               {
                                                   {"h", expect_number},
                                                   {"L", expect_number},
                                                   {"n", expect_number},
                                                   {"B", expect_number},
                                                   {"m", expect_number},
                                                   {"s", expect_number},
                                                   {"speedup", expect_number},
                                               });
                       }},
                  });
}

void check_fit(const ordered_json& v, const std::string& path) {
    expect_object(v, path,
                  {
                      {"alpha", expect_number},
                      {"implied_alpha", expect_number_array},
                      {"beta", expect_number},
                      {"c", expect_number},
                      {"d", expect_number},
                      {"comm_single_regime", expect_bool},
                      {"gamma", expect_number},
                      {"w", expect_number},
                      {"e", expect_number},
                      {"comm_monotone", expect_bool},
                  });
}

void check_timings(const ordered_json& v, const std::string& path) {
    expect_object(v, path,
                  {
                      {"codec", expect_string},
                      {"repetitions", expect_unsigned},
                      {"encode_ms", expect_number_array},
                      {"decode_ms", expect_number_array},
                      {"encode_median_ms", expect_number},
                      {"decode_median_ms", expect_number},
                  });
}

void check_spectrum(const ordered_json& v, const std::string& path) {
    expect_object(v, path,
                  {
                      {"rows", expect_unsigned},
                      {"cols", expect_unsigned},
                      {"singular_values", expect_number_array},
                      {"cumulative_mass", expect_number_array},
                  });
}

} // namespace

void validate_report(const ordered_json& report) {
    if (!report.is_object()) throw parse_error("report: top level must be an object");

    static const std::map<std::string, std::vector<std::pair<std::string, Checker>>>
        mode_blocks = {
            {"simulate", {{"fidelity", check_fidelity}, {"bytes", check_bytes}}},
            {"predict", {{"predictions", check_predictions}}},
            {"fit", {{"fit", check_fit}}},
            {"bench", {{"timings", check_timings}}},
            {"spectrum", {{"spectrum", check_spectrum}}},
        };

    auto schema = report.find("schema");
    if (schema == report.end() || !schema->is_string()) {
        throw parse_error("report: missing schema identifier");
    }
    if (schema->get<std::string>() != kReportSchema) {
        throw parse_error("report: unsupported schema '" + schema->get<std::string>() +
                          "' (expected " + kReportSchema + ")");
    }
    auto mode = report.find("mode");
    if (mode == report.end() || !mode->is_string() ||
        !mode_blocks.count(mode->get<std::string>())) {
        throw parse_error("report: missing or unknown mode");
    }

    std::vector<std::pair<std::string, Checker>> fields = {
        {"schema", expect_string},
        {"mode", expect_string},
        {"provenance",
         [](const ordered_json& v, const std::string& p) {
             expect_object(v, p,
                           {
                               {"seed", expect_unsigned},
                               {"version", expect_string},
                               {"coefficients", expect_string},
                           });
         }},
        {"config", expect_string},
    };
    for (const auto& block : mode_blocks.at(mode->get<std::string>())) {
        fields.push_back(block);
    }
    expect_object(report, "report", fields);
}

ordered_json parse_report(const std::string& text) {
    ordered_json report;
    try {
        report = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("report: invalid JSON: " + std::string(e.what()));
    }
    validate_report(report);
    return report;
}

std::string dump_report(const ordered_json& report) { return report.dump(2) + "\n"; }

} // namespace actcomp
