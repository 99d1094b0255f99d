#pragma once

#include <string>

#include "json.hpp"

#include "actcomp/errors.hpp"

namespace actcomp {

// Reports keep key insertion order so identical runs serialize to identical
// bytes.
using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "actcomp-report-v1";
inline constexpr const char* kToolVersion = "0.1.0";

// Checks a report against the schema: required common fields (schema, mode,
// provenance, config), exactly the blocks of its mode, exhaustively known
// field names and types. Violations raise parse_error naming the field;
// unknown fields are rejected.
void validate_report(const ordered_json& report);

// Parses JSON text and validates it.
ordered_json parse_report(const std::string& text);

// Canonical serialization: 2-space indent, trailing newline.
std::string dump_report(const ordered_json& report);

} // namespace actcomp
