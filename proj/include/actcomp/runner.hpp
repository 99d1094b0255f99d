#pragma once

#include <string>

#include "actcomp/config.hpp"
#include "actcomp/report.hpp"

namespace actcomp {

// Executes one experiment and returns its validated report. simulate,
// predict, fit and spectrum runs are pure functions of the spec (and any
// files it names); bench additionally measures host wall time. trace_path,
// when non-empty, writes the pipeline timeline of a simulate run and is an
// error in any other mode. Failures are rethrown with the mode name
// prefixed, keeping their error codes.
ordered_json run(const ExperimentSpec& spec, const std::string& trace_path = {});

// run() plus serialization: writes to spec.output, or stdout when empty.
// Returns the serialized report text.
std::string run_and_write(const ExperimentSpec& spec, const std::string& trace_path = {});

} // namespace actcomp
