#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace actcomp {

// Failure taxonomy shared by the library and the CLI. Every error carries a
// short machine-parsable code; the CLI prints "error: <code> <text>" on one
// line and exits nonzero.
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Shape/extent mismatches and rank violations.
struct dimension_error : error {
    explicit dimension_error(const std::string& m) : error("E_DIM", m) {}
};

// Out-of-range or mutually inconsistent parameter values.
struct parameter_error : error {
    explicit parameter_error(const std::string& m) : error("E_PARAM", m) {}
};

// Parallel-plan constraints (divisibility, worker counts).
struct plan_error : error {
    explicit plan_error(const std::string& m) : error("E_PLAN", m) {}
};

// Stateful-protocol misuse (e.g. error-feedback state shape drift).
struct state_error : error {
    explicit state_error(const std::string& m) : error("E_STATE", m) {}
};

// Optimizer divergence and other training failures.
struct training_error : error {
    explicit training_error(const std::string& m) : error("E_TRAIN", m) {}
};

// Config/report/serialization format violations.
struct parse_error : error {
    explicit parse_error(const std::string& m) : error("E_PARSE", m) {}
};

// Filesystem and stream failures.
struct io_error : error {
    explicit io_error(const std::string& m) : error("E_IO", m) {}
};

} // namespace actcomp
