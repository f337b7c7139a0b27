#pragma once

#include <stdexcept>
#include <string>

namespace actoreg {

// Error taxonomy shared by every module. The CLI maps these to exit codes:
// config_error -> 2, numeric_error -> 3, io_error -> 4.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not conform (matmul inner dims, broadcast mismatch, ...).
struct shape_error : error {
    explicit shape_error(const std::string& msg) : error(msg) {}
};

// Non-finite value or domain violation; the message names the producing op.
struct numeric_error : error {
    explicit numeric_error(const std::string& msg) : error(msg) {}
};

// API misuse (e.g. backward on a non-scalar loss).
struct contract_error : error {
    explicit contract_error(const std::string& msg) : error(msg) {}
};

// Invalid configuration value or unknown key.
struct config_error : error {
    explicit config_error(const std::string& msg) : error(msg) {}
};

// File format or filesystem failure.
struct io_error : error {
    explicit io_error(const std::string& msg) : error(msg) {}
};

}  // namespace actoreg
