#pragma once

#include <stdexcept>
#include <string>

namespace orca {

// Error taxonomy maps onto the CLI exit codes:
//   config_error -> 2, validation_error -> 3, divergence_error -> 4,
//   fit_error -> 5.

struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

struct divergence_error : std::runtime_error {
    double tau_ns; // co-moving time at which the state stopped being finite
    divergence_error(const std::string& what, double tau)
        : std::runtime_error(what), tau_ns(tau) {}
};

struct fit_error : std::runtime_error {
    explicit fit_error(const std::string& what) : std::runtime_error(what) {}
};

// requested record data (snapshot, window) that was never captured
struct lookup_error : std::runtime_error {
    explicit lookup_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace orca
