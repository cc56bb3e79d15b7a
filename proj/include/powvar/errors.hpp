#pragma once

#include <stdexcept>
#include <string>

namespace powvar {

// Error taxonomy mirrored by the CLI exit codes: domain/size errors exit 2,
// numerical errors exit 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct domain_error : error {
    using error::error;
};

// Problem size exceeds a configured cap (e.g. dense factorization).
struct size_error : domain_error {
    using domain_error::domain_error;
};

struct numerical_error : error {
    using error::error;
};

// Quadrature failed to reach the requested tolerance; carries the best value.
struct accuracy_error : numerical_error {
    accuracy_error(const std::string& msg, double best, double err)
        : numerical_error(msg), best_value(best), est_error(err) {}
    double best_value;
    double est_error;
};

// A data-dependent failure (e.g. zero quadratic sum in a theta estimator).
struct degenerate_sample_error : numerical_error {
    using numerical_error::numerical_error;
};

}  // namespace powvar
