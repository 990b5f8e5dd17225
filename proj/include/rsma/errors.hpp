#pragma once

#include <stdexcept>
#include <string>

namespace rsma {

// Scalar input outside a function's mathematical domain (x <= 0, p outside (0,1), ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Structural misuse: dimension mismatches, broken type invariants, out-of-range indices.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Requested common-rate shares exceed what the common stream can carry.
// `user` is the index whose decoding bound is violated.
struct AllocationError : std::runtime_error {
    int user;
    AllocationError(const std::string& msg, int user_index)
        : std::runtime_error(msg), user(user_index) {}
};

// Stacked CSIT matrix is (numerically) rank deficient; ZF directions undefined.
struct DegenerateChannelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A combination the model does not cover (e.g. NOMA with K != 2, t_opt with DK rounding to <= 1).
struct UnsupportedConfiguration : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Experiment configuration rejected during validation; message names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rsma
