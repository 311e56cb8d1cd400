// errors.hpp — Exception taxonomy and process exit codes

#pragma once

#include <stdexcept>
#include <string>

namespace qcce {

// User-facing input problems: bad config files, invalid spins, shape
// mismatches, coincident positions, infeasible bath packing, unknown
// scenario names. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidSpinError : ConfigError {
    explicit InvalidSpinError(const std::string& msg) : ConfigError(msg) {}
};

struct ShapeError : ConfigError {
    explicit ShapeError(const std::string& msg) : ConfigError(msg) {}
};

struct SingularityError : ConfigError {
    explicit SingularityError(const std::string& msg) : ConfigError(msg) {}
};

struct GenerationError : ConfigError {
    explicit GenerationError(const std::string& msg) : ConfigError(msg) {}
};

struct ClusterClosureError : ConfigError {
    explicit ClusterClosureError(const std::string& msg) : ConfigError(msg) {}
};

// A requested eigenstate pair is too close in energy for the perturbative
// construction to be trusted, and the caller did not exclude it. CLI exit
// code 3.
struct SwValidityError : std::runtime_error {
    explicit SwValidityError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical contract was violated: non-Hermitian input to the eigensolver,
// non-unitary propagator, assembly producing a non-Hermitian Hamiltonian,
// quadrature failing to converge, or a coherence trace leaving the unit
// disk. CLI exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int sw_validity = 3;
inline constexpr int numerical = 4;
} // namespace exit_code

} // namespace qcce
