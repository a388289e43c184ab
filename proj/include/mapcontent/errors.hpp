#pragma once

#include <stdexcept>
#include <string>

namespace mapcontent {

/// Invalid argument to an operation (bad parameter value, empty input, ...).
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// A cube subdivision or lattice query exceeded the configured depth.
struct DepthError : std::runtime_error {
    explicit DepthError(const std::string& what) : std::runtime_error(what) {}
};

/// Unknown point id or query outside a restricted domain.
struct KeyError : std::runtime_error {
    explicit KeyError(const std::string& what) : std::runtime_error(what) {}
};

/// The lattice is too coarse to resolve the requested structure.
struct ResolutionError : std::runtime_error {
    explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

/// An operation was called before its prerequisite state was established.
struct StateError : std::runtime_error {
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// A supplemented-map pre-check failed; carries the worst offending pair.
struct NotBiLipschitzError : std::runtime_error {
    explicit NotBiLipschitzError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mapcontent
