#pragma once

#include <stdexcept>
#include <string>

namespace gamehedge {

/// An enumeration (paths, nodes, measure-tree combinations) would exceed the
/// configured budget. Callers may retry with a larger explicit cap.
struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The factor set admits no probability measure with unit mean, i.e. all
/// factors lie strictly on one side of 1.
struct NoMartingaleMeasure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// F > G somewhere; the cancel premium must dominate the exercise payoff.
struct PayoffOrderViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A run configuration failed validation. Message lists offending fields.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gamehedge
