#pragma once

#include <stdexcept>
#include <string>

namespace csg {

/// Malformed or unreadable tensor container / JSON input.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or count disagreement between operands.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument value (non-positive dimension, bad flag, ...).
struct value_error : std::runtime_error {
    explicit value_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: rank deficiency, divergence, non-finite results.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace csg
