#pragma once

#include <stdexcept>
#include <string>

namespace qlasso {

/// Parameters that describe no valid object (s > n, radius <= 0, ...).
struct InvalidSpec : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite input to a scalar map.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A closed form requested outside the parameters it was derived for.
struct UnsupportedParameters : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Divergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_same(long a, long b, const char *what) {
    if (a != b)
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) +
                                " != " + std::to_string(b));
}

} // namespace detail
} // namespace qlasso
