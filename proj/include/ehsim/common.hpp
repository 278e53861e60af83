#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehsim {

using real = double;

/// Thrown when an iterative solver exhausts its sweep budget; carries the
/// last observed span so callers can report how far from convergence it was.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, real final_span)
        : std::runtime_error(what), span(final_span) {}
    real span;
};

/// Thrown when a configured state-space cap would be exceeded.
class StateSpaceCapError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tolerance used to make floor/ceil immune to binary-representation noise
// (e.g. 0.6*5 evaluating to 2.999...96).
inline constexpr real kIntEps = 1e-9;

inline int floor_int(real x) { return static_cast<int>(std::floor(x + kIntEps)); }
inline int ceil_int(real x) { return static_cast<int>(std::ceil(x - kIntEps)); }

inline real span(const std::vector<real>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

/// Argmin over a value vector with deterministic lowest-index tie-breaking.
/// Candidates within `tie_eps` of the incumbent best do not displace it, so
/// genuinely tied entries resolve to the lowest index regardless of
/// floating-point noise in how the values were accumulated.
inline std::size_t argmin_stable(const std::vector<real>& values, real tie_eps = 1e-9) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best] - tie_eps) best = i;
    return best;
}

inline std::size_t argmax_stable(const std::vector<real>& values, real tie_eps = 1e-9) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best] + tie_eps) best = i;
    return best;
}

}  // namespace ehsim
