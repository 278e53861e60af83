#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ehsim/common.hpp"

namespace ehsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed-splitting rule used everywhere a master seed fans out into
/// independent streams: stream k of master m is splitmix64(m ^ splitmix64(k+1)).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
}

/// Deterministic random stream. Sampling is implemented on top of raw
/// mt19937_64 draws rather than std::*_distribution so that identical seeds
/// produce identical trajectories independent of the standard library.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0,1) with 53-bit resolution.
    real uniform01() { return static_cast<real>(engine_() >> 11) * 0x1.0p-53; }

    /// Index drawn from an explicit probability vector (CDF scan).
    int sample_pmf(const std::vector<real>& pmf) {
        const real u = uniform01();
        real acc = 0.0;
        for (std::size_t i = 0; i + 1 < pmf.size(); ++i) {
            acc += pmf[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(pmf.size()) - 1;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace ehsim
