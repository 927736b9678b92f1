#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace bcrmdp {

/// SplitMix64 finalizer; used for all seed derivation.
std::uint64_t mix64(std::uint64_t value);

/// Child seed for stream `index` of `master`. Pure function, documented so that
/// run i of an experiment is reproducible in isolation:
///   derive_seed(m, i) = mix64(m + 0x9E3779B97F4A7C15 * (i + 1))
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/**
 * Seeded random stream.
 *
 * Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
 * performs every transformation itself, so sequences do not depend on the
 * standard library's distribution implementations. Draw accounting:
 *   uniform()        1 engine draw
 *   uniform_index()  1 engine draw
 *   normal()         2 engine draws (Box-Muller, no cached second value)
 *   exponential()    1 engine draw
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on {0, ..., n-1}; n must be positive.
    std::size_t uniform_index(std::size_t n);

    double normal();
    double normal(double mean, double variance);

    double exponential();

    std::string serialize() const;
    static Rng deserialize(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace bcrmdp
