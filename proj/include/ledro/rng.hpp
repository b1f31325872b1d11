#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ledro {

/// Deterministic RNG wrapper. Uniform and normal draws are generated from
/// raw mt19937_64 output directly so streams do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is always tiny vs 2^64.
        return eng_() % n;
    }

    /// Standard normal via Box-Muller (cached spare).
    double normal();

    /// Fisher-Yates shuffle of indices 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives a child seed from a root seed, a phase label, and an index.
/// The scheme is a fixed splitmix64 chain so every phase/round/repeat of a
/// run draws from an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

/// Scrambled Halton sequence over [0,1)^dim: digit-permuted radical inverse
/// in the first `dim` prime bases, with per-base permutations drawn from the
/// seed. Space-filling initializer for the optimizer.
class ScrambledHalton {
public:
    ScrambledHalton(std::size_t dim, std::uint64_t seed);

    /// Next point in the sequence.
    std::vector<double> next();

    /// Convenience: the first n points.
    std::vector<std::vector<double>> take(std::size_t n);

private:
    double radical_inverse(std::size_t base_idx, std::uint64_t index) const;

    std::vector<std::uint32_t> bases_;
    std::vector<std::vector<std::uint32_t>> perms_; // one digit permutation per base
    std::uint64_t index_ = 0;
};

} // namespace ledro
