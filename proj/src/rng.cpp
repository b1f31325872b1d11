#include "ledro/rng.hpp"

#include <cmath>
#include <numbers>

namespace ledro {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller on open-interval uniforms.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<std::uint32_t> first_primes(std::size_t n) {
    std::vector<std::uint32_t> primes;
    std::uint32_t candidate = 2;
    while (primes.size() < n) {
        bool is_prime = true;
        for (std::uint32_t p : primes) {
            if (p * p > candidate) break;
            if (candidate % p == 0) {
                is_prime = false;
                break;
            }
        }
        if (is_prime) primes.push_back(candidate);
        ++candidate;
    }
    return primes;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index) {
    std::uint64_t h = splitmix64(root);
    for (unsigned char c : label) h = splitmix64(h ^ c);
    h = splitmix64(h ^ index);
    return h;
}

ScrambledHalton::ScrambledHalton(std::size_t dim, std::uint64_t seed)
    : bases_(first_primes(dim)) {
    perms_.reserve(dim);
    Rng rng(derive_seed(seed, "halton-scramble"));
    for (std::size_t d = 0; d < dim; ++d) {
        const std::uint32_t b = bases_[d];
        std::vector<std::uint32_t> perm(b);
        for (std::uint32_t i = 0; i < b; ++i) perm[i] = i;
        // Scramble nonzero digits only so leading zeros stay zero and the
        // radical inverse keeps its low-discrepancy structure.
        for (std::uint32_t i = b - 1; i > 1; --i) {
            auto j = 1 + static_cast<std::uint32_t>(rng.uniform_index(i));
            std::swap(perm[i], perm[j]);
        }
        perms_.push_back(std::move(perm));
    }
}

double ScrambledHalton::radical_inverse(std::size_t base_idx, std::uint64_t index) const {
    const auto& perm = perms_[base_idx];
    const std::uint64_t base = bases_[base_idx];
    // Integer accumulation with one final division keeps points exactly on
    // the 1/b^k lattice; incremental floating scales drift off it.
    std::uint64_t num = 0;
    std::uint64_t den = 1;
    while (index > 0) {
        num = num * base + perm[index % base];
        den *= base;
        index /= base;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<double> ScrambledHalton::next() {
    ++index_; // skip index 0 (the all-zeros point)
    std::vector<double> point(bases_.size());
    for (std::size_t d = 0; d < bases_.size(); ++d) point[d] = radical_inverse(d, index_);
    return point;
}

std::vector<std::vector<double>> ScrambledHalton::take(std::size_t n) {
    std::vector<std::vector<double>> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) points.push_back(next());
    return points;
}

} // namespace ledro
