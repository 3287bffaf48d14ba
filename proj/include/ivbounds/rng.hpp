#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ivbounds {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for stream `indices` under `base`, e.g. (base_seed, rho_index, rep_index).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> indices);

// Caller-owned generator. Uniforms use the top 53 bits of mt19937_64 and
// normals use Box-Muller, so draws are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // (0, 1)
    double normal();
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ivbounds
