// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sagan {

// Counter-based deterministic generator. Every draw is a pure function of
// (key, counter), so streams can be split per image / per step / per worker
// without any shared state. The mixer is the splitmix64 finalizer.
class CounterRng {
public:
    explicit CounterRng(uint64_t key) : key_(key) {}

    // Derive a sub-stream key from a parent seed and labelled indices.
    static uint64_t derive(uint64_t seed, std::string_view label,
                           uint64_t a = 0, uint64_t b = 0) {
        uint64_t k = mix(seed ^ 0x9e3779b97f4a7c15ull);
        for (char c : label) k = mix(k ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
        k = mix(k ^ a);
        k = mix(k ^ b);
        return k;
    }

    uint64_t next_u64() { return mix(key_ ^ (counter_++ * 0xbf58476d1ce4e5b9ull)); }

    // Uniform in [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    // Standard normal via Box-Muller. Uses explicit libm calls rather than
    // std::normal_distribution, whose output is implementation-defined.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    uint64_t next_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

private:
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t key_;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace sagan
