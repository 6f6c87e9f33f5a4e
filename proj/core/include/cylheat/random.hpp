#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cylheat {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Independent stream for item `index` of a run seeded with `seed`, so
    // results do not depend on how work is split across threads.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t bits() { return engine_(); }

    // Uniform on the open interval (0, 1) from 53 random bits.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential() { return -std::log(uniform()); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cylheat
