#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace texim {

// Seeded generator used everywhere randomness appears. Sub-streams are
// derived from (seed, tag...) so that results do not depend on call order
// across unrelated components.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
        // splitmix64 finalizer
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    template <typename... Tags>
    static Rng derive(std::uint64_t seed, Tags... tags) {
        std::uint64_t s = seed;
        ((s = mix(s, static_cast<std::uint64_t>(tags))), ...);
        return Rng(s);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    double normal() {
        std::normal_distribution<double> dist(0.0, 1.0);
        return dist(engine_);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace texim
