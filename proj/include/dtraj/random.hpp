#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace dtraj {

// Deterministic RNG used everywhere the toolkit needs randomness.
// splitmix64 core with hand-rolled normal/shuffle so that streams are
// bit-identical across standard libraries and platforms (<random>
// distributions are implementation-defined).
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0,1), never exactly 0 or 1
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller, two uniforms per draw, no cached spare
    double next_normal() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // uniform integer in [0, n), n >= 1
    int next_below(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
            const int j = next_below(i + 1);
            std::swap(items[static_cast<std::size_t>(i)],
                      items[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    DetRng rng(seed ^ (0x632be59bd9b4e019ULL * (salt + 1)));
    return rng.next_u64();
}

}  // namespace dtraj
