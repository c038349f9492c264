#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ssg {

// Deterministic RNG. mt19937_64 output is mandated by the standard, but the
// std distributions are not, so the transforms live here. Same seed, same
// stream of doubles on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // [0,1)
    double uniform();
    double uniform(double lo, double hi);
    // inclusive bounds
    int uniform_int(int lo, int hi);
    double normal(); // Box-Muller, spare cached
    double normal(double mean, double stddev);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Weighted index draw; weights need not be normalized.
    int weighted_index(const std::vector<double>& weights);

    // Independent deterministic substream (independent of draws made so far).
    Rng fork(std::uint64_t stream) const;

private:
    std::mt19937_64 eng_;
    std::uint64_t root_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace ssg
