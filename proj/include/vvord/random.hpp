#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace vvord {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t splitmix64(std::uint64_t x);

/// Portable random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard, seeded with
///   splitmix64(seed ^ splitmix64(stream + 0x9E3779B97F4A7C15)).
/// Real numbers use the top 53 bits: u = (next() >> 11) * 2^-53 in [0, 1).
/// Bounded integers use rejection sampling on next() % n. No standard
/// distribution objects are used, so every platform sees the same values.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi);
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates shuffle, swapping from the back.
    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace vvord
