#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace calibal {

struct RngSeed {
    std::uint64_t value = 0;

    friend bool operator==(RngSeed, RngSeed) = default;
};

// Child seed for an isolated stream, e.g. derive_seed(master, {fold, experiment, model}).
RngSeed derive_seed(RngSeed base, std::initializer_list<std::uint64_t> tags) noexcept;

// Seeded generator whose draws depend only on the mt19937_64 output sequence,
// so results do not vary with the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(RngSeed seed) : engine_(seed.value) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be > 0.
    std::size_t below(std::size_t n);

    bool bernoulli(double p) { return uniform() < p; }

    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace calibal
