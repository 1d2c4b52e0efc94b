#pragma once

#include <cstdint>
#include <vector>

namespace pfl {

// Deterministic SplitMix64 stream. Clients and the master derive bucket
// assignments independently from (seed, round), so the state transition,
// the substream derivation and the shuffle order below are frozen wire
// protocol: changing any of them breaks interoperability between nodes.
class Prg {
public:
    explicit Prg(std::uint64_t seed) : state_(seed) {}

    // Round substream: state = seed ^ (round * odd constant).
    Prg(std::uint64_t seed, std::uint64_t round)
        : state_(seed ^ (round * kRoundStream)) {}

    // Per-client substream inside a round (RandK index sets are sampled
    // independently per client; PermK uses the plain round substream).
    Prg(std::uint64_t seed, std::uint64_t round, std::uint64_t client)
        : state_(seed ^ (round * kRoundStream) ^ ((client + 1) * kClientStream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, bound), unbiased via rejection. bound >= 1.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % bound;
        }
    }

    // Standard normal via Box-Muller (used only by problem generation).
    double next_gaussian();

    // Fisher-Yates, descending index order.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = std::size_t(next_below(i));
            T tmp = v[i - 1];
            v[i - 1] = v[j];
            v[j] = tmp;
        }
    }

    // First k entries of a shuffled [0,n) sequence.
    std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k);

private:
    static constexpr std::uint64_t kRoundStream = 0xD1B54A32D192ED03ull;
    static constexpr std::uint64_t kClientStream = 0x9E6C63D0876A9A35ull;

    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pfl
