#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pfl/aes128.hpp"
#include "pfl/prg.hpp"

namespace pfl {

struct EntropySource {
    virtual ~EntropySource() = default;
    virtual void fill(std::uint8_t* p, std::size_t n) = 0;
};

// OS entropy (getrandom). Throws if the kernel refuses.
struct SystemEntropy final : EntropySource {
    void fill(std::uint8_t* p, std::size_t n) override;
};

// Deterministic stream for reproducible experiment keys. Not for production
// key material.
struct SeededEntropy final : EntropySource {
    explicit SeededEntropy(std::uint64_t seed) : prg(seed, 0x6B6579 /* "key" */) {}
    void fill(std::uint8_t* p, std::size_t n) override;
    Prg prg;
};

struct SecretKey {
    std::array<std::uint8_t, 16> bytes{};
};

SecretKey keygen(EntropySource& entropy);

// Associated data bound into every seal: version | round | client | length,
// 17 bytes little-endian. Tampering with any field fails verification.
struct EnvelopeHeader {
    std::uint8_t version = 1;
    std::uint64_t round = 0;
    std::uint32_t client = 0;
    std::uint32_t payload_len = 0;

    std::array<std::uint8_t, 17> serialize() const;
    static EnvelopeHeader deserialize(const std::uint8_t* p);
};

struct Envelope {
    EnvelopeHeader header;
    std::array<std::uint8_t, 16> nonce{};
    std::array<std::uint8_t, 16> tag{};
    std::vector<std::uint8_t> ciphertext;

    bool operator==(const Envelope& o) const {
        return header.version == o.header.version && header.round == o.header.round &&
               header.client == o.header.client && header.payload_len == o.header.payload_len &&
               nonce == o.nonce && tag == o.tag && ciphertext == o.ciphertext;
    }
};

// Wire overhead on top of the payload: "PFE1" + header before nonce and tag.
inline constexpr std::int64_t kFrameHeaderBytes = 4 + 17;
inline constexpr std::int64_t kNonceTagBytes = 32;

Envelope seal(const SecretKey& sk, EnvelopeHeader header, const std::vector<std::uint8_t>& payload,
              EntropySource& entropy);

// Exact plaintext iff the tag verifies over (header, ciphertext); nullopt on
// any mismatch, releasing nothing.
std::optional<std::vector<std::uint8_t>> open(const SecretKey& sk, const Envelope& env);

}  // namespace pfl
