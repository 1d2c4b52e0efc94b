#include "pfl/secenv.hpp"

#include <sys/random.h>

#include <cstring>
#include <stdexcept>

#include "pfl/bytes.hpp"

namespace pfl {

void SystemEntropy::fill(std::uint8_t* p, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = getrandom(p + got, n - got, 0);
        if (r < 0) throw std::runtime_error("system entropy unavailable");
        got += std::size_t(r);
    }
}

void SeededEntropy::fill(std::uint8_t* p, std::size_t n) {
    for (std::size_t i = 0; i < n; i += 8) {
        const std::uint64_t v = prg.next_u64();
        for (std::size_t k = 0; k < 8 && i + k < n; ++k) p[i + k] = std::uint8_t(v >> (8 * k));
    }
}

SecretKey keygen(EntropySource& entropy) {
    SecretKey sk;
    entropy.fill(sk.bytes.data(), sk.bytes.size());
    return sk;
}

std::array<std::uint8_t, 17> EnvelopeHeader::serialize() const {
    std::vector<std::uint8_t> buf;
    buf.reserve(17);
    put_u8(buf, version);
    put_u64(buf, round);
    put_u32(buf, client);
    put_u32(buf, payload_len);
    std::array<std::uint8_t, 17> out{};
    std::memcpy(out.data(), buf.data(), 17);
    return out;
}

EnvelopeHeader EnvelopeHeader::deserialize(const std::uint8_t* p) {
    EnvelopeHeader h;
    h.version = p[0];
    h.round = get_u64(p + 1);
    h.client = get_u32(p + 9);
    h.payload_len = get_u32(p + 13);
    return h;
}

Envelope seal(const SecretKey& sk, EnvelopeHeader header, const std::vector<std::uint8_t>& payload,
              EntropySource& entropy) {
    if (payload.size() >= (1ull << 32)) throw std::invalid_argument("payload too large");
    header.payload_len = std::uint32_t(payload.size());
    Envelope env;
    env.header = header;
    entropy.fill(env.nonce.data(), env.nonce.size());
    const Aes128 aes(sk.bytes.data());
    const auto ad = header.serialize();
    EaxResult r = eax_encrypt(aes, env.nonce.data(), env.nonce.size(), ad.data(), ad.size(),
                              payload.data(), payload.size());
    env.ciphertext = std::move(r.ciphertext);
    env.tag = r.tag;
    return env;
}

std::optional<std::vector<std::uint8_t>> open(const SecretKey& sk, const Envelope& env) {
    if (env.ciphertext.size() != env.header.payload_len) return std::nullopt;
    const Aes128 aes(sk.bytes.data());
    const auto ad = env.header.serialize();
    std::vector<std::uint8_t> plaintext;
    if (!eax_decrypt(aes, env.nonce.data(), env.nonce.size(), ad.data(), ad.size(),
                     env.ciphertext.data(), env.ciphertext.size(), env.tag.data(), plaintext))
        return std::nullopt;
    return plaintext;
}

}  // namespace pfl
