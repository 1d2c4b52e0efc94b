#include "pfl/aes128.hpp"

#include <cstring>

namespace pfl {
namespace {

std::uint8_t rotl8(std::uint8_t x, int s) {
    return std::uint8_t((x << s) | (x >> (8 - s)));
}

// S-box built from the GF(2^8) inverse plus the affine map rather than a
// transcribed table; validated against FIPS-197 vectors in the tests.
const std::array<std::uint8_t, 256> kSbox = [] {
    std::array<std::uint8_t, 256> sbox{};
    std::uint8_t p = 1, q = 1;
    do {
        p = std::uint8_t(p ^ (p << 1) ^ ((p & 0x80) ? 0x1B : 0));
        q ^= std::uint8_t(q << 1);
        q ^= std::uint8_t(q << 2);
        q ^= std::uint8_t(q << 4);
        if (q & 0x80) q ^= 0x09;
        sbox[p] = std::uint8_t(q ^ rotl8(q, 1) ^ rotl8(q, 2) ^ rotl8(q, 3) ^ rotl8(q, 4) ^ 0x63);
    } while (p != 1);
    sbox[0] = 0x63;
    return sbox;
}();

std::uint8_t xtime(std::uint8_t x) {
    return std::uint8_t((x << 1) ^ ((x & 0x80) ? 0x1B : 0));
}

void xor16(std::uint8_t* dst, const std::uint8_t* src) {
    for (int i = 0; i < 16; ++i) dst[i] ^= src[i];
}

}  // namespace

Aes128::Aes128(const std::uint8_t key[16]) {
    std::memcpy(round_keys_.data(), key, 16);
    std::uint8_t rcon = 1;
    for (int i = 16; i < 176; i += 4) {
        std::uint8_t t[4];
        std::memcpy(t, round_keys_.data() + i - 4, 4);
        if (i % 16 == 0) {
            const std::uint8_t tmp = t[0];
            t[0] = std::uint8_t(kSbox[t[1]] ^ rcon);
            t[1] = kSbox[t[2]];
            t[2] = kSbox[t[3]];
            t[3] = kSbox[tmp];
            rcon = xtime(rcon);
        }
        for (int k = 0; k < 4; ++k)
            round_keys_[std::size_t(i + k)] = std::uint8_t(round_keys_[std::size_t(i + k - 16)] ^ t[k]);
    }
}

void Aes128::encrypt_block(const std::uint8_t in[16], std::uint8_t out[16]) const {
    std::uint8_t s[16];
    std::memcpy(s, in, 16);
    xor16(s, round_keys_.data());
    for (int round = 1; round <= 10; ++round) {
        for (int i = 0; i < 16; ++i) s[i] = kSbox[s[i]];
        // ShiftRows on column-major state: row r rotates left by r
        std::uint8_t t[16];
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 4; ++r) t[c * 4 + r] = s[((c + r) % 4) * 4 + r];
        if (round < 10) {
            for (int c = 0; c < 4; ++c) {
                std::uint8_t* col = t + c * 4;
                const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
                const std::uint8_t x = std::uint8_t(a0 ^ a1 ^ a2 ^ a3);
                col[0] = std::uint8_t(a0 ^ x ^ xtime(std::uint8_t(a0 ^ a1)));
                col[1] = std::uint8_t(a1 ^ x ^ xtime(std::uint8_t(a1 ^ a2)));
                col[2] = std::uint8_t(a2 ^ x ^ xtime(std::uint8_t(a2 ^ a3)));
                col[3] = std::uint8_t(a3 ^ x ^ xtime(std::uint8_t(a3 ^ a0)));
            }
        }
        std::memcpy(s, t, 16);
        xor16(s, round_keys_.data() + 16 * round);
    }
    std::memcpy(out, s, 16);
}

namespace {

void cmac_dbl(std::uint8_t b[16]) {
    const bool msb = b[0] & 0x80;
    for (int i = 0; i < 15; ++i) b[i] = std::uint8_t((b[i] << 1) | (b[i + 1] >> 7));
    b[15] = std::uint8_t(b[15] << 1);
    if (msb) b[15] ^= 0x87;
}

}  // namespace

std::array<std::uint8_t, 16> aes_cmac(const Aes128& aes, const std::uint8_t* data,
                                      std::size_t len) {
    std::uint8_t k1[16], k2[16];
    std::uint8_t zero[16] = {0};
    aes.encrypt_block(zero, k1);
    cmac_dbl(k1);
    std::memcpy(k2, k1, 16);
    cmac_dbl(k2);

    std::uint8_t x[16] = {0};
    const std::size_t blocks = len == 0 ? 1 : (len + 15) / 16;
    for (std::size_t b = 0; b + 1 < blocks; ++b) {
        xor16(x, data + 16 * b);
        aes.encrypt_block(x, x);
    }
    std::uint8_t last[16] = {0};
    const std::size_t tail = len - (blocks - 1) * 16;
    if (len != 0 && tail == 16) {
        std::memcpy(last, data + (blocks - 1) * 16, 16);
        xor16(last, k1);
    } else {
        if (len != 0) std::memcpy(last, data + (blocks - 1) * 16, tail);
        last[tail] = 0x80;
        xor16(last, k2);
    }
    xor16(x, last);
    std::array<std::uint8_t, 16> out;
    aes.encrypt_block(x, out.data());
    return out;
}

namespace {

// OMAC with the EAX domain-separation prefix block [0]^15 || t
std::array<std::uint8_t, 16> eax_omac(const Aes128& aes, std::uint8_t t, const std::uint8_t* data,
                                      std::size_t len) {
    std::vector<std::uint8_t> buf(16 + len, 0);
    buf[15] = t;
    if (len) std::memcpy(buf.data() + 16, data, len);
    return aes_cmac(aes, buf.data(), buf.size());
}

void ctr_xcrypt(const Aes128& aes, const std::array<std::uint8_t, 16>& iv,
                const std::uint8_t* in, std::size_t len, std::uint8_t* out) {
    std::uint8_t ctr[16];
    std::memcpy(ctr, iv.data(), 16);
    std::uint8_t ks[16];
    for (std::size_t off = 0; off < len; off += 16) {
        aes.encrypt_block(ctr, ks);
        const std::size_t m = len - off < 16 ? len - off : 16;
        for (std::size_t i = 0; i < m; ++i) out[off + i] = std::uint8_t(in[off + i] ^ ks[i]);
        for (int i = 15; i >= 0; --i)
            if (++ctr[i] != 0) break;
    }
}

}  // namespace

EaxResult eax_encrypt(const Aes128& aes, const std::uint8_t* nonce, std::size_t nonce_len,
                      const std::uint8_t* header, std::size_t header_len,
                      const std::uint8_t* plaintext, std::size_t len) {
    const auto n_mac = eax_omac(aes, 0, nonce, nonce_len);
    const auto h_mac = eax_omac(aes, 1, header, header_len);
    EaxResult r;
    r.ciphertext.resize(len);
    if (len) ctr_xcrypt(aes, n_mac, plaintext, len, r.ciphertext.data());
    const auto c_mac = eax_omac(aes, 2, r.ciphertext.data(), len);
    for (int i = 0; i < 16; ++i)
        r.tag[std::size_t(i)] =
            std::uint8_t(n_mac[std::size_t(i)] ^ c_mac[std::size_t(i)] ^ h_mac[std::size_t(i)]);
    return r;
}

bool eax_decrypt(const Aes128& aes, const std::uint8_t* nonce, std::size_t nonce_len,
                 const std::uint8_t* header, std::size_t header_len,
                 const std::uint8_t* ciphertext, std::size_t len, const std::uint8_t tag[16],
                 std::vector<std::uint8_t>& plaintext_out) {
    plaintext_out.clear();
    const auto n_mac = eax_omac(aes, 0, nonce, nonce_len);
    const auto h_mac = eax_omac(aes, 1, header, header_len);
    const auto c_mac = eax_omac(aes, 2, ciphertext, len);
    std::uint8_t diff = 0;
    for (int i = 0; i < 16; ++i)
        diff |= std::uint8_t(tag[i] ^ n_mac[std::size_t(i)] ^ c_mac[std::size_t(i)] ^
                             h_mac[std::size_t(i)]);
    if (diff != 0) return false;
    plaintext_out.resize(len);
    if (len) ctr_xcrypt(aes, n_mac, ciphertext, len, plaintext_out.data());
    return true;
}

}  // namespace pfl
