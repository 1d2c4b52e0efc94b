#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pfl {

// AES-128 forward cipher. EAX needs only block encryption (CTR keystream and
// CMAC both run the cipher forward), so no inverse cipher is provided.
class Aes128 {
public:
    explicit Aes128(const std::uint8_t key[16]);
    void encrypt_block(const std::uint8_t in[16], std::uint8_t out[16]) const;

private:
    std::array<std::uint8_t, 176> round_keys_{};
};

// CMAC (OMAC1) over AES-128.
std::array<std::uint8_t, 16> aes_cmac(const Aes128& aes, const std::uint8_t* data, std::size_t len);

// EAX composition: nonce/header/ciphertext OMACs with domain-separation tag
// bytes 0/1/2, CTR keystream seeded by the nonce OMAC.
struct EaxResult {
    std::vector<std::uint8_t> ciphertext;
    std::array<std::uint8_t, 16> tag;
};

EaxResult eax_encrypt(const Aes128& aes, const std::uint8_t* nonce, std::size_t nonce_len,
                      const std::uint8_t* header, std::size_t header_len,
                      const std::uint8_t* plaintext, std::size_t len);

// Returns false on tag mismatch; plaintext_out is left empty in that case.
bool eax_decrypt(const Aes128& aes, const std::uint8_t* nonce, std::size_t nonce_len,
                 const std::uint8_t* header, std::size_t header_len,
                 const std::uint8_t* ciphertext, std::size_t len,
                 const std::uint8_t tag[16], std::vector<std::uint8_t>& plaintext_out);

}  // namespace pfl
