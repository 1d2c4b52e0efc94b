#pragma once

#include <cstdint>
#include <stdexcept>

namespace pfl {

// Analytic CKKS size model at the AES-128-equivalent level. No ring
// arithmetic: only the key/ciphertext byte counts the traffic comparisons
// need.
struct CkksParams {
    std::int64_t poly_degree = 16384;  // N, power of two
    std::int64_t q_bits = 210;         // total bits of the coefficient modulus

    std::int64_t slots() const { return poly_degree / 2; }
};

// Operational config (210-bit modulus) by default; strict mode uses the
// 438-bit modulus the security estimate asks for.
inline CkksParams aes128_equivalent_params(bool strict = false) {
    return CkksParams{16384, strict ? 438 : 210};
}

inline void validate(const CkksParams& p) {
    if (p.poly_degree < 2 || (p.poly_degree & (p.poly_degree - 1)) != 0)
        throw std::invalid_argument("poly_degree must be a power of two");
    if (p.q_bits < 1) throw std::invalid_argument("q_bits must be positive");
}

// Public-key size: ceil(N * q_bits / 8).
inline std::int64_t key_size_bytes(const CkksParams& p) {
    validate(p);
    return (p.poly_degree * p.q_bits + 7) / 8;
}

// ceil(d / slots) fresh ciphertexts, 2 polynomials of N coefficients each,
// q_bits per coefficient. Dense regardless of the logical vector's sparsity.
inline std::int64_t ciphertext_bytes(std::int64_t d, const CkksParams& p) {
    validate(p);
    if (d < 1) throw std::invalid_argument("d must be >= 1");
    const std::int64_t chunks = (d + p.slots() - 1) / p.slots();
    return chunks * 2 * p.poly_degree * p.q_bits / 8;
}

// Sparsity-blind by contract: the nonzero count does not enter the model.
inline std::int64_t ciphertext_bytes(std::int64_t d, std::int64_t /*k_nonzero*/,
                                     const CkksParams& p) {
    return ciphertext_bytes(d, p);
}

struct CkksTraffic {
    std::int64_t up_bytes_per_client = 0;
    std::int64_t down_bytes_per_client = 0;
    std::int64_t one_time_key_bytes = 0;
};

// Per round: one encrypted gradient up, one aggregated ciphertext down; the
// public key is reported to the master once.
inline CkksTraffic ckks_traffic_per_round(std::int64_t d, const CkksParams& p) {
    CkksTraffic t;
    t.up_bytes_per_client = ciphertext_bytes(d, p);
    t.down_bytes_per_client = ciphertext_bytes(d, p);
    t.one_time_key_bytes = key_size_bytes(p);
    return t;
}

// Comparison column: AES envelope for the same vector (values + nonce + tag).
inline std::int64_t aes_envelope_bytes(std::int64_t d, int bytes_per_scalar = 8) {
    return d * bytes_per_scalar + 32;
}

}  // namespace pfl
