#include "pfl/compress.hpp"

#include "pfl/bytes.hpp"

namespace pfl {

std::vector<std::uint32_t> Assignment::owners() const {
    std::vector<std::uint32_t> owner(std::size_t(d), 0);
    for (std::size_t i = 0; i < buckets.size(); ++i)
        for (std::uint32_t j : buckets[i]) owner[j] = std::uint32_t(i);
    return owner;
}

Assignment assignment_from_permutation(std::int64_t d, std::int64_t n,
                                       const std::vector<std::uint32_t>& perm,
                                       const std::vector<std::uint32_t>& residual_clients,
                                       std::uint64_t round) {
    if (n < 1 || d < n) throw ProtocolError("PermK requires d >= n >= 1");
    const std::int64_t base = d / n;
    const std::int64_t t = d - n * base;
    if (std::int64_t(perm.size()) != d || std::int64_t(residual_clients.size()) != t)
        throw std::invalid_argument("assignment_from_permutation: bad inputs");

    Assignment a;
    a.d = d;
    a.n = n;
    a.round = round;
    a.buckets.assign(std::size_t(n), {});
    for (std::int64_t i = 0; i < n; ++i) {
        auto& bucket = a.buckets[std::size_t(i)];
        bucket.assign(perm.begin() + i * base, perm.begin() + (i + 1) * base);
    }
    for (std::int64_t k = 0; k < t; ++k)
        a.buckets[residual_clients[std::size_t(k)]].push_back(perm[std::size_t(n * base + k)]);
    for (auto& bucket : a.buckets) std::sort(bucket.begin(), bucket.end());
    return a;
}

Assignment sample_assignment(std::int64_t d, std::int64_t n, std::uint64_t seed,
                             std::uint64_t round) {
    if (n < 1 || d < n) throw ProtocolError("PermK requires d >= n >= 1");
    Prg prg(seed, round);
    std::vector<std::uint32_t> perm(std::size_t(d), 0);
    for (std::int64_t j = 0; j < d; ++j) perm[std::size_t(j)] = std::uint32_t(j);
    prg.shuffle(perm);
    const std::int64_t t = d - n * (d / n);
    // Residual coordinates go one each to t distinct clients drawn from the
    // same round substream, right after the permutation.
    const std::vector<std::uint32_t> extra =
        prg.sample_without_replacement(std::uint32_t(n), std::uint32_t(t));
    return assignment_from_permutation(d, n, perm, extra, round);
}

std::vector<std::uint8_t> encode_chunk_payload(const SparseChunk& c, Precision prec) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + c.values.size() * std::size_t(wire_bytes_per_scalar(prec)));
    put_u32(out, std::uint32_t(c.values.size()));
    for (double v : c.values) {
        switch (prec) {
            case Precision::fp64: put_f64(out, v); break;
            case Precision::fp32: put_f32(out, float(v)); break;
            case Precision::fp16: {
                const std::uint16_t h = f32_to_f16_bits(float(v));
                out.push_back(std::uint8_t(h & 0xFF));
                out.push_back(std::uint8_t(h >> 8));
                break;
            }
        }
    }
    return out;
}

std::vector<double> decode_chunk_payload(const std::vector<std::uint8_t>& payload,
                                         Precision prec) {
    if (payload.size() < 4) throw ProtocolError("chunk payload too short");
    const std::uint32_t m = get_u32(payload.data());
    const std::size_t width = std::size_t(wire_bytes_per_scalar(prec));
    if (payload.size() != 4 + std::size_t(m) * width)
        throw ProtocolError("chunk payload length mismatch");
    std::vector<double> values(m);
    const std::uint8_t* p = payload.data() + 4;
    for (std::uint32_t k = 0; k < m; ++k, p += width) {
        switch (prec) {
            case Precision::fp64: values[k] = get_f64(p); break;
            case Precision::fp32: values[k] = double(get_f32(p)); break;
            case Precision::fp16:
                values[k] = double(f16_bits_to_f32(std::uint16_t(p[0] | (std::uint16_t(p[1]) << 8))));
                break;
        }
    }
    return values;
}

}  // namespace pfl
