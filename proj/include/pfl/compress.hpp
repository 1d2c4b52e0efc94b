#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pfl/precision.hpp"
#include "pfl/prg.hpp"

namespace pfl {

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-round PermK partition of [0,d) into n disjoint buckets, each of size
// floor(d/n) or floor(d/n)+1, exactly (d mod n) of the larger size. Buckets
// are stored sorted ascending (canonical wire order for chunk values).
struct Assignment {
    std::int64_t d = 0;
    std::int64_t n = 0;
    std::uint64_t round = 0;
    std::vector<std::vector<std::uint32_t>> buckets;

    // owner[j] = client whose bucket holds coordinate j
    std::vector<std::uint32_t> owners() const;
};

Assignment sample_assignment(std::int64_t d, std::int64_t n, std::uint64_t seed,
                             std::uint64_t round);

// Deterministic bucket construction from an explicit permutation and residual
// client choice; sample_assignment and the enumeration tests share this path.
Assignment assignment_from_permutation(std::int64_t d, std::int64_t n,
                                       const std::vector<std::uint32_t>& perm,
                                       const std::vector<std::uint32_t>& residual_clients,
                                       std::uint64_t round = 0);

// One client's compressed gradient: sorted coordinate indices plus values,
// with the compressor's multiplier (n for PermK, d/K for RandK) already baked
// into the values when scale_applied is set.
struct SparseChunk {
    std::uint32_t owner = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    bool scale_applied = false;
};

template <class S>
SparseChunk compress_permk(const std::vector<S>& v, const Assignment& a, std::uint32_t client) {
    if (std::int64_t(v.size()) != a.d) throw std::invalid_argument("compress_permk: bad length");
    if (client >= a.buckets.size()) throw std::invalid_argument("compress_permk: bad client");
    SparseChunk c;
    c.owner = client;
    c.scale_applied = true;
    const std::vector<std::uint32_t>& bucket = a.buckets[client];
    c.indices = bucket;
    c.values.reserve(bucket.size());
    const S scale = scalar_from_double<S>(double(a.n));
    for (std::uint32_t j : bucket) c.values.push_back(scalar_to_double(scale * v[j]));
    return c;
}

template <class S>
SparseChunk compress_randk(const std::vector<S>& v, std::int64_t k, Prg& prg,
                           std::uint32_t client = 0) {
    const std::int64_t d = std::int64_t(v.size());
    if (k < 1 || k > d) throw std::invalid_argument("compress_randk: k out of range");
    std::vector<std::uint32_t> idx = prg.sample_without_replacement(std::uint32_t(d),
                                                                    std::uint32_t(k));
    std::sort(idx.begin(), idx.end());
    SparseChunk c;
    c.owner = client;
    c.scale_applied = true;
    c.indices = std::move(idx);
    c.values.reserve(std::size_t(k));
    const S scale = scalar_from_double<S>(double(d) / double(k));
    for (std::uint32_t j : c.indices) c.values.push_back(scalar_to_double(scale * v[j]));
    return c;
}

template <class S>
SparseChunk compress_identity(const std::vector<S>& v, std::uint32_t client = 0) {
    SparseChunk c;
    c.owner = client;
    c.scale_applied = true;  // identity multiplier
    c.indices.resize(v.size());
    c.values.reserve(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        c.indices[j] = std::uint32_t(j);
        c.values.push_back(scalar_to_double(v[j]));
    }
    return c;
}

// (1/n) * sum of scattered chunks. Coordinates owned by nobody stay zero;
// overlapping (RandK) coordinates sum. With require_disjoint set (PermK), a
// duplicate index across chunks is a protocol violation.
template <class S>
std::vector<S> assemble(const std::vector<SparseChunk>& chunks, std::int64_t d, std::int64_t n,
                        bool require_disjoint = false) {
    std::vector<accum_t<S>> acc(std::size_t(d), accum_t<S>(0));
    std::vector<bool> seen;
    if (require_disjoint) seen.assign(std::size_t(d), false);
    for (const SparseChunk& c : chunks) {
        if (c.indices.size() != c.values.size())
            throw std::invalid_argument("assemble: malformed chunk");
        for (std::size_t k = 0; k < c.indices.size(); ++k) {
            const std::uint32_t j = c.indices[k];
            if (std::int64_t(j) >= d) throw std::invalid_argument("assemble: index out of range");
            if (require_disjoint) {
                if (seen[j]) throw ProtocolError("assemble: duplicate coordinate across chunks");
                seen[j] = true;
            }
            acc[j] += accum_t<S>(scalar_to_double(scalar_from_double<S>(c.values[k])));
        }
    }
    std::vector<S> out;
    out.reserve(std::size_t(d));
    const S inv = scalar_from_double<S>(1.0 / double(n));
    for (std::size_t j = 0; j < std::size_t(d); ++j) out.push_back(inv * S(acc[j]));
    return out;
}

// Canonical chunk payload: 4-byte LE count m, then m scalars LE in ascending
// index order, 2/4/8 bytes each per run precision. Indices never go on the
// wire; receivers re-derive them from the shared seed.
std::vector<std::uint8_t> encode_chunk_payload(const SparseChunk& c, Precision prec);
std::vector<double> decode_chunk_payload(const std::vector<std::uint8_t>& payload, Precision prec);

inline std::int64_t chunk_payload_bytes(std::int64_t values, Precision prec) {
    return 4 + values * wire_bytes_per_scalar(prec);
}

}  // namespace pfl
