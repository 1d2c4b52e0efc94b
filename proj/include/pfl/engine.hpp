#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pfl/compress.hpp"
#include "pfl/precision.hpp"
#include "pfl/problem.hpp"
#include "pfl/secenv.hpp"

namespace pfl {

enum class Algorithm {
    gd,
    gd_aes,
    dcgd_randk,
    dcgd_randk_aes,
    dcgd_permk,
    dcgd_permk_aes,
    fedavg,
};

std::string to_string(Algorithm a);
bool algorithm_from_string(const std::string& s, Algorithm& out);

inline bool uses_aes(Algorithm a) {
    return a == Algorithm::gd_aes || a == Algorithm::dcgd_randk_aes ||
           a == Algorithm::dcgd_permk_aes;
}
inline bool uses_permk(Algorithm a) {
    return a == Algorithm::dcgd_permk || a == Algorithm::dcgd_permk_aes;
}

struct RunConfig {
    Algorithm algorithm = Algorithm::gd;
    double gamma = 0.1;
    std::int64_t rounds = 100;
    Precision precision = Precision::fp64;
    std::int64_t randk_k = 0;  // 0 -> d/5
    std::uint64_t compressor_seed = 1;
    std::uint64_t x0_seed = 2;
    std::optional<std::uint64_t> key_seed;  // empty -> OS entropy
    std::int64_t fedavg_local_steps = 1;
    double fedavg_local_gamma = 0.0;  // 0 -> gamma
    double divergence_factor = 1e12;
    bool record_iterates = false;
    std::vector<double> x0;  // empty -> drawn from x0_seed

    void validate() const;
};

struct RoundMetrics {
    std::int64_t round = 0;
    double fx = 0.0;
    double grad_norm_sq = 0.0;
    std::int64_t up_bytes_total = 0;    // wire bytes, client -> master
    std::int64_t down_bytes_total = 0;  // wire bytes, master -> client
    double up_bytes_per_client = 0.0;
    double down_bytes_per_client = 0.0;
    // headline cost formulas: values*bpp/8 (+32 per encrypted message)
    double nominal_up_bytes_per_client = 0.0;
    double nominal_down_bytes_per_client = 0.0;
    double wall_ms = 0.0;
    // phase breakdown of wall_ms
    double grad_ms = 0.0;
    double crypto_ms = 0.0;  // seal + open
    double apply_ms = 0.0;
    bool diverged = false;
};

struct RunResult {
    std::vector<RoundMetrics> rounds;
    std::vector<double> final_x;  // FP64 copy of the (shared) client iterate
    bool diverged = false;
    double final_fx = 0.0;
    double final_grad_norm_sq = 0.0;
    // no-drop executions keep every client replica bitwise identical at
    // round boundaries; checked after every round
    bool replicas_identical = true;
    // per-round FP64 copies of the iterate, when record_iterates is set
    std::vector<std::vector<double>> iterates;
};

RunResult run(const Problem& p, const RunConfig& cfg);

struct TuneEntry {
    double gamma = 0.0;
    std::uint64_t seed = 0;
    bool diverged = false;
    double final_grad_norm_sq = 0.0;
};

struct TuneReport {
    std::vector<TuneEntry> entries;
    std::vector<double> diverged_gammas;  // >=1 seed diverged
    double best_gamma = 0.0;
};

struct TuningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs every gamma over every compressor seed; best gamma minimizes the mean
// final grad norm among gammas whose seeds all converged.
TuneReport tune_step_size(const Problem& p, const RunConfig& base, const std::vector<double>& grid,
                          const std::vector<std::uint64_t>& seeds);

// Message byte accounting. "nominal" counts scalar payload plus 32 bytes of
// nonce+tag per encrypted message; "wire" counts the canonical chunk payload
// (4-byte count prefix) plus the framed envelope overhead.
std::int64_t nominal_message_bytes(std::int64_t values, Precision prec, bool encrypted);
std::int64_t wire_message_bytes(std::int64_t values, Precision prec, bool encrypted,
                                bool sparse_payload);

// Highest-round-seen replay defense. Receivers reject an envelope whose round
// does not match the round they are waiting for or that reuses an old round.
class ReplayGuard {
public:
    bool accept(std::uint64_t client, std::uint64_t round, std::uint64_t expected_round) {
        if (round != expected_round) return false;
        if (client >= last_.size()) last_.resize(std::size_t(client + 1), -1);
        if (std::int64_t(round) <= last_[std::size_t(client)]) return false;
        last_[std::size_t(client)] = std::int64_t(round);
        return true;
    }

private:
    std::vector<std::int64_t> last_;
};

// ---- protocol kernels shared by the in-memory engine and the socket client
// (identical code path keeps trajectories bitwise equal across stacks) ----

template <class S>
std::vector<S> initial_iterate(std::int64_t d, std::uint64_t x0_seed) {
    Prg prg(x0_seed, 3);
    std::vector<S> x;
    x.reserve(std::size_t(d));
    for (std::int64_t j = 0; j < d; ++j) x.push_back(scalar_from_double<S>(prg.next_unit()));
    return x;
}

// The per-block step factor gamma/n in FP64, rounded once into
// the run precision.
template <class S>
S permk_step_scale(double gamma, std::int64_t n) {
    return scalar_from_double<S>(gamma / double(n));
}

inline Envelope seal_chunk(const SparseChunk& chunk, Precision prec, std::uint64_t round,
                           std::uint32_t client, const SecretKey& sk, EntropySource& entropy) {
    EnvelopeHeader h;
    h.round = round;
    h.client = client;
    return seal(sk, h, encode_chunk_payload(chunk, prec), entropy);
}

// Open + verify one block envelope; throws on authentication failure so the
// caller halts the round, rejects replays and mislabeled senders.
std::vector<double> open_chunk_values(const Envelope& env, const SecretKey& sk, Precision prec,
                                      std::uint64_t expected_round, std::uint32_t expected_client,
                                      ReplayGuard& guard);

// x_b <- x_b - (gamma/n) * ghat_b for one PermK block (values carry the n*
// factor). Values must be in ascending-index order of the bucket.
template <class S>
void apply_permk_block(std::vector<S>& x, const std::vector<std::uint32_t>& bucket,
                       const std::vector<double>& values, S step_scale) {
    if (bucket.size() != values.size()) throw ProtocolError("block size mismatch");
    for (std::size_t t = 0; t < bucket.size(); ++t) {
        const S v = scalar_from_double<S>(values[t]);
        x[bucket[t]] = x[bucket[t]] - step_scale * v;
    }
}

// Dense step x <- x - gamma * ghat (baseline variants).
template <class S>
void apply_dense_step(std::vector<S>& x, const std::vector<S>& ghat, double gamma) {
    const S g = scalar_from_double<S>(gamma);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = x[j] - g * ghat[j];
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rows);

// Exact textual iterate dump (hex floats); used by the cross-stack equality
// check.
void write_iterates_csv(const std::string& path, const std::vector<std::vector<double>>& iterates);

}  // namespace pfl
