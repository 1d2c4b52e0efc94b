#include "pfl/node.hpp"

#include <chrono>
#include <cmath>

namespace pfl {
namespace {

template <class S>
RunResult run_client_t(const Problem& p, const ClientOptions& opt, TcpClient& conn) {
    const RunConfig& cfg = opt.run;
    cfg.validate();
    if (cfg.algorithm != Algorithm::dcgd_permk_aes)
        throw std::invalid_argument("transport mode implements dcgd_permk_aes");
    if (!cfg.key_seed) throw std::invalid_argument("transport mode needs a shared key seed");
    const std::int64_t d = p.d, n = p.n;

    std::vector<S> x;
    if (cfg.x0.empty()) {
        x = initial_iterate<S>(d, cfg.x0_seed);
    } else {
        for (double v : cfg.x0) x.push_back(scalar_from_double<S>(v));
    }
    SeededEntropy keysrc(*cfg.key_seed);
    const SecretKey sk = keygen(keysrc);
    SystemEntropy entropy;
    ReplayGuard guard;
    const S scale = permk_step_scale<S>(cfg.gamma, n);

    auto snapshot = [&] {
        std::vector<double> xd;
        xd.reserve(x.size());
        for (const S& v : x) xd.push_back(scalar_to_double(v));
        return objective_and_gradnorm(
            p, Eigen::Map<const Eigen::VectorXd>(xd.data(), std::int64_t(xd.size())));
    };
    const double gn0 = snapshot().second;

    RunResult res;
    for (std::int64_t k = 0; k < cfg.rounds; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const Assignment a = sample_assignment(d, n, cfg.compressor_seed, std::uint64_t(k));
        const SparseChunk chunk =
            compress_permk(gradient_prec<S>(p, int(opt.client_id), x), a, opt.client_id);
        const Envelope env =
            seal_chunk(chunk, cfg.precision, std::uint64_t(k), opt.client_id, sk, entropy);
        const std::vector<std::uint8_t> frame = frame_encode(env);
        conn.send_frame(frame);

        RoundMetrics m;
        m.round = k;
        m.up_bytes_total = std::int64_t(frame.size());
        m.nominal_up_bytes_per_client =
            double(nominal_message_bytes(std::int64_t(chunk.values.size()), cfg.precision, true));

        // collect the concatenated broadcast: one block per client, any order
        std::vector<std::vector<double>> blocks(std::size_t(n), std::vector<double>{});
        std::vector<bool> have(std::size_t(n), false);
        std::int64_t received = 0;
        while (received < n) {
            const Envelope in = conn.recv_envelope();
            const std::uint32_t sender = in.header.client;
            if (sender >= std::uint32_t(n)) throw ProtocolError("sender id out of range");
            m.down_bytes_total += std::int64_t(frame_size_bytes(in.ciphertext.size()));
            std::vector<double> values =
                open_chunk_values(in, sk, cfg.precision, std::uint64_t(k), sender, guard);
            if (have[sender]) throw ProtocolError("duplicate block for sender");
            have[sender] = true;
            blocks[sender] = std::move(values);
            ++received;
        }
        for (std::int64_t b = 0; b < n; ++b)
            apply_permk_block(x, a.buckets[std::size_t(b)], blocks[std::size_t(b)], scale);

        const auto [fx, gn] = snapshot();
        m.fx = fx;
        m.grad_norm_sq = gn;
        m.up_bytes_per_client = double(m.up_bytes_total);
        m.down_bytes_per_client = double(m.down_bytes_total);
        m.nominal_down_bytes_per_client = 0.0;
        for (std::int64_t b = 0; b < n; ++b)
            m.nominal_down_bytes_per_client += double(nominal_message_bytes(
                std::int64_t(a.buckets[std::size_t(b)].size()), cfg.precision, true));
        m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        m.diverged = !std::isfinite(gn) || (gn0 > 0.0 && gn > cfg.divergence_factor * gn0);
        res.rounds.push_back(m);
        if (cfg.record_iterates) {
            std::vector<double> xd;
            xd.reserve(x.size());
            for (const S& v : x) xd.push_back(scalar_to_double(v));
            res.iterates.push_back(std::move(xd));
        }
        if (m.diverged) {
            res.diverged = true;
            break;
        }
    }
    res.final_x.clear();
    for (const S& v : x) res.final_x.push_back(scalar_to_double(v));
    if (!res.rounds.empty()) {
        res.final_fx = res.rounds.back().fx;
        res.final_grad_norm_sq = res.rounds.back().grad_norm_sq;
    }
    return res;
}

}  // namespace

RunResult run_permk_aes_client(const Problem& p, const ClientOptions& opt, TcpClient& conn) {
    switch (opt.run.precision) {
        case Precision::fp64: return run_client_t<double>(p, opt, conn);
        case Precision::fp32: return run_client_t<float>(p, opt, conn);
        case Precision::fp16: return run_client_t<Half>(p, opt, conn);
    }
    throw std::invalid_argument("unknown precision");
}

}  // namespace pfl
