#include "pfl/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

namespace pfl {

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::gd: return "gd";
        case Algorithm::gd_aes: return "gd_aes";
        case Algorithm::dcgd_randk: return "dcgd_randk";
        case Algorithm::dcgd_randk_aes: return "dcgd_randk_aes";
        case Algorithm::dcgd_permk: return "dcgd_permk";
        case Algorithm::dcgd_permk_aes: return "dcgd_permk_aes";
        case Algorithm::fedavg: return "fedavg";
    }
    return "gd";
}

bool algorithm_from_string(const std::string& s, Algorithm& out) {
    static const std::map<std::string, Algorithm> table{
        {"gd", Algorithm::gd},
        {"gd_aes", Algorithm::gd_aes},
        {"dcgd_randk", Algorithm::dcgd_randk},
        {"dcgd_randk_aes", Algorithm::dcgd_randk_aes},
        {"dcgd_permk", Algorithm::dcgd_permk},
        {"dcgd_permk_aes", Algorithm::dcgd_permk_aes},
        {"fedavg", Algorithm::fedavg},
    };
    const auto it = table.find(s);
    if (it == table.end()) return false;
    out = it->second;
    return true;
}

void RunConfig::validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (fedavg_local_steps < 1) throw std::invalid_argument("fedavg local steps must be >= 1");
    if (randk_k < 0) throw std::invalid_argument("randk_k must be >= 0");
}

std::int64_t nominal_message_bytes(std::int64_t values, Precision prec, bool encrypted) {
    return values * bits_per_scalar(prec) / 8 + (encrypted ? kNonceTagBytes : 0);
}

std::int64_t wire_message_bytes(std::int64_t values, Precision prec, bool encrypted,
                                bool sparse_payload) {
    const std::int64_t payload =
        sparse_payload ? chunk_payload_bytes(values, prec) : values * wire_bytes_per_scalar(prec);
    return payload + (encrypted ? kFrameHeaderBytes + kNonceTagBytes : 0);
}

std::vector<double> open_chunk_values(const Envelope& env, const SecretKey& sk, Precision prec,
                                      std::uint64_t expected_round, std::uint32_t expected_client,
                                      ReplayGuard& guard) {
    if (env.header.client != expected_client) throw ProtocolError("unexpected sender id");
    if (env.header.round != expected_round) throw ProtocolError("round mismatch");
    const auto pt = open(sk, env);
    if (!pt) throw ProtocolError("authentication failure: halting training");
    if (!guard.accept(env.header.client, env.header.round, expected_round))
        throw ProtocolError("replayed envelope");
    return decode_chunk_payload(*pt, prec);
}

namespace {

struct Traffic {
    std::int64_t up_wire = 0, down_wire = 0;
    double up_nominal = 0.0, down_nominal = 0.0;  // totals
};

template <class S>
std::vector<double> to_double_vec(const std::vector<S>& x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (const S& v : x) out.push_back(scalar_to_double(v));
    return out;
}

struct PhaseMs {
    double grad = 0.0, crypto = 0.0, apply = 0.0;
};

class PhaseTimer {
public:
    explicit PhaseTimer(double& acc) : acc_(acc), t0_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        acc_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
                    .count();
    }

private:
    double& acc_;
    std::chrono::steady_clock::time_point t0_;
};

template <class S>
class Simulation {
public:
    Simulation(const Problem& p, const RunConfig& cfg) : p_(p), cfg_(cfg), d_(p.d), n_(p.n) {
        cfg.validate();
        k_rand_ = cfg.randk_k > 0 ? cfg.randk_k : std::max<std::int64_t>(1, d_ / 5);
        if (k_rand_ > d_) throw std::invalid_argument("randk_k exceeds d");
        std::vector<S> x0;
        if (cfg.x0.empty()) {
            x0 = initial_iterate<S>(d_, cfg.x0_seed);
        } else {
            if (std::int64_t(cfg.x0.size()) != d_)
                throw std::invalid_argument("x0 has wrong length");
            for (double v : cfg.x0) x0.push_back(scalar_from_double<S>(v));
        }
        xs_.assign(std::size_t(n_), x0);
        if (uses_aes(cfg.algorithm)) {
            if (cfg.key_seed) {
                SeededEntropy seeded(*cfg.key_seed);
                sk_ = keygen(seeded);
            } else {
                sk_ = keygen(entropy_);
            }
        }
        guards_.resize(std::size_t(n_));
    }

    RunResult run() {
        RunResult res;
        const auto [f0, gn0] = snapshot();
        initial_grad_norm_sq_ = gn0;
        (void)f0;
        for (std::int64_t k = 0; k < cfg_.rounds; ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            phases_ = PhaseMs{};
            Traffic traffic;
            switch (cfg_.algorithm) {
                case Algorithm::gd:
                case Algorithm::gd_aes: traffic = round_gd(k); break;
                case Algorithm::dcgd_randk:
                case Algorithm::dcgd_randk_aes: traffic = round_randk(k); break;
                case Algorithm::dcgd_permk:
                case Algorithm::dcgd_permk_aes: traffic = round_permk(k); break;
                case Algorithm::fedavg: traffic = round_fedavg(k); break;
            }
            const auto t1 = std::chrono::steady_clock::now();

            RoundMetrics m;
            m.round = k;
            const auto [fx, gn] = snapshot();
            m.fx = fx;
            m.grad_norm_sq = gn;
            m.up_bytes_total = traffic.up_wire;
            m.down_bytes_total = traffic.down_wire;
            m.up_bytes_per_client = double(traffic.up_wire) / double(n_);
            m.down_bytes_per_client = double(traffic.down_wire) / double(n_);
            m.nominal_up_bytes_per_client = traffic.up_nominal / double(n_);
            m.nominal_down_bytes_per_client = traffic.down_nominal / double(n_);
            m.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            m.grad_ms = phases_.grad;
            m.crypto_ms = phases_.crypto;
            m.apply_ms = phases_.apply;
            m.diverged = !std::isfinite(gn) ||
                         (initial_grad_norm_sq_ > 0.0 &&
                          gn > cfg_.divergence_factor * initial_grad_norm_sq_);
            for (std::int64_t j = 1; j < n_; ++j)
                if (!(xs_[std::size_t(j)] == xs_[0])) res.replicas_identical = false;
            res.rounds.push_back(m);
            if (cfg_.record_iterates) res.iterates.push_back(to_double_vec(xs_[0]));
            if (m.diverged) {
                res.diverged = true;
                break;
            }
        }
        res.final_x = to_double_vec(xs_[0]);
        if (!res.rounds.empty()) {
            res.final_fx = res.rounds.back().fx;
            res.final_grad_norm_sq = res.rounds.back().grad_norm_sq;
        }
        return res;
    }

private:
    std::pair<double, double> snapshot() const {
        const std::vector<double> x = to_double_vec(xs_[0]);
        return objective_and_gradnorm(p_, Eigen::Map<const Eigen::VectorXd>(x.data(),
                                                                            std::int64_t(x.size())));
    }

    // baseline round: master averages and broadcasts; in the encrypted
    // variant it concatenates and every client decrypts + averages locally
    Traffic round_gd(std::int64_t k) {
        const bool enc = cfg_.algorithm == Algorithm::gd_aes;
        std::vector<SparseChunk> chunks;
        chunks.reserve(std::size_t(n_));
        {
            PhaseTimer grad_timer(phases_.grad);
            for (std::int64_t i = 0; i < n_; ++i)
                chunks.push_back(compress_identity(gradient_prec<S>(p_, int(i), xs_[std::size_t(i)]),
                                                   std::uint32_t(i)));
        }

        Traffic t;
        const std::int64_t up_msg = wire_message_bytes(d_, cfg_.precision, enc, enc);
        t.up_wire = n_ * up_msg;
        t.up_nominal = double(n_) * double(nominal_message_bytes(d_, cfg_.precision, enc));

        if (!enc) {
            PhaseTimer apply_timer(phases_.apply);
            const std::vector<S> ghat = assemble<S>(chunks, d_, n_, false);
            for (auto& x : xs_) apply_dense_step(x, ghat, cfg_.gamma);
            t.down_wire = n_ * wire_message_bytes(d_, cfg_.precision, false, false);
            t.down_nominal = double(n_) * double(nominal_message_bytes(d_, cfg_.precision, false));
            return t;
        }

        std::vector<Envelope> bag;
        bag.reserve(std::size_t(n_));
        {
            PhaseTimer crypto_timer(phases_.crypto);
            for (std::int64_t i = 0; i < n_; ++i)
                bag.push_back(seal_chunk(chunks[std::size_t(i)], cfg_.precision, std::uint64_t(k),
                                         std::uint32_t(i), *sk_, entropy_));
        }
        // the master concatenates without reading; every client opens all n
        for (std::int64_t j = 0; j < n_; ++j) {
            std::vector<SparseChunk> decoded;
            decoded.reserve(std::size_t(n_));
            {
                PhaseTimer crypto_timer(phases_.crypto);
                for (std::int64_t i = 0; i < n_; ++i) {
                    std::vector<double> values =
                        open_chunk_values(bag[std::size_t(i)], *sk_, cfg_.precision,
                                          std::uint64_t(k), std::uint32_t(i),
                                          guards_[std::size_t(j)]);
                    if (std::int64_t(values.size()) != d_)
                        throw ProtocolError("bad dense chunk size");
                    SparseChunk c;
                    c.owner = std::uint32_t(i);
                    c.scale_applied = true;
                    c.indices.resize(std::size_t(d_));
                    for (std::int64_t q = 0; q < d_; ++q)
                        c.indices[std::size_t(q)] = std::uint32_t(q);
                    c.values = std::move(values);
                    decoded.push_back(std::move(c));
                }
            }
            PhaseTimer apply_timer(phases_.apply);
            const std::vector<S> ghat = assemble<S>(decoded, d_, n_, false);
            apply_dense_step(xs_[std::size_t(j)], ghat, cfg_.gamma);
        }
        t.down_wire = n_ * n_ * up_msg;
        t.down_nominal = double(n_) * double(n_) *
                       double(nominal_message_bytes(d_, cfg_.precision, true));
        return t;
    }

    Traffic round_randk(std::int64_t k) {
        const bool enc = cfg_.algorithm == Algorithm::dcgd_randk_aes;
        std::vector<SparseChunk> chunks;
        chunks.reserve(std::size_t(n_));
        {
            PhaseTimer grad_timer(phases_.grad);
            for (std::int64_t i = 0; i < n_; ++i) {
                Prg prg(cfg_.compressor_seed, std::uint64_t(k), std::uint64_t(i));
                chunks.push_back(compress_randk(gradient_prec<S>(p_, int(i), xs_[std::size_t(i)]),
                                                k_rand_, prg, std::uint32_t(i)));
            }
        }

        Traffic t;
        const std::int64_t up_msg = wire_message_bytes(k_rand_, cfg_.precision, enc, true);
        t.up_wire = n_ * up_msg;
        t.up_nominal = double(n_) * double(nominal_message_bytes(k_rand_, cfg_.precision, enc));

        if (!enc) {
            PhaseTimer apply_timer(phases_.apply);
            const std::vector<S> ghat = assemble<S>(chunks, d_, n_, false);
            for (auto& x : xs_) apply_dense_step(x, ghat, cfg_.gamma);
            t.down_wire = n_ * wire_message_bytes(d_, cfg_.precision, false, false);
            t.down_nominal = double(n_) * double(nominal_message_bytes(d_, cfg_.precision, false));
            return t;
        }

        std::vector<Envelope> bag;
        bag.reserve(std::size_t(n_));
        {
            PhaseTimer crypto_timer(phases_.crypto);
            for (std::int64_t i = 0; i < n_; ++i)
                bag.push_back(seal_chunk(chunks[std::size_t(i)], cfg_.precision, std::uint64_t(k),
                                         std::uint32_t(i), *sk_, entropy_));
        }
        for (std::int64_t j = 0; j < n_; ++j) {
            std::vector<SparseChunk> decoded;
            decoded.reserve(std::size_t(n_));
            {
                PhaseTimer crypto_timer(phases_.crypto);
                for (std::int64_t i = 0; i < n_; ++i) {
                    std::vector<double> values =
                        open_chunk_values(bag[std::size_t(i)], *sk_, cfg_.precision,
                                          std::uint64_t(k), std::uint32_t(i),
                                          guards_[std::size_t(j)]);
                    // indices are never on the wire; re-derive from the shared seed
                    Prg prg(cfg_.compressor_seed, std::uint64_t(k), std::uint64_t(i));
                    std::vector<std::uint32_t> idx =
                        prg.sample_without_replacement(std::uint32_t(d_), std::uint32_t(k_rand_));
                    std::sort(idx.begin(), idx.end());
                    if (idx.size() != values.size()) throw ProtocolError("bad sparse chunk size");
                    SparseChunk c;
                    c.owner = std::uint32_t(i);
                    c.scale_applied = true;
                    c.indices = std::move(idx);
                    c.values = std::move(values);
                    decoded.push_back(std::move(c));
                }
            }
            PhaseTimer apply_timer(phases_.apply);
            const std::vector<S> ghat = assemble<S>(decoded, d_, n_, false);
            apply_dense_step(xs_[std::size_t(j)], ghat, cfg_.gamma);
        }
        t.down_wire = n_ * n_ * up_msg;
        t.down_nominal =
            double(n_) * double(n_) * double(nominal_message_bytes(k_rand_, cfg_.precision, true));
        return t;
    }

    // PermK round: concatenate, then per-block iterate updates.
    Traffic round_permk(std::int64_t k) {
        const bool enc = cfg_.algorithm == Algorithm::dcgd_permk_aes;
        const Assignment a = sample_assignment(d_, n_, cfg_.compressor_seed, std::uint64_t(k));
        std::vector<SparseChunk> chunks;
        chunks.reserve(std::size_t(n_));
        {
            PhaseTimer grad_timer(phases_.grad);
            for (std::int64_t i = 0; i < n_; ++i)
                chunks.push_back(compress_permk(gradient_prec<S>(p_, int(i), xs_[std::size_t(i)]), a,
                                                std::uint32_t(i)));
        }

        Traffic t;
        for (std::int64_t i = 0; i < n_; ++i) {
            const std::int64_t m = std::int64_t(a.buckets[std::size_t(i)].size());
            t.up_wire += wire_message_bytes(m, cfg_.precision, enc, true);
            t.up_nominal += double(nominal_message_bytes(m, cfg_.precision, enc));
        }
        t.down_wire = n_ * t.up_wire;
        t.down_nominal = double(n_) * t.up_nominal;
        if (!enc) {
            // unencrypted broadcast of the concatenated sparse chunks
            PhaseTimer apply_timer(phases_.apply);
            const S scale = permk_step_scale<S>(cfg_.gamma, n_);
            for (auto& x : xs_)
                for (std::int64_t b = 0; b < n_; ++b)
                    apply_permk_block(x, a.buckets[std::size_t(b)], chunks[std::size_t(b)].values,
                                      scale);
            return t;
        }

        std::vector<Envelope> bag;
        bag.reserve(std::size_t(n_));
        {
            PhaseTimer crypto_timer(phases_.crypto);
            for (std::int64_t i = 0; i < n_; ++i)
                bag.push_back(seal_chunk(chunks[std::size_t(i)], cfg_.precision, std::uint64_t(k),
                                         std::uint32_t(i), *sk_, entropy_));
        }
        const S scale = permk_step_scale<S>(cfg_.gamma, n_);
        for (std::int64_t j = 0; j < n_; ++j) {
            for (std::int64_t b = 0; b < n_; ++b) {
                std::vector<double> values;
                {
                    PhaseTimer crypto_timer(phases_.crypto);
                    values = open_chunk_values(bag[std::size_t(b)], *sk_, cfg_.precision,
                                               std::uint64_t(k), std::uint32_t(b),
                                               guards_[std::size_t(j)]);
                }
                PhaseTimer apply_timer(phases_.apply);
                apply_permk_block(xs_[std::size_t(j)], a.buckets[std::size_t(b)], values, scale);
            }
        }
        return t;
    }

    Traffic round_fedavg(std::int64_t /*k*/) {
        const double local_gamma =
            cfg_.fedavg_local_gamma > 0.0 ? cfg_.fedavg_local_gamma : cfg_.gamma;
        std::vector<SparseChunk> models;
        models.reserve(std::size_t(n_));
        {
            PhaseTimer grad_timer(phases_.grad);
            for (std::int64_t i = 0; i < n_; ++i) {
                std::vector<S> y = xs_[std::size_t(i)];
                for (std::int64_t step = 0; step < cfg_.fedavg_local_steps; ++step)
                    apply_dense_step(y, gradient_prec<S>(p_, int(i), y), local_gamma);
                models.push_back(compress_identity(y, std::uint32_t(i)));
            }
        }
        PhaseTimer apply_timer(phases_.apply);
        const std::vector<S> avg = assemble<S>(models, d_, n_, false);
        for (auto& x : xs_) x = avg;

        Traffic t;
        t.up_wire = n_ * wire_message_bytes(d_, cfg_.precision, false, false);
        t.up_nominal = double(n_) * double(nominal_message_bytes(d_, cfg_.precision, false));
        t.down_wire = t.up_wire;
        t.down_nominal = t.up_nominal;
        return t;
    }

    const Problem& p_;
    const RunConfig& cfg_;
    std::int64_t d_, n_, k_rand_ = 0;
    std::vector<std::vector<S>> xs_;
    std::optional<SecretKey> sk_;
    SystemEntropy entropy_;
    std::vector<ReplayGuard> guards_;
    double initial_grad_norm_sq_ = 0.0;
    PhaseMs phases_;
};

}  // namespace

RunResult run(const Problem& p, const RunConfig& cfg) {
    switch (cfg.precision) {
        case Precision::fp64: return Simulation<double>(p, cfg).run();
        case Precision::fp32: return Simulation<float>(p, cfg).run();
        case Precision::fp16: return Simulation<Half>(p, cfg).run();
    }
    throw std::invalid_argument("unknown precision");
}

TuneReport tune_step_size(const Problem& p, const RunConfig& base, const std::vector<double>& grid,
                          const std::vector<std::uint64_t>& seeds) {
    if (grid.empty()) throw std::invalid_argument("gamma grid is empty");
    if (seeds.empty()) throw std::invalid_argument("seed list is empty");
    TuneReport report;
    double best_mean = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double gamma : grid) {
        bool any_diverged = false;
        double mean = 0.0;
        for (std::uint64_t seed : seeds) {
            RunConfig cfg = base;
            cfg.gamma = gamma;
            cfg.compressor_seed = seed;
            const RunResult r = run(p, cfg);
            report.entries.push_back({gamma, seed, r.diverged, r.final_grad_norm_sq});
            if (r.diverged)
                any_diverged = true;
            else
                mean += r.final_grad_norm_sq / double(seeds.size());
        }
        if (any_diverged) {
            report.diverged_gammas.push_back(gamma);
        } else if (mean < best_mean) {
            best_mean = mean;
            report.best_gamma = gamma;
            found = true;
        }
    }
    if (!found) throw TuningError("every step size in the grid diverged");
    return report;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "round,fx,grad_norm_sq,up_bytes_total,down_bytes_total,up_bytes_per_client,"
           "down_bytes_per_client,nominal_up_bytes_per_client,nominal_down_bytes_per_client,"
           "diverged,wall_ms\n";
    char buf[512];
    for (const RoundMetrics& m : rows) {
        std::snprintf(buf, sizeof buf,
                      "%lld,%.17g,%.17g,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%d,%.3f\n",
                      (long long)m.round, m.fx, m.grad_norm_sq, (long long)m.up_bytes_total,
                      (long long)m.down_bytes_total, m.up_bytes_per_client,
                      m.down_bytes_per_client, m.nominal_up_bytes_per_client,
                      m.nominal_down_bytes_per_client, int(m.diverged), m.wall_ms);
        out << buf;
    }
}

void write_iterates_csv(const std::string& path, const std::vector<std::vector<double>>& iterates) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    char buf[64];
    for (std::size_t k = 0; k < iterates.size(); ++k) {
        out << k;
        for (double v : iterates[k]) {
            std::snprintf(buf, sizeof buf, ",%a", v);
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace pfl
