#include <doctest.h>

#include <cstring>
#include <set>
#include <thread>

#include "pfl/engine.hpp"
#include "pfl/node.hpp"
#include "pfl/prg.hpp"
#include "pfl/transport.hpp"

using namespace pfl;

namespace {

Envelope random_envelope(Prg& prg, std::size_t payload_len) {
    SeededEntropy entropy(prg.next_u64());
    const SecretKey sk = keygen(entropy);
    std::vector<std::uint8_t> payload(payload_len);
    entropy.fill(payload.data(), payload.size());
    EnvelopeHeader h;
    h.round = prg.next_below(1000);
    h.client = std::uint32_t(prg.next_below(64));
    return seal(sk, h, payload, entropy);
}

}  // namespace

TEST_CASE("frame round-trip on random envelopes") {
    Prg prg(808);
    for (int i = 0; i < 1000; ++i) {
        const Envelope env = random_envelope(prg, prg.next_below(300));
        const auto frame = frame_encode(env);
        const DecodeResult d = frame_decode(frame.data(), frame.size());
        REQUIRE(d.status == DecodeStatus::ok);
        CHECK(d.consumed == frame.size());
        CHECK(d.envelope == env);
    }
}

TEST_CASE("truncated buffers ask for more without consuming") {
    Prg prg(809);
    const Envelope env = random_envelope(prg, 64);
    const auto frame = frame_encode(env);
    for (std::size_t cut : {std::size_t(0), std::size_t(3), std::size_t(10), std::size_t(20),
                            frame.size() - 1}) {
        const DecodeResult d = frame_decode(frame.data(), cut);
        CHECK(d.status == DecodeStatus::need_more);
        CHECK(d.consumed == 0);
    }
}

TEST_CASE("two concatenated frames decode back to back") {
    Prg prg(810);
    const Envelope a = random_envelope(prg, 32);
    const Envelope b = random_envelope(prg, 80);
    auto buf = frame_encode(a);
    const auto fb = frame_encode(b);
    buf.insert(buf.end(), fb.begin(), fb.end());

    const DecodeResult d1 = frame_decode(buf.data(), buf.size());
    REQUIRE(d1.status == DecodeStatus::ok);
    CHECK(d1.envelope == a);
    const DecodeResult d2 = frame_decode(buf.data() + d1.consumed, buf.size() - d1.consumed);
    REQUIRE(d2.status == DecodeStatus::ok);
    CHECK(d2.envelope == b);
    CHECK(d1.consumed + d2.consumed == buf.size());
}

TEST_CASE("framing errors: bad magic, bad version, oversized declaration") {
    Prg prg(811);
    const Envelope env = random_envelope(prg, 16);
    auto frame = frame_encode(env);
    auto bad = frame;
    bad[0] = 'X';
    CHECK(frame_decode(bad.data(), bad.size()).status == DecodeStatus::bad_magic);
    bad = frame;
    bad[4] = 9;
    CHECK(frame_decode(bad.data(), bad.size()).status == DecodeStatus::bad_version);
    bad = frame;
    // declared length just over the 64 MiB cap
    const std::uint32_t huge = (64u << 20) + 1;
    for (int i = 0; i < 4; ++i) bad[17 + std::size_t(i)] = std::uint8_t(huge >> (8 * i));
    CHECK(frame_decode(bad.data(), bad.size()).status == DecodeStatus::too_large);
}

TEST_CASE("frame decoder survives arbitrary garbage without consuming") {
    Prg prg(816);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::uint8_t> junk(prg.next_below(120));
        SeededEntropy src(prg.next_u64());
        if (!junk.empty()) src.fill(junk.data(), junk.size());
        const DecodeResult d = frame_decode(junk.data(), junk.size());
        if (d.status != DecodeStatus::ok) CHECK(d.consumed == 0);
        // a failed prefix never claims more frame than the buffer holds
        if (d.status == DecodeStatus::ok) CHECK(d.consumed <= junk.size());
    }
}

TEST_CASE("loopback hub: n=1 client receives back exactly its own frame") {
    Prg prg(812);
    Envelope env = random_envelope(prg, 24);
    env.header.client = 0;
    const auto frame = frame_encode(env);
    LoopbackHub hub(1, true);
    hub.submit(0, frame);
    REQUIRE(hub.inbox(0).size() == 1);
    CHECK(hub.inbox(0).front() == frame);
    CHECK(hub.bytes_up() == std::int64_t(frame.size()));
    CHECK(hub.bytes_down() == std::int64_t(frame.size()));
}

TEST_CASE("eager and barrier modes deliver the same multiset per round") {
    Prg prg(813);
    const int n = 3;
    std::vector<std::vector<std::uint8_t>> frames;
    for (int i = 0; i < n; ++i) {
        Envelope env = random_envelope(prg, 40);
        env.header.client = std::uint32_t(i);
        env.header.round = 0;
        frames.push_back(frame_encode(env));
    }
    LoopbackHub eager(n, true), barrier(n, false);
    for (int i = 0; i < n; ++i) {
        eager.submit(std::uint32_t(i), frames[std::size_t(i)]);
        barrier.submit(std::uint32_t(i), frames[std::size_t(i)]);
    }
    for (int c = 0; c < n; ++c) {
        auto& be = eager.inbox(std::uint32_t(c));
        auto& bb = barrier.inbox(std::uint32_t(c));
        std::multiset<std::vector<std::uint8_t>> se(be.begin(), be.end());
        std::multiset<std::vector<std::uint8_t>> sb(bb.begin(), bb.end());
        CHECK(se == sb);
    }
    CHECK(eager.bytes_down() == barrier.bytes_down());
}

TEST_CASE("barrier mode holds frames until the whole round arrived") {
    Prg prg(814);
    LoopbackHub hub(2, false);
    Envelope e0 = random_envelope(prg, 8);
    e0.header.client = 0, e0.header.round = 0;
    hub.submit(0, frame_encode(e0));
    CHECK(hub.inbox(0).empty());
    Envelope e1 = random_envelope(prg, 8);
    e1.header.client = 1, e1.header.round = 0;
    hub.submit(1, frame_encode(e1));
    CHECK(hub.inbox(0).size() == 2);
    CHECK(hub.inbox(1).size() == 2);
}

TEST_CASE("tcp transport: full protocol run matches the in-memory engine bitwise") {
    GenParams gp;
    gp.d = 24, gp.n = 3, gp.n_i = 4, gp.seed = 15, gp.spectrum = SpectrumMode::exact;
    const Problem problem = generate_problem(gp);

    RunConfig cfg;
    cfg.algorithm = Algorithm::dcgd_permk_aes;
    cfg.rounds = 12;
    cfg.gamma = 0.02;
    cfg.compressor_seed = 21;
    cfg.x0_seed = 22;
    cfg.key_seed = 23;
    cfg.record_iterates = true;

    const RunResult reference = run(problem, cfg);

    TcpHub hub("127.0.0.1", 0, {int(problem.n), cfg.rounds, true});
    std::thread hub_thread([&] { hub.serve(); });

    std::vector<RunResult> results(std::size_t(problem.n));
    std::vector<std::thread> clients;
    for (std::int64_t i = 0; i < problem.n; ++i) {
        clients.emplace_back([&, i] {
            TcpClient conn("127.0.0.1", hub.port());
            ClientOptions opt;
            opt.run = cfg;
            opt.client_id = std::uint32_t(i);
            results[std::size_t(i)] = run_permk_aes_client(problem, opt, conn);
        });
    }
    for (auto& t : clients) t.join();
    hub_thread.join();

    for (std::int64_t i = 0; i < problem.n; ++i) {
        const RunResult& r = results[std::size_t(i)];
        REQUIRE(r.iterates.size() == reference.iterates.size());
        for (std::size_t k = 0; k < r.iterates.size(); ++k)
            CHECK(std::memcmp(r.iterates[k].data(), reference.iterates[k].data(),
                              r.iterates[k].size() * sizeof(double)) == 0);
    }
    // counter exactness: hub counters equal the sum of frame lengths
    std::int64_t expect_up = 0;
    for (const auto& m : results[0].rounds) expect_up += m.up_bytes_total;
    CHECK(hub.bytes_up() == expect_up * problem.n);
    CHECK(hub.bytes_down() == expect_up * problem.n * problem.n);
}

TEST_CASE("frame byte layout is frozen") {
    SeededEntropy entropy(99);
    const SecretKey sk = keygen(entropy);
    EnvelopeHeader h;
    h.round = 0x0102030405060708ull;
    h.client = 0x0A0B0C0Du;
    const std::vector<std::uint8_t> payload{0xDE, 0xAD, 0xBE, 0xEF};
    const Envelope env = seal(sk, h, payload, entropy);
    const auto frame = frame_encode(env);
    REQUIRE(frame.size() == 4 + 17 + 32 + 4);
    CHECK(std::memcmp(frame.data(), "PFE1", 4) == 0);
    CHECK(frame[4] == 1);  // version
    // round, little endian
    CHECK(frame[5] == 0x08);
    CHECK(frame[12] == 0x01);
    // client id
    CHECK(frame[13] == 0x0D);
    CHECK(frame[16] == 0x0A);
    // payload length
    CHECK(frame[17] == 4);
    CHECK(frame[18] == 0);
    CHECK(std::memcmp(frame.data() + 21, env.nonce.data(), 16) == 0);
    CHECK(std::memcmp(frame.data() + 37, env.tag.data(), 16) == 0);
    CHECK(std::memcmp(frame.data() + 53, env.ciphertext.data(), 4) == 0);
}

TEST_CASE("loopback full protocol run equals the in-memory engine bitwise") {
    GenParams gp;
    gp.d = 20, gp.n = 4, gp.n_i = 3, gp.seed = 16, gp.spectrum = SpectrumMode::exact;
    const Problem problem = generate_problem(gp);
    RunConfig cfg;
    cfg.algorithm = Algorithm::dcgd_permk_aes;
    cfg.rounds = 10;
    cfg.gamma = 0.02;
    cfg.compressor_seed = 31;
    cfg.x0_seed = 32;
    cfg.key_seed = 33;
    cfg.record_iterates = true;
    const RunResult reference = run(problem, cfg);

    // drive the same protocol synchronously through the loopback hub
    const std::int64_t n = problem.n;
    SeededEntropy keysrc(*cfg.key_seed);
    const SecretKey sk = keygen(keysrc);
    SystemEntropy entropy;
    LoopbackHub hub(int(n), true);
    std::vector<std::vector<double>> xs(std::size_t(n), std::vector<double>{});
    for (auto& x : xs) {
        const auto x0 = initial_iterate<double>(problem.d, cfg.x0_seed);
        x.assign(x0.begin(), x0.end());
    }
    std::vector<ReplayGuard> guards{std::size_t(n)};
    const double scale = cfg.gamma / double(n);
    for (std::int64_t k = 0; k < cfg.rounds; ++k) {
        const Assignment a = sample_assignment(problem.d, n, cfg.compressor_seed, std::uint64_t(k));
        for (std::int64_t i = 0; i < n; ++i) {
            const SparseChunk chunk = compress_permk(
                gradient_prec<double>(problem, int(i), xs[std::size_t(i)]), a, std::uint32_t(i));
            hub.submit(std::uint32_t(i),
                       frame_encode(seal_chunk(chunk, cfg.precision, std::uint64_t(k),
                                               std::uint32_t(i), sk, entropy)));
        }
        for (std::int64_t j = 0; j < n; ++j) {
            auto& box = hub.inbox(std::uint32_t(j));
            std::vector<std::vector<double>> blocks(std::size_t(n), std::vector<double>{});
            for (std::int64_t b = 0; b < n; ++b) {
                const DecodeResult d = frame_decode(box.front().data(), box.front().size());
                REQUIRE(d.status == DecodeStatus::ok);
                box.pop_front();
                blocks[d.envelope.header.client] =
                    open_chunk_values(d.envelope, sk, cfg.precision, std::uint64_t(k),
                                      d.envelope.header.client, guards[std::size_t(j)]);
            }
            for (std::int64_t b = 0; b < n; ++b)
                apply_permk_block(xs[std::size_t(j)], a.buckets[std::size_t(b)],
                                  blocks[std::size_t(b)], scale);
        }
        for (std::int64_t j = 0; j < n; ++j)
            CHECK(std::memcmp(xs[std::size_t(j)].data(), reference.iterates[std::size_t(k)].data(),
                              xs[std::size_t(j)].size() * sizeof(double)) == 0);
    }
}

TEST_CASE("hub aborts the round when a client disconnects mid-run") {
    TcpHub hub("127.0.0.1", 0, {2, 3, true});
    std::thread hub_thread([&] {
        CHECK_THROWS_AS(hub.serve(), ProtocolError);
    });
    SeededEntropy entropy(71);
    const SecretKey sk = keygen(entropy);
    TcpClient full("127.0.0.1", hub.port());
    {
        // second client sends its round-0 frame, then vanishes
        TcpClient quitter("127.0.0.1", hub.port());
        SparseChunk chunk{1, {0}, {1.0}, true};
        quitter.send_frame(frame_encode(seal_chunk(chunk, Precision::fp64, 0, 1, sk, entropy)));
    }
    SparseChunk chunk{0, {0}, {2.0}, true};
    full.send_frame(frame_encode(seal_chunk(chunk, Precision::fp64, 0, 0, sk, entropy)));
    hub_thread.join();
}

TEST_CASE("eager forwarding preserves per-sender frame order") {
    Prg prg(815);
    LoopbackHub hub(2, true);
    std::vector<std::vector<std::uint8_t>> sent;
    for (int k = 0; k < 5; ++k) {
        Envelope e = random_envelope(prg, 8);
        e.header.client = 0, e.header.round = std::uint64_t(k);
        sent.push_back(frame_encode(e));
        hub.submit(0, sent.back());
    }
    auto& box = hub.inbox(1);
    REQUIRE(box.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(box[std::size_t(k)] == sent[std::size_t(k)]);
}
