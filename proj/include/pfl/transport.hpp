#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "pfl/secenv.hpp"

namespace pfl {

// Framed envelope, little-endian:
//   "PFE1" | version (1B) | round (8B) | client (4B) | payload len (4B)
//   | nonce (16B) | tag (16B) | ciphertext
inline constexpr char kFrameMagic[4] = {'P', 'F', 'E', '1'};
inline constexpr std::uint32_t kMaxFramePayload = 64u << 20;

std::vector<std::uint8_t> frame_encode(const Envelope& env);

enum class DecodeStatus { ok, need_more, bad_magic, bad_version, too_large };

struct DecodeResult {
    DecodeStatus status = DecodeStatus::need_more;
    std::size_t consumed = 0;  // bytes consumed from the buffer (0 unless ok)
    Envelope envelope;
};

// Incremental: partial buffers return need_more without consuming anything.
DecodeResult frame_decode(const std::uint8_t* data, std::size_t len);

inline std::size_t frame_size_bytes(std::size_t payload) { return 4 + 17 + 32 + payload; }

// In-process hub for deterministic tests. Holds no keys, parses nothing past
// the plaintext frame prefix.
class LoopbackHub {
public:
    LoopbackHub(int n_clients, bool eager) : n_(n_clients), eager_(eager), inbox_(std::size_t(n_clients)) {}

    // a client hands its round frame to the hub
    void submit(std::uint32_t from_client, const std::vector<std::uint8_t>& frame);

    // frames queued for a client, in forwarding order
    std::deque<std::vector<std::uint8_t>>& inbox(std::uint32_t client) {
        return inbox_.at(client);
    }

    std::int64_t bytes_up() const { return bytes_up_; }
    std::int64_t bytes_down() const { return bytes_down_; }

private:
    void forward(const std::vector<std::uint8_t>& frame);

    int n_;
    bool eager_;
    std::vector<std::deque<std::vector<std::uint8_t>>> inbox_;
    std::map<std::uint64_t, std::vector<std::vector<std::uint8_t>>> pending_;  // round -> frames
    std::int64_t bytes_up_ = 0;
    std::int64_t bytes_down_ = 0;
};

// TCP hub: accepts n clients, forwards every received frame to all clients
// (eager) or after the whole round arrived (barrier). Never decrypts.
class TcpHub {
public:
    struct Options {
        int n_clients = 1;
        std::int64_t rounds = 1;
        bool eager = true;
    };

    TcpHub(const std::string& host, std::uint16_t port, Options opt);
    ~TcpHub();

    std::uint16_t port() const { return port_; }

    // blocking: returns when all rounds are forwarded or a client fails
    void serve();

    std::int64_t bytes_up() const { return bytes_up_; }
    std::int64_t bytes_down() const { return bytes_down_; }

private:
    void broadcast(const std::vector<std::uint8_t>& frame);

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    Options opt_;
    std::vector<int> client_fds_;
    std::int64_t bytes_up_ = 0;
    std::int64_t bytes_down_ = 0;
};

// Client side of the byte-stream transport.
class TcpClient {
public:
    TcpClient(const std::string& host, std::uint16_t port, int retries = 50);
    ~TcpClient();

    void send_frame(const std::vector<std::uint8_t>& frame);
    Envelope recv_envelope();

private:
    int fd_ = -1;
    std::vector<std::uint8_t> buffer_;
};

}  // namespace pfl
