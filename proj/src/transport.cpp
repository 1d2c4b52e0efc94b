#include "pfl/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

#include "pfl/bytes.hpp"
#include "pfl/compress.hpp"

namespace pfl {

std::vector<std::uint8_t> frame_encode(const Envelope& env) {
    std::vector<std::uint8_t> out;
    out.reserve(frame_size_bytes(env.ciphertext.size()));
    out.insert(out.end(), kFrameMagic, kFrameMagic + 4);
    const auto header = env.header.serialize();
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), env.nonce.begin(), env.nonce.end());
    out.insert(out.end(), env.tag.begin(), env.tag.end());
    out.insert(out.end(), env.ciphertext.begin(), env.ciphertext.end());
    return out;
}

DecodeResult frame_decode(const std::uint8_t* data, std::size_t len) {
    DecodeResult r;
    if (len < 4) return r;  // need_more
    if (std::memcmp(data, kFrameMagic, 4) != 0) {
        r.status = DecodeStatus::bad_magic;
        return r;
    }
    if (len < 4 + 17) return r;
    const EnvelopeHeader h = EnvelopeHeader::deserialize(data + 4);
    if (h.version != 1) {
        r.status = DecodeStatus::bad_version;
        return r;
    }
    if (h.payload_len > kMaxFramePayload) {
        r.status = DecodeStatus::too_large;
        return r;
    }
    const std::size_t total = frame_size_bytes(h.payload_len);
    if (len < total) return r;
    r.status = DecodeStatus::ok;
    r.consumed = total;
    r.envelope.header = h;
    std::memcpy(r.envelope.nonce.data(), data + 21, 16);
    std::memcpy(r.envelope.tag.data(), data + 37, 16);
    r.envelope.ciphertext.assign(data + 53, data + total);
    return r;
}

void LoopbackHub::submit(std::uint32_t from_client, const std::vector<std::uint8_t>& frame) {
    const DecodeResult d = frame_decode(frame.data(), frame.size());
    if (d.status != DecodeStatus::ok) throw ProtocolError("hub: malformed frame");
    if (d.envelope.header.client != from_client) throw ProtocolError("hub: sender id mismatch");
    bytes_up_ += std::int64_t(frame.size());
    if (eager_) {
        forward(frame);
        return;
    }
    auto& bucket = pending_[d.envelope.header.round];
    bucket.push_back(frame);
    if (std::int64_t(bucket.size()) == n_) {
        for (const auto& f : bucket) forward(f);
        pending_.erase(d.envelope.header.round);
    }
}

void LoopbackHub::forward(const std::vector<std::uint8_t>& frame) {
    for (auto& box : inbox_) {
        box.push_back(frame);
        bytes_down_ += std::int64_t(frame.size());
    }
}

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        const ssize_t w = ::write(fd, data + off, len - off);
        if (w <= 0) {
            if (w < 0 && errno == EINTR) continue;
            throw ProtocolError("socket write failed");
        }
        off += std::size_t(w);
    }
}

}  // namespace

TcpHub::TcpHub(const std::string& host, std::uint16_t port, Options opt) : opt_(opt) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("bad listen address " + host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw std::runtime_error("bind failed");
    if (::listen(listen_fd_, opt.n_clients) != 0) throw std::runtime_error("listen failed");
    socklen_t alen = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
}

TcpHub::~TcpHub() {
    for (int fd : client_fds_)
        if (fd >= 0) ::close(fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpHub::broadcast(const std::vector<std::uint8_t>& frame) {
    // fan-out is atomic per frame: the single service thread writes the
    // whole frame to each client before touching the next frame
    for (int fd : client_fds_) {
        write_all(fd, frame.data(), frame.size());
        bytes_down_ += std::int64_t(frame.size());
    }
}

void TcpHub::serve() {
    while (std::int64_t(client_fds_.size()) < opt_.n_clients) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) throw std::runtime_error("accept failed");
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        client_fds_.push_back(fd);
    }

    std::vector<std::vector<std::uint8_t>> buffers(client_fds_.size());
    std::vector<std::uint64_t> frames_seen(client_fds_.size(), 0);
    // connections identify themselves through the first frame's plaintext
    // header; arrival order is not the client id order
    std::vector<std::int64_t> conn_client(client_fds_.size(), -1);
    std::vector<bool> id_taken(client_fds_.size(), false);
    std::map<std::uint64_t, std::vector<std::vector<std::uint8_t>>> pending;
    std::int64_t broadcast_count = 0;
    const std::int64_t target = opt_.rounds * opt_.n_clients;

    while (broadcast_count < target) {
        std::vector<pollfd> fds;
        for (int fd : client_fds_) fds.push_back({fd, POLLIN, 0});
        if (::poll(fds.data(), fds.size(), 30000) <= 0)
            throw ProtocolError("hub: poll timeout or failure mid-round");
        for (std::size_t c = 0; c < fds.size(); ++c) {
            if (!(fds[c].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            std::uint8_t tmp[65536];
            const ssize_t r = ::read(client_fds_[c], tmp, sizeof tmp);
            if (r < 0 && errno == EINTR) continue;
            if (r <= 0) throw ProtocolError("hub: client disconnected mid-round");
            buffers[c].insert(buffers[c].end(), tmp, tmp + r);
            for (;;) {
                const DecodeResult d = frame_decode(buffers[c].data(), buffers[c].size());
                if (d.status == DecodeStatus::need_more) break;
                if (d.status != DecodeStatus::ok) throw ProtocolError("hub: framing error");
                const std::uint32_t sender = d.envelope.header.client;
                if (conn_client[c] < 0) {
                    if (sender >= client_fds_.size() || id_taken[sender])
                        throw ProtocolError("hub: invalid or duplicate client id");
                    conn_client[c] = std::int64_t(sender);
                    id_taken[sender] = true;
                } else if (std::int64_t(sender) != conn_client[c]) {
                    throw ProtocolError("hub: sender id mismatch");
                }
                if (d.envelope.header.round != frames_seen[c])
                    throw ProtocolError("hub: client round mismatch");
                ++frames_seen[c];
                const std::vector<std::uint8_t> frame(buffers[c].begin(),
                                                      buffers[c].begin() + std::ptrdiff_t(d.consumed));
                buffers[c].erase(buffers[c].begin(), buffers[c].begin() + std::ptrdiff_t(d.consumed));
                bytes_up_ += std::int64_t(frame.size());
                if (opt_.eager) {
                    broadcast(frame);
                    ++broadcast_count;
                } else {
                    auto& bucket = pending[d.envelope.header.round];
                    bucket.push_back(frame);
                    if (std::int64_t(bucket.size()) == opt_.n_clients) {
                        for (const auto& f : bucket) {
                            broadcast(f);
                            ++broadcast_count;
                        }
                        pending.erase(d.envelope.header.round);
                    }
                }
            }
        }
    }
}

TcpClient::TcpClient(const std::string& host, std::uint16_t port, int retries) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("bad connect address " + host);
    for (int attempt = 0;; ++attempt) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
        ::close(fd_);
        fd_ = -1;
        if (attempt >= retries) throw std::runtime_error("connect failed");
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpClient::~TcpClient() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpClient::send_frame(const std::vector<std::uint8_t>& frame) {
    write_all(fd_, frame.data(), frame.size());
}

Envelope TcpClient::recv_envelope() {
    for (;;) {
        const DecodeResult d = frame_decode(buffer_.data(), buffer_.size());
        if (d.status == DecodeStatus::ok) {
            buffer_.erase(buffer_.begin(), buffer_.begin() + std::ptrdiff_t(d.consumed));
            return d.envelope;
        }
        if (d.status != DecodeStatus::need_more) throw ProtocolError("client: framing error");
        std::uint8_t tmp[65536];
        const ssize_t r = ::read(fd_, tmp, sizeof tmp);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) throw ProtocolError("client: connection closed mid-round");
        buffer_.insert(buffer_.end(), tmp, tmp + r);
    }
}

}  // namespace pfl
