#pragma once

#include "pfl/engine.hpp"
#include "pfl/transport.hpp"

namespace pfl {

// One DCGD/PermK/AES participant driving its iterate over a byte-stream
// transport.
// Uses the same protocol kernels as the in-memory engine, so a no-drop
// multi-process run reproduces the in-memory trajectory bitwise.
struct ClientOptions {
    RunConfig run;  // algorithm must be dcgd_permk_aes; key_seed required
    std::uint32_t client_id = 0;
};

RunResult run_permk_aes_client(const Problem& p, const ClientOptions& opt, TcpClient& conn);

}  // namespace pfl
