#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pfl {

enum class TaskKind {
    source,
    sink,
    compute,
    encrypt,
    send_up,
    broadcast,
    decrypt_verify,
    apply_update,
};

std::string to_string(TaskKind k);

inline bool is_transfer(TaskKind k) { return k == TaskKind::send_up || k == TaskKind::broadcast; }
inline bool is_compute_like(TaskKind k) {
    return k == TaskKind::compute || k == TaskKind::encrypt || k == TaskKind::decrypt_verify ||
           k == TaskKind::apply_update;
}

struct Task {
    TaskKind kind = TaskKind::compute;
    std::int32_t client = -1;  // -1: master
    std::int64_t round = -1;
    std::int32_t block = -1;
    double cycles = 0.0;             // compute-like kinds
    std::int64_t message_bytes = 0;  // transfer kinds
    std::int32_t parallel_cap = 1;   // cores this task can use
};

struct Edge {
    std::int32_t from = 0;
    std::int32_t to = 0;
};

// Weighted task DAG; the weight of every out-edge of u is u's duration, so
// durations live on vertices. A single source precedes every vertex and
// every vertex precedes a single sink, both with zero duration.
struct TaskGraph {
    std::vector<Task> tasks;
    std::vector<Edge> edges;
    std::int32_t source = -1;
    std::int32_t sink = -1;
    std::int64_t n_clients = 0;
    std::int64_t rounds = 0;
    // worst-case concurrent flows the protocol can place on each shared
    // link direction; the naive schedule charges this sharing to every
    // transfer and refinement relaxes it to the measured overlap
    std::int64_t max_up_flows = 1;
    std::int64_t max_down_flows = 1;

    std::vector<std::vector<std::int32_t>> adjacency() const;
};

struct ResourceModel {
    std::int32_t cores = 10;
    double frequency_hz = 3.2e9;
    double flops_peak = 238.41e9;  // reported capability; informational
    double add_cost = 1.0;         // cycles per scalar op
    double mult_cost = 1.0;
    double memaccess_cost = 0.625;  // cycles per scalar touched (64B line / 10 cycles)
    double aes_cycles_per_byte = 1.5;
    double bandwidth_up_bytes_per_s = 41.54e6;
    double bandwidth_down_bytes_per_s = 41.54e6;
    double rtt_s = 0.028;
    int bpp = 32;  // wire bits per scalar
};

// tau = rtt/2 + d*bpp/B, bandwidth in bits/s.
double comm_delay(double d_scalars, double bpp_bits, double bandwidth_bits_per_s, double rtt_s);

// (d-1)*add + d*mult + 2d*mem cycles on one core, in seconds.
double inner_product_cost(std::int64_t d, const ResourceModel& m);

enum class SchedAlgorithm { gd, dcgd_permk_aes };

struct SchedScenario {
    SchedAlgorithm algorithm = SchedAlgorithm::gd;
    std::int64_t n = 4;
    std::int64_t d = 10000000;
    std::vector<std::int64_t> n_i{55000, 11000, 11000, 11000};
    std::int64_t rounds = 4;
};

// GD: per round Compute -> SendUp -> master aggregate (barrier) ->
// Broadcast -> ApplyUpdate -> next Compute. PermK: per (client, round) one
// partial-compute task per block feeding the client's own-block compute,
// then Encrypt -> SendUp -> per-block Broadcast to every client ->
// DecryptVerify -> ApplyUpdate; the next round's compute on a block depends
// only on that block's ApplyUpdate, so there is no whole-round barrier.
TaskGraph build_task_graph(const SchedScenario& sc, const ResourceModel& m);

struct Schedule {
    std::vector<double> start;
    std::vector<double> duration;
    double makespan = 0.0;
    std::vector<double> iteration_makespans;  // refinement trace
    bool converged = true;
};

// Longest-path start times over the explicit durations; throws on cycles.
Schedule schedule_cpm(const TaskGraph& g, const std::vector<double>& durations);

// Pessimistic baseline: every compute task at its full parallelism cap, every
// transfer at the protocol's worst-case sharing of the bottleneck link.
std::vector<double> naive_durations(const TaskGraph& g, const ResourceModel& m);

// Fixpoint loop: CPM, then re-estimate transfer durations under
// overlap-weighted fair-share bandwidth and compute durations under
// idle-core allocation, damped 50/50, until the makespan settles.
Schedule refine_schedule(const TaskGraph& g, const ResourceModel& m, int max_iters = 50,
                         double eps_rel = 1e-3);

// start(v) >= start(u) + duration(u) on every edge.
bool schedule_feasible(const TaskGraph& g, const Schedule& s);

// Vertices whose direct predecessors include uplink messages from
// all n clients of one round: the master-side whole-round join.
std::vector<std::int32_t> barrier_vertices(const TaskGraph& g);

// One longest source->sink path.
std::vector<std::int32_t> critical_path(const TaskGraph& g, const Schedule& s);

std::string export_dot(const TaskGraph& g, const Schedule& s);

}  // namespace pfl
