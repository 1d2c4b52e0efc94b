#include "pfl/sched.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace pfl {

std::string to_string(TaskKind k) {
    switch (k) {
        case TaskKind::source: return "source";
        case TaskKind::sink: return "sink";
        case TaskKind::compute: return "compute";
        case TaskKind::encrypt: return "encrypt";
        case TaskKind::send_up: return "send_up";
        case TaskKind::broadcast: return "broadcast";
        case TaskKind::decrypt_verify: return "decrypt_verify";
        case TaskKind::apply_update: return "apply_update";
    }
    return "?";
}

std::vector<std::vector<std::int32_t>> TaskGraph::adjacency() const {
    std::vector<std::vector<std::int32_t>> adj(tasks.size());
    for (const Edge& e : edges) adj[std::size_t(e.from)].push_back(e.to);
    return adj;
}

double comm_delay(double d_scalars, double bpp_bits, double bandwidth_bits_per_s, double rtt_s) {
    if (bandwidth_bits_per_s <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    return rtt_s / 2.0 + d_scalars * bpp_bits / bandwidth_bits_per_s;
}

double inner_product_cost(std::int64_t d, const ResourceModel& m) {
    if (d < 1) throw std::invalid_argument("inner product needs d >= 1");
    const double cycles =
        double(d - 1) * m.add_cost + double(d) * m.mult_cost + 2.0 * double(d) * m.memaccess_cost;
    return cycles / m.frequency_hz;
}

namespace {

double matvec_cycles(std::int64_t rows, std::int64_t len, const ResourceModel& m) {
    return double(rows) * (double(len - 1) * m.add_cost + double(len) * m.mult_cost +
                           2.0 * double(len) * m.memaccess_cost);
}

// full gradient (2/n_i) A^T (A x - b): two matvecs, a vector subtract and a
// final scaling, as a sequence of inner products
double gradient_cycles(std::int64_t n_i, std::int64_t d, const ResourceModel& m) {
    return matvec_cycles(n_i, d, m) + double(n_i) * (m.add_cost + 2.0 * m.memaccess_cost) +
           matvec_cycles(d, n_i, m) + double(d) * (m.mult_cost + 2.0 * m.memaccess_cost);
}

double axpy_cycles(std::int64_t len, const ResourceModel& m) {
    return double(len) * (m.add_cost + m.mult_cost + 2.0 * m.memaccess_cost);
}

std::int64_t block_size(std::int64_t d, std::int64_t n, std::int64_t b) {
    return d / n + (b < d % n ? 1 : 0);
}

}  // namespace

TaskGraph build_task_graph(const SchedScenario& sc, const ResourceModel& m) {
    if (sc.rounds < 1 || sc.n < 1 || std::int64_t(sc.n_i.size()) != sc.n)
        throw std::invalid_argument("bad scenario");
    const std::int64_t n = sc.n, d = sc.d, r = sc.rounds;
    const double scalar_bytes = double(m.bpp) / 8.0;

    TaskGraph g;
    g.n_clients = n;
    g.rounds = r;
    g.max_up_flows = n;
    // eager per-block forwarding can put one flow per (block, receiver) pair
    // in flight at once; GD only ever broadcasts n copies of one aggregate
    g.max_down_flows = sc.algorithm == SchedAlgorithm::gd ? n : n * n;
    auto add_task = [&](Task t) {
        g.tasks.push_back(t);
        return std::int32_t(g.tasks.size() - 1);
    };
    auto add_edge = [&](std::int32_t from, std::int32_t to) { g.edges.push_back({from, to}); };

    if (sc.algorithm == SchedAlgorithm::gd) {
        std::vector<std::int32_t> prev_apply;  // per client
        for (std::int64_t k = 0; k < r; ++k) {
            std::vector<std::int32_t> computes, sends;
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int32_t c = add_task({TaskKind::compute, std::int32_t(i), k, -1,
                                                 gradient_cycles(sc.n_i[std::size_t(i)], d, m), 0,
                                                 m.cores});
                if (k > 0) add_edge(prev_apply[std::size_t(i)], c);
                const std::int32_t s = add_task({TaskKind::send_up, std::int32_t(i), k, -1, 0.0,
                                                 std::int64_t(double(d) * scalar_bytes), 1});
                add_edge(c, s);
                computes.push_back(c);
                sends.push_back(s);
            }
            // master-side average: the whole-round barrier
            const std::int32_t agg = add_task(
                {TaskKind::compute, -1, k, -1,
                 double(n) * double(d) * (m.add_cost + 2.0 * m.memaccess_cost) +
                     double(d) * m.mult_cost,
                 0, m.cores});
            for (std::int32_t s : sends) add_edge(s, agg);
            std::vector<std::int32_t> applies;
            for (std::int64_t j = 0; j < n; ++j) {
                const std::int32_t bc = add_task({TaskKind::broadcast, std::int32_t(j), k, -1, 0.0,
                                                  std::int64_t(double(d) * scalar_bytes), 1});
                add_edge(agg, bc);
                const std::int32_t ap = add_task({TaskKind::apply_update, std::int32_t(j), k, -1,
                                                  axpy_cycles(d, m), 0, m.cores});
                add_edge(bc, ap);
                applies.push_back(ap);
            }
            prev_apply = applies;
        }
    } else {
        // DCGD/PermK/AES with eager per-block forwarding
        const std::int64_t count_prefix = 4, envelope_overhead = 21 + 32;
        std::vector<std::vector<std::int32_t>> prev_apply(
            std::size_t(n), std::vector<std::int32_t>(std::size_t(n), -1));
        for (std::int64_t k = 0; k < r; ++k) {
            std::vector<std::vector<std::int32_t>> applies(
                std::size_t(n), std::vector<std::int32_t>(std::size_t(n), -1));
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t own = block_size(d, n, i);
                // per-block partial gradient work, own block last
                std::vector<std::int32_t> partials;
                std::int32_t own_task = -1;
                for (std::int64_t b = 0; b < n; ++b) {
                    const std::int64_t bs = block_size(d, n, b);
                    double cycles = matvec_cycles(sc.n_i[std::size_t(i)], bs, m);
                    if (b == i) {
                        cycles += double(sc.n_i[std::size_t(i)]) * (m.add_cost + 2.0 * m.memaccess_cost) +
                                  matvec_cycles(own, sc.n_i[std::size_t(i)], m) +
                                  double(own) * (m.mult_cost + 2.0 * m.memaccess_cost);
                    }
                    const std::int32_t c = add_task(
                        {TaskKind::compute, std::int32_t(i), k, std::int32_t(b), cycles, 0, m.cores});
                    if (k > 0) add_edge(prev_apply[std::size_t(i)][std::size_t(b)], c);
                    if (b == i)
                        own_task = c;
                    else
                        partials.push_back(c);
                }
                for (std::int32_t c : partials) add_edge(c, own_task);

                const std::int64_t payload =
                    count_prefix + std::int64_t(double(own) * scalar_bytes);
                const std::int32_t enc = add_task({TaskKind::encrypt, std::int32_t(i), k,
                                                   std::int32_t(i),
                                                   m.aes_cycles_per_byte * double(payload), 0, 1});
                add_edge(own_task, enc);
                const std::int32_t send = add_task({TaskKind::send_up, std::int32_t(i), k,
                                                    std::int32_t(i), 0.0,
                                                    payload + envelope_overhead, 1});
                add_edge(enc, send);
                for (std::int64_t j = 0; j < n; ++j) {
                    const std::int32_t bc =
                        add_task({TaskKind::broadcast, std::int32_t(j), k, std::int32_t(i), 0.0,
                                  payload + envelope_overhead, 1});
                    add_edge(send, bc);
                    const std::int32_t dec = add_task({TaskKind::decrypt_verify, std::int32_t(j), k,
                                                       std::int32_t(i),
                                                       m.aes_cycles_per_byte * double(payload), 0, 1});
                    add_edge(bc, dec);
                    const std::int32_t ap = add_task({TaskKind::apply_update, std::int32_t(j), k,
                                                      std::int32_t(i), axpy_cycles(own, m), 0,
                                                      m.cores});
                    add_edge(dec, ap);
                    applies[std::size_t(j)][std::size_t(i)] = ap;
                }
            }
            prev_apply = applies;
        }
    }

    // fake source and sink around every vertex
    const std::int32_t body = std::int32_t(g.tasks.size());
    g.source = add_task({TaskKind::source, -1, -1, -1, 0.0, 0, 1});
    g.sink = add_task({TaskKind::sink, -1, -1, -1, 0.0, 0, 1});
    for (std::int32_t v = 0; v < body; ++v) {
        add_edge(g.source, v);
        add_edge(v, g.sink);
    }
    return g;
}

Schedule schedule_cpm(const TaskGraph& g, const std::vector<double>& durations) {
    const std::size_t nv = g.tasks.size();
    if (durations.size() != nv) throw std::invalid_argument("durations size mismatch");
    std::vector<std::vector<std::int32_t>> adj(nv);
    std::vector<std::int32_t> indeg(nv, 0);
    for (const Edge& e : g.edges) {
        adj[std::size_t(e.from)].push_back(e.to);
        ++indeg[std::size_t(e.to)];
    }
    std::vector<std::int32_t> queue;
    for (std::size_t v = 0; v < nv; ++v)
        if (indeg[v] == 0) queue.push_back(std::int32_t(v));
    Schedule s;
    s.start.assign(nv, 0.0);
    s.duration = durations;
    std::size_t head = 0, seen = 0;
    while (head < queue.size()) {
        const std::int32_t u = queue[head++];
        ++seen;
        for (std::int32_t v : adj[std::size_t(u)]) {
            s.start[std::size_t(v)] =
                std::max(s.start[std::size_t(v)], s.start[std::size_t(u)] + durations[std::size_t(u)]);
            if (--indeg[std::size_t(v)] == 0) queue.push_back(v);
        }
    }
    if (seen != nv) throw std::invalid_argument("task graph contains a cycle");
    for (std::size_t v = 0; v < nv; ++v)
        s.makespan = std::max(s.makespan, s.start[v] + durations[v]);
    return s;
}

namespace {

double task_duration(const Task& t, const ResourceModel& m, double link_share, double cores) {
    if (t.kind == TaskKind::source || t.kind == TaskKind::sink) return 0.0;
    if (is_transfer(t.kind)) {
        const double bw = (t.kind == TaskKind::send_up ? m.bandwidth_up_bytes_per_s
                                                       : m.bandwidth_down_bytes_per_s) *
                          8.0 / link_share;
        return comm_delay(double(t.message_bytes), 8.0, bw, m.rtt_s);
    }
    // per-core op rate folds the FU/MAD/SMT width implied by the peak figure
    const double ops_per_core = m.flops_peak / double(m.cores);
    const double p = std::clamp(cores, 1.0, double(t.parallel_cap));
    return t.cycles / (ops_per_core * p);
}

}  // namespace

std::vector<double> naive_durations(const TaskGraph& g, const ResourceModel& m) {
    std::vector<double> out;
    out.reserve(g.tasks.size());
    for (const Task& t : g.tasks) {
        const std::int64_t flows =
            t.kind == TaskKind::broadcast ? g.max_down_flows : g.max_up_flows;
        out.push_back(
            task_duration(t, m, double(std::max<std::int64_t>(flows, 1)), double(m.cores)));
    }
    return out;
}

Schedule refine_schedule(const TaskGraph& g, const ResourceModel& m, int max_iters,
                         double eps_rel) {
    if (max_iters < 1 || !(eps_rel > 0.0)) throw std::invalid_argument("bad refinement parameters");
    std::vector<double> dur = naive_durations(g, m);
    Schedule s = schedule_cpm(g, dur);
    s.iteration_makespans.push_back(s.makespan);

    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> next(dur.size(), 0.0);
        for (std::size_t v = 0; v < g.tasks.size(); ++v) {
            const Task& t = g.tasks[v];
            if (t.kind == TaskKind::source || t.kind == TaskKind::sink) continue;
            const double len = dur[v];
            const double a0 = s.start[v], a1 = s.start[v] + len;
            double overlap_sum = 0.0;
            if (is_transfer(t.kind) && len > 1e-15) {
                for (std::size_t u = 0; u < g.tasks.size(); ++u) {
                    if (g.tasks[u].kind != t.kind) continue;
                    const double b0 = s.start[u], b1 = s.start[u] + dur[u];
                    overlap_sum += std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
                }
            }
            double proposed;
            if (is_transfer(t.kind)) {
                // avg concurrent transfers on this direction's shared link
                const double cap = double(std::max<std::int64_t>(
                    t.kind == TaskKind::broadcast ? g.max_down_flows : g.max_up_flows, 1));
                const double conc =
                    len > 1e-15 ? std::clamp(overlap_sum / len, 1.0, cap) : 1.0;
                proposed = task_duration(t, m, conc, 1.0);
            } else {
                // nominal durations already grant each compute task its full
                // parallelism cap, so the idle-core speedup is saturated
                proposed = task_duration(t, m, 1.0, double(m.cores));
            }
            next[v] = 0.5 * dur[v] + 0.5 * proposed;  // damped toward the fixpoint
        }
        dur = next;
        Schedule ns = schedule_cpm(g, dur);
        ns.iteration_makespans = s.iteration_makespans;
        ns.iteration_makespans.push_back(ns.makespan);
        const double prev = s.makespan;
        s = ns;
        if (std::abs(s.makespan - prev) <= eps_rel * std::max(s.makespan, 1e-300)) {
            s.converged = true;
            return s;
        }
    }
    s.converged = false;
    return s;
}

bool schedule_feasible(const TaskGraph& g, const Schedule& s) {
    for (const Edge& e : g.edges)
        if (s.start[std::size_t(e.to)] + 1e-9 <
            s.start[std::size_t(e.from)] + s.duration[std::size_t(e.from)])
            return false;
    return true;
}

std::vector<std::int32_t> barrier_vertices(const TaskGraph& g) {
    std::vector<std::int32_t> out;
    std::vector<std::vector<std::int32_t>> preds(g.tasks.size());
    for (const Edge& e : g.edges) preds[std::size_t(e.to)].push_back(e.from);
    for (std::size_t v = 0; v < g.tasks.size(); ++v) {
        if (std::int32_t(v) == g.source || std::int32_t(v) == g.sink) continue;
        std::map<std::int64_t, std::set<std::int32_t>> senders_by_round;
        for (std::int32_t u : preds[v]) {
            const Task& t = g.tasks[std::size_t(u)];
            if (t.kind == TaskKind::send_up) senders_by_round[t.round].insert(t.client);
        }
        for (const auto& [round, senders] : senders_by_round)
            if (std::int64_t(senders.size()) >= g.n_clients && g.n_clients > 1) {
                out.push_back(std::int32_t(v));
                break;
            }
    }
    return out;
}

std::vector<std::int32_t> critical_path(const TaskGraph& g, const Schedule& s) {
    std::vector<std::vector<std::int32_t>> preds(g.tasks.size());
    for (const Edge& e : g.edges) preds[std::size_t(e.to)].push_back(e.from);
    // walk back from the sink (or the vertex finishing last)
    std::int32_t cur = 0;
    double best = -1.0;
    for (std::size_t v = 0; v < g.tasks.size(); ++v)
        if (s.start[v] + s.duration[v] > best) best = s.start[v] + s.duration[v], cur = std::int32_t(v);
    if (g.sink >= 0 && std::abs(s.start[std::size_t(g.sink)] - best) <= 1e-9) cur = g.sink;
    std::vector<std::int32_t> path{cur};
    while (!preds[std::size_t(cur)].empty()) {
        std::int32_t pick = -1;
        for (std::int32_t u : preds[std::size_t(cur)]) {
            if (std::abs(s.start[std::size_t(u)] + s.duration[std::size_t(u)] -
                         s.start[std::size_t(cur)]) <= 1e-9 &&
                (pick == -1 || s.start[std::size_t(u)] > s.start[std::size_t(pick)]))
                pick = u;
        }
        if (pick == -1) {
            // start time 0 without a binding predecessor: chain ends
            if (s.start[std::size_t(cur)] > 0.0 && !preds[std::size_t(cur)].empty())
                pick = preds[std::size_t(cur)][0];
            else
                break;
        }
        path.push_back(pick);
        cur = pick;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string export_dot(const TaskGraph& g, const Schedule& s) {
    std::string out = "digraph tasks {\n  rankdir=LR;\n  node [shape=box, style=filled];\n";
    char buf[256];
    for (std::size_t v = 0; v < g.tasks.size(); ++v) {
        const Task& t = g.tasks[v];
        const char* color = "gray80";
        if (t.kind == TaskKind::send_up)
            color = "yellow";
        else if (t.kind == TaskKind::broadcast)
            color = "green";
        else if (is_compute_like(t.kind))
            color = "lightblue";
        std::snprintf(buf, sizeof buf,
                      "  v%zu [label=\"%s c=%d r=%lld b=%d\\nstart=%.6gs dur=%.6gs\", "
                      "fillcolor=%s];\n",
                      v, to_string(t.kind).c_str(), t.client, (long long)t.round, t.block,
                      s.start[v], s.duration[v], color);
        out += buf;
    }
    for (const Edge& e : g.edges) {
        std::snprintf(buf, sizeof buf, "  v%d -> v%d;\n", e.from, e.to);
        out += buf;
    }
    out += "}\n";
    return out;
}

}  // namespace pfl
