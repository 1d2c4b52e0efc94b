#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pfl/compress.hpp"
#include "pfl/engine.hpp"
#include "pfl/hecost.hpp"
#include "pfl/problem.hpp"
#include "pfl/sched.hpp"
#include "pfl/secenv.hpp"

namespace py = pybind11;
using namespace pfl;

namespace {

Eigen::VectorXd to_vec(const py::array_t<double>& x) {
    const auto buf = x.request();
    if (buf.ndim != 1) throw std::invalid_argument("expected a 1-d array");
    Eigen::VectorXd v(buf.shape[0]);
    std::memcpy(v.data(), buf.ptr, sizeof(double) * std::size_t(buf.shape[0]));
    return v;
}

template <class T>
py::array_t<T> make_1d(std::size_t n) {
    return py::array_t<T>(std::vector<py::ssize_t>{py::ssize_t(n)});
}

py::array_t<double> from_vec(const std::vector<double>& v) {
    py::array_t<double> out = make_1d<double>(v.size());
    std::memcpy(out.mutable_data(), v.data(), sizeof(double) * v.size());
    return out;
}

Precision precision_arg(const std::string& s) {
    Precision p;
    if (!precision_from_string(s, p)) throw std::invalid_argument("precision must be fp16/fp32/fp64");
    return p;
}

Algorithm algorithm_arg(const std::string& s) {
    Algorithm a;
    if (!algorithm_from_string(s, a)) throw std::invalid_argument("unknown algorithm " + s);
    return a;
}

RunConfig make_run_config(const std::string& algorithm, double gamma, std::int64_t rounds,
                          const std::string& precision, std::int64_t randk_k,
                          std::uint64_t compressor_seed, std::uint64_t x0_seed,
                          std::optional<std::uint64_t> key_seed, std::int64_t fedavg_local_steps,
                          double fedavg_local_gamma, bool record_iterates) {
    RunConfig cfg;
    cfg.algorithm = algorithm_arg(algorithm);
    cfg.gamma = gamma;
    cfg.rounds = rounds;
    cfg.precision = precision_arg(precision);
    cfg.randk_k = randk_k;
    cfg.compressor_seed = compressor_seed;
    cfg.x0_seed = x0_seed;
    cfg.key_seed = key_seed;
    cfg.fedavg_local_steps = fedavg_local_steps;
    cfg.fedavg_local_gamma = fedavg_local_gamma;
    cfg.record_iterates = record_iterates;
    return cfg;
}

py::dict result_to_dict(const RunResult& r) {
    py::dict out;
    py::array_t<double> fx = make_1d<double>(r.rounds.size());
    py::array_t<double> gn = make_1d<double>(r.rounds.size());
    py::array_t<std::int64_t> up = make_1d<std::int64_t>(r.rounds.size());
    py::array_t<std::int64_t> down = make_1d<std::int64_t>(r.rounds.size());
    auto* fxp = fx.mutable_data();
    auto* gnp = gn.mutable_data();
    auto* upp = up.mutable_data();
    auto* dnp = down.mutable_data();
    for (std::size_t k = 0; k < r.rounds.size(); ++k) {
        fxp[k] = r.rounds[k].fx;
        gnp[k] = r.rounds[k].grad_norm_sq;
        upp[k] = r.rounds[k].up_bytes_total;
        dnp[k] = r.rounds[k].down_bytes_total;
    }
    out["fx"] = fx;
    out["grad_norm_sq"] = gn;
    out["up_bytes_total"] = up;
    out["down_bytes_total"] = down;
    out["final_x"] = from_vec(r.final_x);
    out["diverged"] = r.diverged;
    out["replicas_identical"] = r.replicas_identical;
    if (!r.iterates.empty()) {
        py::list its;
        for (const auto& x : r.iterates) its.append(from_vec(x));
        out["iterates"] = its;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(permfl, m) {
    m.doc() = "distributed compressed gradient descent with permutation compressors and "
              "AES-EAX envelopes";

    py::class_<Problem>(m, "Problem")
        .def_readonly("n", &Problem::n)
        .def_readonly("d", &Problem::d)
        .def_readonly("l_smooth", &Problem::l_smooth)
        .def_property_readonly("x_fixed",
                               [](const Problem& p) -> py::object {
                                   if (!p.x_fixed) return py::none();
                                   std::vector<double> v(p.x_fixed->data(),
                                                         p.x_fixed->data() + p.x_fixed->size());
                                   return from_vec(v);
                               })
        .def("__repr__", [](const Problem& p) {
            return "<permfl.Problem n=" + std::to_string(p.n) + " d=" + std::to_string(p.d) + ">";
        });

    m.def(
        "generate_problem",
        [](std::uint64_t seed, std::int64_t d, std::int64_t n, std::int64_t n_i, double l_target,
           bool interpolation, const std::string& spectrum) {
            GenParams gp;
            gp.seed = seed, gp.d = d, gp.n = n, gp.n_i = n_i, gp.l_target = l_target;
            gp.interpolation = interpolation;
            if (spectrum == "scaled_uniform")
                gp.spectrum = SpectrumMode::scaled_uniform;
            else if (spectrum == "exact")
                gp.spectrum = SpectrumMode::exact;
            else
                throw std::invalid_argument("spectrum must be scaled_uniform or exact");
            return generate_problem(gp);
        },
        py::arg("seed"), py::arg("d"), py::arg("n"), py::arg("n_i"), py::arg("l_target") = 10.0,
        py::arg("interpolation") = true, py::arg("spectrum") = "scaled_uniform");

    m.def("save_problem", &save_problem, py::arg("problem"), py::arg("path"));
    m.def("load_problem", &load_problem, py::arg("path"));

    m.def(
        "gradient",
        [](const Problem& p, int client, const py::array_t<double>& x) {
            const Eigen::VectorXd g = gradient(p, client, to_vec(x));
            return from_vec(std::vector<double>(g.data(), g.data() + g.size()));
        },
        py::arg("problem"), py::arg("client"), py::arg("x"));

    m.def(
        "objective_and_gradnorm",
        [](const Problem& p, const py::array_t<double>& x) {
            return objective_and_gradnorm(p, to_vec(x));
        },
        py::arg("problem"), py::arg("x"));

    m.def("theoretical_step", &theoretical_step, py::arg("l_smooth"));

    py::class_<Assignment>(m, "Assignment")
        .def_readonly("d", &Assignment::d)
        .def_readonly("n", &Assignment::n)
        .def_readonly("round", &Assignment::round)
        .def_readonly("buckets", &Assignment::buckets)
        .def("owners", &Assignment::owners);

    m.def("sample_assignment", &sample_assignment, py::arg("d"), py::arg("n"), py::arg("seed"),
          py::arg("round"));

    py::class_<SparseChunk>(m, "SparseChunk")
        .def_readonly("owner", &SparseChunk::owner)
        .def_readonly("indices", &SparseChunk::indices)
        .def_readonly("values", &SparseChunk::values)
        .def_readonly("scale_applied", &SparseChunk::scale_applied);

    m.def(
        "compress_permk",
        [](const py::array_t<double>& v, const Assignment& a, std::uint32_t client) {
            const auto buf = v.request();
            std::vector<double> vec(static_cast<double*>(buf.ptr),
                                    static_cast<double*>(buf.ptr) + buf.shape[0]);
            return compress_permk(vec, a, client);
        },
        py::arg("v"), py::arg("assignment"), py::arg("client"));

    m.def(
        "compress_randk",
        [](const py::array_t<double>& v, std::int64_t k, std::uint64_t seed, std::uint64_t round,
           std::uint32_t client) {
            const auto buf = v.request();
            std::vector<double> vec(static_cast<double*>(buf.ptr),
                                    static_cast<double*>(buf.ptr) + buf.shape[0]);
            Prg prg(seed, round, client);
            return compress_randk(vec, k, prg, client);
        },
        py::arg("v"), py::arg("k"), py::arg("seed"), py::arg("round"), py::arg("client") = 0);

    m.def(
        "assemble",
        [](const std::vector<SparseChunk>& chunks, std::int64_t d, std::int64_t n,
           bool require_disjoint) {
            return from_vec(assemble<double>(chunks, d, n, require_disjoint));
        },
        py::arg("chunks"), py::arg("d"), py::arg("n"), py::arg("require_disjoint") = false);

    // authenticated envelopes
    py::class_<Envelope>(m, "Envelope")
        .def_property_readonly("round", [](const Envelope& e) { return e.header.round; })
        .def_property_readonly("client", [](const Envelope& e) { return e.header.client; })
        .def_property_readonly("nonce",
                               [](const Envelope& e) {
                                   return py::bytes(reinterpret_cast<const char*>(e.nonce.data()),
                                                    e.nonce.size());
                               })
        .def_property_readonly("tag",
                               [](const Envelope& e) {
                                   return py::bytes(reinterpret_cast<const char*>(e.tag.data()),
                                                    e.tag.size());
                               })
        .def_property_readonly("ciphertext", [](const Envelope& e) {
            return py::bytes(reinterpret_cast<const char*>(e.ciphertext.data()),
                             e.ciphertext.size());
        });

    m.def("keygen", [](std::optional<std::uint64_t> seed) {
        if (seed) {
            SeededEntropy src(*seed);
            const SecretKey k = keygen(src);
            return py::bytes(reinterpret_cast<const char*>(k.bytes.data()), k.bytes.size());
        }
        SystemEntropy src;
        const SecretKey k = keygen(src);
        return py::bytes(reinterpret_cast<const char*>(k.bytes.data()), k.bytes.size());
    }, py::arg("seed") = py::none());

    m.def(
        "seal",
        [](const py::bytes& key, std::uint64_t round, std::uint32_t client,
           const py::bytes& payload) {
            const std::string ks = key;
            if (ks.size() != 16) throw std::invalid_argument("key must be 16 bytes");
            SecretKey sk;
            std::memcpy(sk.bytes.data(), ks.data(), 16);
            const std::string ps = payload;
            EnvelopeHeader h;
            h.round = round, h.client = client;
            SystemEntropy entropy;
            return seal(sk, h,
                        std::vector<std::uint8_t>(ps.begin(), ps.end()), entropy);
        },
        py::arg("key"), py::arg("round"), py::arg("client"), py::arg("payload"));

    m.def(
        "open",
        [](const py::bytes& key, const Envelope& env) -> py::object {
            const std::string ks = key;
            if (ks.size() != 16) throw std::invalid_argument("key must be 16 bytes");
            SecretKey sk;
            std::memcpy(sk.bytes.data(), ks.data(), 16);
            const auto pt = open(sk, env);
            if (!pt) return py::none();
            return py::bytes(reinterpret_cast<const char*>(pt->data()), pt->size());
        },
        py::arg("key"), py::arg("envelope"));

    m.def(
        "run_experiment",
        [](const Problem& p, const std::string& algorithm, double gamma, std::int64_t rounds,
           const std::string& precision, std::int64_t randk_k, std::uint64_t compressor_seed,
           std::uint64_t x0_seed, std::optional<std::uint64_t> key_seed,
           std::int64_t fedavg_local_steps, double fedavg_local_gamma, bool record_iterates) {
            return result_to_dict(
                run(p, make_run_config(algorithm, gamma, rounds, precision, randk_k,
                                       compressor_seed, x0_seed, key_seed, fedavg_local_steps,
                                       fedavg_local_gamma, record_iterates)));
        },
        py::arg("problem"), py::arg("algorithm"), py::arg("gamma"), py::arg("rounds"),
        py::arg("precision") = "fp64", py::arg("randk_k") = 0, py::arg("compressor_seed") = 1,
        py::arg("x0_seed") = 2, py::arg("key_seed") = py::none(),
        py::arg("fedavg_local_steps") = 1, py::arg("fedavg_local_gamma") = 0.0,
        py::arg("record_iterates") = false);

    m.def(
        "tune_step_size",
        [](const Problem& p, const std::string& algorithm, const std::vector<double>& grid,
           std::int64_t rounds, const std::vector<std::uint64_t>& seeds) {
            RunConfig base = make_run_config(algorithm, grid.at(0), rounds, "fp64", 0, 1, 2,
                                             std::nullopt, 1, 0.0, false);
            const TuneReport rep = tune_step_size(p, base, grid, seeds);
            py::dict out;
            out["best_gamma"] = rep.best_gamma;
            out["diverged_gammas"] = rep.diverged_gammas;
            py::list entries;
            for (const TuneEntry& e : rep.entries) {
                py::dict row;
                row["gamma"] = e.gamma;
                row["seed"] = e.seed;
                row["diverged"] = e.diverged;
                row["final_grad_norm_sq"] = e.final_grad_norm_sq;
                entries.append(row);
            }
            out["entries"] = entries;
            return out;
        },
        py::arg("problem"), py::arg("algorithm"), py::arg("gamma_grid"), py::arg("rounds"),
        py::arg("seeds"));

    m.def("nominal_message_bytes",
          [](std::int64_t values, const std::string& precision, bool encrypted) {
              return nominal_message_bytes(values, precision_arg(precision), encrypted);
          },
          py::arg("values"), py::arg("precision"), py::arg("encrypted"));
    m.def("wire_message_bytes",
          [](std::int64_t values, const std::string& precision, bool encrypted, bool sparse) {
              return wire_message_bytes(values, precision_arg(precision), encrypted, sparse);
          },
          py::arg("values"), py::arg("precision"), py::arg("encrypted"), py::arg("sparse"));

    // CKKS size model
    m.def("ckks_key_size_bytes", [](bool strict) {
        return key_size_bytes(aes128_equivalent_params(strict));
    }, py::arg("strict") = false);
    m.def("ckks_ciphertext_bytes", [](std::int64_t d, bool strict) {
        return ciphertext_bytes(d, aes128_equivalent_params(strict));
    }, py::arg("d"), py::arg("strict") = false);
    m.def("aes_envelope_bytes", &aes_envelope_bytes, py::arg("d"), py::arg("bytes_per_scalar") = 8);

    m.def(
        "schedule_scenario",
        [](const std::string& algorithm, std::int64_t n, std::int64_t d,
           const std::vector<std::int64_t>& n_i, std::int64_t rounds, double bandwidth_mbytes,
           double rtt_ms, double flops_peak_gflops, int cores) {
            SchedScenario sc;
            if (algorithm == "gd")
                sc.algorithm = SchedAlgorithm::gd;
            else if (algorithm == "dcgd_permk_aes")
                sc.algorithm = SchedAlgorithm::dcgd_permk_aes;
            else
                throw std::invalid_argument("algorithm must be gd or dcgd_permk_aes");
            sc.n = n, sc.d = d, sc.n_i = n_i, sc.rounds = rounds;
            ResourceModel m2;
            m2.bandwidth_up_bytes_per_s = m2.bandwidth_down_bytes_per_s = bandwidth_mbytes * 1e6;
            m2.rtt_s = rtt_ms / 1e3;
            m2.flops_peak = flops_peak_gflops * 1e9;
            m2.cores = cores;
            const TaskGraph g = build_task_graph(sc, m2);
            const Schedule naive = schedule_cpm(g, naive_durations(g, m2));
            const Schedule refined = refine_schedule(g, m2);
            py::dict out;
            out["naive_makespan_s"] = naive.makespan;
            out["refined_makespan_s"] = refined.makespan;
            out["speedup"] = naive.makespan / refined.makespan;
            out["iterations"] = refined.iteration_makespans;
            out["converged"] = refined.converged;
            out["tasks"] = py::int_(g.tasks.size());
            out["dot_naive"] = export_dot(g, naive);
            out["dot_refined"] = export_dot(g, refined);
            return out;
        },
        py::arg("algorithm"), py::arg("n") = 4, py::arg("d") = 10000000,
        py::arg("n_i") = std::vector<std::int64_t>{55000, 11000, 11000, 11000},
        py::arg("rounds") = 4, py::arg("bandwidth_mbytes") = 41.54, py::arg("rtt_ms") = 28.0,
        py::arg("flops_peak_gflops") = 238.41, py::arg("cores") = 10);
}
