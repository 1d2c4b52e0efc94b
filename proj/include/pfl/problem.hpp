#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfl/precision.hpp"

namespace pfl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-client least-squares block: f_i(x) = (1/n_i) * ||A_i x - b_i||^2.
struct ClientData {
    RowMatrix a;        // n_i x d
    Eigen::VectorXd b;  // n_i
    std::int64_t rows() const { return a.rows(); }
};

// How the Hessian spectrum is shaped during generation:
//  - scaled_uniform: U[0,1) blocks rescaled by one scalar so that the largest
//    eigenvalue of the full Hessian hits l_target (power iteration).
//  - exact: nonzero eigenvalues placed uniformly on [l_target/10, l_target]
//    through an orthogonal conjugation, then factored into client blocks.
enum class SpectrumMode { scaled_uniform, exact };

struct GenParams {
    std::uint64_t seed = 1;
    std::int64_t d = 100;
    std::int64_t n = 10;
    std::int64_t n_i = 5;
    double l_target = 10.0;
    bool interpolation = true;
    SpectrumMode spectrum = SpectrumMode::scaled_uniform;
};

struct Problem {
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::vector<ClientData> clients;
    double l_smooth = 0.0;                   // largest eigenvalue of the Hessian of f
    std::optional<Eigen::VectorXd> x_fixed;  // planted solution (interpolation mode)
    std::vector<double> weights;             // w_i, default 1.0
};

Problem generate_problem(const GenParams& gp);

Eigen::VectorXd gradient(const Problem& p, int client, const Eigen::VectorXd& x);

// (f(x), ||grad f(x)||^2), gradient norm from the exact FP64 average of
// per-client gradients.
std::pair<double, double> objective_and_gradnorm(const Problem& p, const Eigen::VectorXd& x);

inline double theoretical_step(double l_smooth) {
    if (!(l_smooth > 0.0)) throw std::invalid_argument("l_smooth must be positive");
    return 1.0 / l_smooth;
}

// Binary export: magic "PFL1", then d, n (u64 LE), then per client
// n_i (u64 LE), row-major FP64 A_i, FP64 b_i. Import recomputes l_smooth.
void save_problem(const Problem& p, const std::string& path);
Problem load_problem(const std::string& path);

// Run-precision gradient kernel. Matrix entries are rounded into S on the
// fly; Half accumulates in FP32 and rounds each arithmetic result through
// binary16.
template <class S>
std::vector<S> gradient_prec(const Problem& p, int client, const std::vector<S>& x) {
    const ClientData& c = p.clients.at(std::size_t(client));
    const std::int64_t rows = c.rows();
    const std::int64_t d = p.d;
    if (std::int64_t(x.size()) != d) throw std::invalid_argument("gradient: x has wrong length");

    std::vector<accum_t<S>> g(std::size_t(d), accum_t<S>(0));
    const S inv = scalar_from_double<S>(2.0 / double(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = c.a.data() + r * d;
        accum_t<S> acc(0);
        for (std::int64_t j = 0; j < d; ++j) {
            const S prod = scalar_from_double<S>(row[j]) * x[std::size_t(j)];
            acc += accum_t<S>(scalar_to_double(prod));
        }
        const S resid = S(acc) - scalar_from_double<S>(c.b[r]);
        const S scaled = inv * resid;
        for (std::int64_t j = 0; j < d; ++j) {
            const S prod = scalar_from_double<S>(row[j]) * scaled;
            g[std::size_t(j)] += accum_t<S>(scalar_to_double(prod));
        }
    }
    const std::size_t dn = std::size_t(d);
    std::vector<S> out(dn);
    for (std::size_t j = 0; j < dn; ++j) out[j] = S(g[j]);
    return out;
}

}  // namespace pfl
