#include "pfl/problem.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pfl/bytes.hpp"
#include "pfl/prg.hpp"

namespace pfl {
namespace {

// Serial row-dot matvec. Generation computes b_i with this same kernel so
// that gradient_prec<double>(x_fixed) is exactly zero in interpolation mode.
Eigen::VectorXd serial_matvec(const RowMatrix& a, const Eigen::VectorXd& x) {
    const std::int64_t rows = a.rows(), d = a.cols();
    Eigen::VectorXd out(rows);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = a.data() + r * d;
        double acc = 0.0;
        for (std::int64_t j = 0; j < d; ++j) acc += row[j] * x[j];
        out[r] = acc;
    }
    return out;
}

Eigen::VectorXd hessian_apply(const std::vector<ClientData>& clients, std::int64_t n,
                              const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (const ClientData& c : clients) {
        const Eigen::VectorXd av = c.a * v;
        out.noalias() += (2.0 / (double(n) * double(c.rows()))) * (c.a.transpose() * av);
    }
    return out;
}

// Largest Hessian eigenvalue by power iteration; start vector from the PRG.
double power_iteration(const std::vector<ClientData>& clients, std::int64_t n, std::int64_t d,
                       Prg& prg, double rel_tol = 1e-6, int max_iters = 10000) {
    Eigen::VectorXd v(d);
    for (std::int64_t j = 0; j < d; ++j) v[j] = prg.next_unit();
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd w = hessian_apply(clients, n, v);
        const double norm = w.norm();
        if (norm == 0.0) throw GenerationError("power iteration: zero Hessian");
        const double next = v.dot(w);
        w /= norm;
        if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) return next;
        lambda = next;
        v.swap(w);
    }
    throw GenerationError("power iteration did not converge");
}

void validate(const GenParams& gp) {
    if (gp.d < 1 || gp.n < 1 || gp.n_i < 1) throw GenerationError("d, n, n_i must be >= 1");
    if (!(gp.l_target > 0.0)) throw GenerationError("l_target must be positive");
    if (gp.spectrum == SpectrumMode::exact && gp.n * gp.n_i > gp.d)
        throw GenerationError("exact spectrum mode requires n*n_i <= d");
}

void fill_rhs(Problem& p, const GenParams& gp) {
    // Stream 1 carries the planted solution / right-hand sides.
    Prg rhs(gp.seed, 1);
    if (gp.interpolation) {
        Eigen::VectorXd xf(gp.d);
        for (std::int64_t j = 0; j < gp.d; ++j) xf[j] = rhs.next_unit();
        for (ClientData& c : p.clients) c.b = serial_matvec(c.a, xf);
        p.x_fixed = xf;
    } else {
        for (ClientData& c : p.clients) {
            c.b.resize(c.rows());
            for (std::int64_t r = 0; r < c.rows(); ++r) c.b[r] = rhs.next_unit();
        }
    }
}

}  // namespace

Problem generate_problem(const GenParams& gp) {
    validate(gp);
    Problem p;
    p.n = gp.n;
    p.d = gp.d;
    p.weights.assign(std::size_t(gp.n), 1.0);
    p.clients.resize(std::size_t(gp.n));

    Prg gen(gp.seed, 0);
    if (gp.spectrum == SpectrumMode::scaled_uniform) {
        for (ClientData& c : p.clients) {
            c.a.resize(gp.n_i, gp.d);
            for (std::int64_t r = 0; r < gp.n_i; ++r)
                for (std::int64_t j = 0; j < gp.d; ++j) c.a(r, j) = gen.next_unit();
        }
        Prg pw(gp.seed, 2);
        const double lambda = power_iteration(p.clients, p.n, p.d, pw);
        const double scale = std::sqrt(gp.l_target / lambda);
        for (ClientData& c : p.clients) c.a *= scale;
    } else {
        const std::int64_t rank = gp.n * gp.n_i;
        Eigen::MatrixXd g(gp.d, rank);
        for (std::int64_t r = 0; r < gp.d; ++r)
            for (std::int64_t k = 0; k < rank; ++k) g(r, k) = gen.next_gaussian();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd q =
            qr.householderQ() * Eigen::MatrixXd::Identity(gp.d, rank);

        // Nonzero eigenvalues uniform on [l_target/10, l_target], assigned to
        // client rows in shuffled order.
        std::vector<double> lam(std::size_t(rank), 0.0);
        for (std::int64_t k = 0; k < rank; ++k)
            lam[std::size_t(k)] =
                rank == 1 ? gp.l_target
                          : gp.l_target / 10.0 +
                                (gp.l_target - gp.l_target / 10.0) * double(k) / double(rank - 1);
        gen.shuffle(lam);

        for (std::int64_t i = 0; i < gp.n; ++i) {
            ClientData& c = p.clients[std::size_t(i)];
            c.a.resize(gp.n_i, gp.d);
            for (std::int64_t r = 0; r < gp.n_i; ++r) {
                const std::int64_t k = i * gp.n_i + r;
                const double w = std::sqrt(lam[std::size_t(k)] * double(gp.n) / 2.0 * double(gp.n_i));
                c.a.row(r) = w * q.col(k).transpose();
            }
        }
    }
    p.l_smooth = gp.l_target;
    fill_rhs(p, gp);
    return p;
}

Eigen::VectorXd gradient(const Problem& p, int client, const Eigen::VectorXd& x) {
    if (client < 0 || client >= int(p.n)) throw std::invalid_argument("client index out of range");
    if (x.size() != p.d) throw std::invalid_argument("gradient: x has wrong length");
    std::vector<double> xs(x.data(), x.data() + x.size());
    const std::vector<double> g = gradient_prec<double>(p, client, xs);
    return Eigen::Map<const Eigen::VectorXd>(g.data(), std::int64_t(g.size()));
}

std::pair<double, double> objective_and_gradnorm(const Problem& p, const Eigen::VectorXd& x) {
    if (x.size() != p.d) throw std::invalid_argument("objective: x has wrong length");
    double f = 0.0;
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(p.d);
    for (std::int64_t i = 0; i < p.n; ++i) {
        const ClientData& c = p.clients[std::size_t(i)];
        const Eigen::VectorXd r = serial_matvec(c.a, x) - c.b;
        double sq = 0.0;
        for (std::int64_t k = 0; k < r.size(); ++k) sq += r[k] * r[k];
        const double w = p.weights[std::size_t(i)];
        f += w * sq / double(c.rows());
        mean_grad += w * gradient(p, int(i), x);
    }
    f /= double(p.n);
    mean_grad /= double(p.n);
    double gn = 0.0;
    for (std::int64_t k = 0; k < mean_grad.size(); ++k) gn += mean_grad[k] * mean_grad[k];
    return {f, gn};
}

void save_problem(const Problem& p, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), {'P', 'F', 'L', '1'});
    put_u64(buf, std::uint64_t(p.d));
    put_u64(buf, std::uint64_t(p.n));
    for (const ClientData& c : p.clients) {
        put_u64(buf, std::uint64_t(c.rows()));
        for (std::int64_t r = 0; r < c.rows(); ++r)
            for (std::int64_t j = 0; j < p.d; ++j) put_f64(buf, c.a(r, j));
        for (std::int64_t r = 0; r < c.rows(); ++r) put_f64(buf, c.b[r]);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

Problem load_problem(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto need = [&](std::size_t k) {
        if (buf.size() - pos < k) throw std::runtime_error("truncated problem file");
    };
    need(4);
    if (std::memcmp(buf.data(), "PFL1", 4) != 0) throw std::runtime_error("bad problem magic");
    pos = 4;
    need(16);
    Problem p;
    p.d = std::int64_t(get_u64(buf.data() + pos)), pos += 8;
    p.n = std::int64_t(get_u64(buf.data() + pos)), pos += 8;
    if (p.d < 1 || p.n < 1) throw std::runtime_error("bad problem dimensions");
    p.clients.resize(std::size_t(p.n));
    p.weights.assign(std::size_t(p.n), 1.0);
    for (ClientData& c : p.clients) {
        need(8);
        const std::int64_t rows = std::int64_t(get_u64(buf.data() + pos));
        pos += 8;
        if (rows < 1) throw std::runtime_error("bad client row count");
        need(std::size_t(rows) * std::size_t(p.d + 1) * 8);
        c.a.resize(rows, p.d);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < p.d; ++j) c.a(r, j) = get_f64(buf.data() + pos), pos += 8;
        c.b.resize(rows);
        for (std::int64_t r = 0; r < rows; ++r) c.b[r] = get_f64(buf.data() + pos), pos += 8;
    }
    Prg pw(0x70666C31ull, 2);
    p.l_smooth = power_iteration(p.clients, p.n, p.d, pw);
    return p;
}

}  // namespace pfl
