#include "pfl/prg.hpp"

#include <cmath>
#include <numbers>

namespace pfl {

double Prg::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = next_unit();
    while (u1 == 0.0) u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

std::vector<std::uint32_t> Prg::sample_without_replacement(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> ids(n);
    for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
    shuffle(ids);
    ids.resize(k);
    return ids;
}

}  // namespace pfl
