#include "nestmlmc/bell.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace nestmlmc::bell {

namespace {

constexpr int kMaxOrder = 20;

const std::array<double, kMaxOrder + 1>& factorials() {
    static const auto table = [] {
        std::array<double, kMaxOrder + 1> f{};
        f[0] = 1.0;
        for (int i = 1; i <= kMaxOrder; ++i) f[i] = f[i - 1] * i;
        return f;
    }();
    return table;
}

// Depth-first enumeration of (l_1, ..., l_m) with sum l_i = parts_left and
// sum i*l_i = weight_left. The denominator prod l_i! (i!)^{l_i} is carried
// separately so the integer coefficient n!/denom divides out exactly at
// small orders.
double enumerate(std::span<const double> x, double n_fact, int i, int parts_left,
                 int weight_left, double denom, double xprod) {
    const int m = static_cast<int>(x.size());
    if (i > m) return (parts_left == 0 && weight_left == 0) ? n_fact / denom * xprod : 0.0;
    // Remaining indices i..m cannot exceed weight m*parts_left or fall short
    // of i*parts_left.
    if (weight_left < i * parts_left || weight_left > m * parts_left) return 0.0;
    double sum = 0.0;
    int lmax = std::min(parts_left, weight_left / i);
    double xpw = xprod, dpw = denom;
    for (int l = 0; l <= lmax; ++l) {
        sum += enumerate(x, n_fact, i + 1, parts_left - l, weight_left - i * l,
                         dpw * factorials()[l], xpw);
        xpw *= x[i - 1];
        dpw *= factorials()[i];
    }
    return sum;
}

}  // namespace

double BellCoefficientTable::at(int r, int j) const {
    if (r < 1 || r > r_max_ || j < 1 || j > r)
        throw std::invalid_argument("BellCoefficientTable: index out of range");
    return entries_[static_cast<size_t>(r) * (r - 1) / 2 + (j - 1)];
}

double partial_bell(PartialBellIndex index, std::span<const double> x) {
    const int n = index.n, k = index.k;
    if (n < 1 || k < 1 || k > n) throw std::invalid_argument("partial_bell: need 1 <= k <= n");
    if (n > kMaxOrder) throw std::invalid_argument("partial_bell: order above 20 unsupported");
    if (static_cast<int>(x.size()) != n - k + 1)
        throw std::invalid_argument("partial_bell: x must have n-k+1 entries");
    return enumerate(x, factorials()[n], 1, k, n, 1.0, 1.0);
}

double complete_bell(int n, std::span<const double> x) {
    if (n < 1) throw std::invalid_argument("complete_bell: n must be positive");
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("complete_bell: x must have n entries");
    double sum = 0.0;
    for (int k = 1; k <= n; ++k) sum += partial_bell({n, k}, x.subspan(0, n - k + 1));
    return sum;
}

std::vector<double> moments_from_cumulants(const CumulantVector& kappa, int n) {
    if (n < 1 || static_cast<int>(kappa.size()) < n)
        throw std::invalid_argument("moments_from_cumulants: need n cumulants");
    std::vector<double> moments(n);
    for (int j = 1; j <= n; ++j)
        moments[j - 1] = complete_bell(j, std::span<const double>(kappa.data(), j));
    return moments;
}

BellCoefficientTable b_coefficients(const CumulantVector& kappa, int r_max) {
    if (r_max < 1 || r_max > 10) throw std::invalid_argument("b_coefficients: r_max in [1,10]");
    if (static_cast<int>(kappa.size()) < r_max + 1)
        throw std::invalid_argument("b_coefficients: need cumulants up to r_max+1");
    std::vector<double> entries;
    entries.reserve(static_cast<size_t>(r_max) * (r_max + 1) / 2);
    std::vector<double> args;
    for (int r = 1; r <= r_max; ++r) {
        for (int j = 1; j <= r; ++j) {
            // Arguments kappa_2/2, ..., kappa_{r-j+2}/(r-j+2).
            args.clear();
            for (int i = 2; i <= r - j + 2; ++i) args.push_back(kappa[i - 1] / i);
            entries.push_back(partial_bell({r, j}, args));
        }
    }
    return BellCoefficientTable(r_max, std::move(entries));
}

double centered_mean_moment(const CumulantVector& kappa, int n, double h) {
    if (n < 1) throw std::invalid_argument("centered_mean_moment: n must be positive");
    if (kappa.empty() || kappa[0] != 0.0)
        throw std::invalid_argument("centered_mean_moment: kappa_1 must be 0");
    if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("centered_mean_moment: h in (0,1]");
    const double k_real = 1.0 / h;
    if (std::abs(k_real - std::round(k_real)) > 1e-9)
        throw std::invalid_argument("centered_mean_moment: 1/h must be an integer");
    if (static_cast<int>(kappa.size()) < n)
        throw std::invalid_argument("centered_mean_moment: kappa too short");
    double sum = 0.0;
    std::vector<double> args;
    const int kmax = (n + 1) / 2;
    for (int k = 1; k <= kmax; ++k) {
        const int r = n - k;
        if (k > r) continue;  // B_{r,k} vanishes for k > r here
        args.clear();
        for (int i = 2; i <= r - k + 2; ++i) args.push_back(kappa[i - 1] / i);
        const double b_rk = partial_bell({r, k}, args);
        sum += std::pow(h, n - k) * factorials()[n] / factorials()[r] * b_rk;
    }
    return sum;
}

}  // namespace nestmlmc::bell
