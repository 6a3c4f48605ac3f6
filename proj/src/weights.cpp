#include "nestmlmc/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace nestmlmc::weights {

WeightVector solve_weights(const WeightSpec& spec) {
    if (!(spec.alpha > 0.0)) throw std::invalid_argument("solve_weights: alpha must be > 0");
    if (spec.M < 2) throw std::invalid_argument("solve_weights: M must be >= 2");
    if (spec.R < 1) throw std::invalid_argument("solve_weights: R must be >= 1");
    if (spec.R > 12) throw std::invalid_argument("solve_weights: R > 12 refused (conditioning)");

    const int R = spec.R;
    std::vector<double> nodes(R);
    for (int j = 0; j < R; ++j) nodes[j] = std::pow(spec.M, -spec.alpha * j);

    // The conditions say: for any polynomial p of degree < R,
    // sum_j w_j p(x_j) = p(0). Hence w_j is the Lagrange basis at 0.
    WeightVector wv;
    wv.spec = spec;
    wv.w.resize(R);
    for (int j = 0; j < R; ++j) {
        double prod = 1.0;
        for (int i = 0; i < R; ++i) {
            if (i == j) continue;
            prod *= nodes[i] / (nodes[i] - nodes[j]);
        }
        wv.w[j] = prod;
    }

    wv.W.resize(R);
    double tail = 0.0;
    for (int j = R - 1; j >= 0; --j) {
        tail += wv.w[j];
        wv.W[j] = tail;
    }

    wv.w_tilde = 0.0;
    for (int j = 0; j < R; ++j) wv.w_tilde += wv.w[j] * std::pow(nodes[j], R);

    // Residual check on the defining system.
    for (int r = 0; r < R; ++r) {
        double s = 0.0;
        for (int j = 0; j < R; ++j) s += wv.w[j] * std::pow(nodes[j], r);
        double resid = std::abs(s - (r == 0 ? 1.0 : 0.0));
        if (resid > 1e-8)
            throw std::runtime_error("solve_weights: residual " + std::to_string(resid) +
                                     " exceeds tolerance at row " + std::to_string(r));
    }
    return wv;
}

double residual_bias_factor(const WeightVector& wv) { return wv.w_tilde; }

}  // namespace nestmlmc::weights
