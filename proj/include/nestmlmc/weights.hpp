#pragma once

#include <vector>

namespace nestmlmc::weights {

struct WeightSpec {
    double alpha;  // weak-error order, > 0
    int M;         // level root, >= 2
    int R;         // depth, >= 1 (capped at 12)
};

struct WeightVector {
    std::vector<double> w;  // w_1 ... w_R
    std::vector<double> W;  // cumulative W_j = w_j + ... + w_R, W_1 == 1
    double w_tilde;         // residual factor sum_i w_i M^{-(i-1) alpha R}
    WeightSpec spec;
};

// Solve the R x R Vandermonde system in the nodes x_j = M^{-(j-1) alpha}:
// sum_j w_j = 1 and sum_j w_j x_j^r = 0 for r = 1..R-1, via the closed-form
// Lagrange evaluation w_j = L_j(0). Refuses R > 12; verifies residuals.
WeightVector solve_weights(const WeightSpec& spec);

// Residual-bias factor multiplying c_R h^{alpha R} in the weighted estimator.
double residual_bias_factor(const WeightVector& wv);

}  // namespace nestmlmc::weights
