#pragma once

#include <span>
#include <vector>

namespace nestmlmc::bell {

struct PartialBellIndex {
    int n;  // order, >= 1
    int k;  // number of parts, 1 <= k <= n
};

// Ordered cumulants (kappa_1, ..., kappa_m).
using CumulantVector = std::vector<double>;

// Entries b_{r,j} for 1 <= j <= r <= r_max, evaluated at a fixed cumulant
// vector. b(r, j) = B_{r,j}(kappa_2/2, ..., kappa_{r-j+2}/(r-j+2)).
class BellCoefficientTable {
public:
    BellCoefficientTable(int r_max, std::vector<double> entries)
        : r_max_(r_max), entries_(std::move(entries)) {}

    int r_max() const { return r_max_; }
    double at(int r, int j) const;

private:
    int r_max_;
    std::vector<double> entries_;  // row r starts at r*(r-1)/2
};

// Partial Bell polynomial B_{n,k}(x_1, ..., x_{n-k+1}): sum over all
// nonnegative (l_1, ..., l_{n-k+1}) with sum(l_i) = k and sum(i*l_i) = n of
// n!/(l_1!...l_m!) * prod (x_i/i!)^{l_i}.
double partial_bell(PartialBellIndex index, std::span<const double> x);

// Complete Bell polynomial B_n = sum_{k=1}^n B_{n,k}.
double complete_bell(int n, std::span<const double> x);

// Raw moments E[xi^1..xi^n] from cumulants, via E[xi^j] = B_j(kappa_1..kappa_j).
std::vector<double> moments_from_cumulants(const CumulantVector& kappa, int n);

// Table of b_{r,j} coefficients used by the nested weak-error expansion.
// Needs kappa_2 ... kappa_{r_max+1}; r_max capped at 10.
BellCoefficientTable b_coefficients(const CumulantVector& kappa, int r_max);

// n-th moment of the mean of K = 1/h i.i.d. centered copies of a variable
// with cumulants kappa (kappa_1 must be 0):
//   h^n * sum_{k=1}^{ceil(n/2)} h^{-k} n!/(n-k)! b_{n-k,k}.
double centered_mean_moment(const CumulantVector& kappa, int n, double h);

}  // namespace nestmlmc::bell
