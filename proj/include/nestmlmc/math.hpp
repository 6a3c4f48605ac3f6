#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace nestmlmc {

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

// Acklam's rational approximation of the standard normal quantile,
// followed by one Halley refinement step (relative error ~ 1e-15).
double norm_quantile(double u);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Weighted ordinary least squares of y against x. Empty weights means
// equal weighting. Requires at least two distinct x values.
LineFit ols_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> w = {});

// Least-squares coefficients (a, b) of y ~ a*h + b*h^2 through the origin.
std::pair<double, double> fit_h_h2(std::span<const double> h, std::span<const double> y);

// Composite Simpson rule on [a, b] with n subintervals (n rounded up to even).
double simpson(const std::function<double(double)>& f, double a, double b, int n);

}  // namespace nestmlmc
