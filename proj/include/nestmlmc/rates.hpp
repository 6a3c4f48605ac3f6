#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nestmlmc/estimator.hpp"
#include "nestmlmc/model.hpp"

namespace nestmlmc::rates {

struct RatePoint {
    double h = 0.0;       // bias parameter (weak) or level gap |h_j - h_{j-1}| (strong)
    double value = 0.0;   // bias or mean squared level difference
    double stderr_ = 0.0;
    double fit_lo = 0.0;
    double fit_hi = 0.0;
};

struct RateReport {
    double alpha_hat = 0.0;
    double c1_hat = 0.0;
    double beta_hat = 0.0;
    double V1_hat = 0.0;
    double r_squared = 0.0;
    std::vector<double> grid;
    std::vector<RatePoint> per_h;
    bool inconclusive = false;
};

struct ExpansionPoint {
    double x = 0.0;
    double c1_hat = 0.0;     // first-order CDF coefficient from the h-fit
    double c1_oracle = 0.0;  // integral of P_1 against the X_0 law up to x
    double resid_slope = 0.0;
};

struct ExpansionCheck {
    int order = 1;
    std::vector<ExpansionPoint> per_x;
};

// Marcinkiewicz-Zygmund constant B_p = 18 p^{3/2} (p-1)^{-1/2}; +inf within
// 1e-12 of the pole at p = 1.
double mz_constant(double p);

struct StrongBound {
    double value = 0.0;
    double norm_stderr = 0.0;  // nonzero when the p-norm had to be estimated
};

// Upper bound 2 B_p ||Xi - E[Xi|Y]||_p |h - h'|^{1/2} on ||X_h - X_{h'}||_p.
// Falls back to Monte Carlo estimation of the p-norm when no oracle exists.
StrongBound strong_bound_xh(const model::NestedModel& m, double p, double h, double h_prime,
                            StreamKey key = StreamKey::from_seed(0x5eed));

// Bound (p^{p/(p+1)} + p^{1/(p+1)}) (sup_f0 + sup_fh)^{p/(p+1)} delta_p^{p/(p+1)}
// on the squared L2 distance of the two indicators.
double indicator_strong_bound(double p, double sup_f0, double sup_fh, double delta_p);

// Core log-log fit of |bias| against h with inverse-variance weights.
// stderrs may be empty (exact inputs). Flags the fit inconclusive when the
// bias is indistinguishable from noise at half the grid or more.
RateReport fit_bias_points(std::span<const double> h, std::span<const double> bias,
                           std::span<const double> stderrs = {});

struct WeakRateOptions {
    bool prefer_analytic = true;        // use mean_payoff_at(h) when available
    std::optional<double> reference;    // target override when no oracle
    int workers = 1;
};

// Bias order and first coefficient: bias(h) = E[Y_h] - target per grid point,
// fitted on log-log axes. Monte Carlo fallback pairs each h with a common-
// random-number run at h_ref = h_min / M^2.
RateReport fit_weak_rate(const model::NestedModel& m, std::span<const double> h_grid,
                         long n_per_h, StreamKey key, const WeakRateOptions& opt = {});

// Weighted (ML2R) analytic bias sum_j w_j E[Y_{h/M^{j-1}}] - target on the
// given grid; requires the mean_payoff_at oracle.
RateReport fit_weighted_weak_rate(const model::NestedModel& m, const weights::WeightVector& wv,
                                  std::span<const double> h_grid);

// Strong rate: E[(level difference)^2] per probed level against the level gap
// h_{j-1} - h_j. beta_hat is the slope of the squared distance (the variance
// decay exponent); V1_hat = exp(intercept / 2).
RateReport fit_strong_rate(const model::NestedModel& m, const est::LevelGeometry& g,
                           est::CouplingMode mode, std::span<const int> levels, long n,
                           StreamKey key, int workers = 1);

// First-order CDF expansion check: extracts the h-coefficient of
// F_{X_h}(x) - F_{X_0}(x) per x, compares it with the P_1 integral, and fits
// the slope of the post-subtraction remainder. Needs density_x0, p1, cdf_xh.
ExpansionCheck cdf_expansion_check(const model::NestedModel& m, std::span<const double> x_grid,
                                   std::span<const double> h_grid);

}  // namespace nestmlmc::rates
