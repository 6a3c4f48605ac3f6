#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "nestmlmc/rng.hpp"

namespace nestmlmc::model {

enum class PayoffKind { Smooth, Lipschitz, HolderDerivative, Indicator };
enum class IndicatorDirection { Leq, Geq };

struct Payoff {
    PayoffKind kind = PayoffKind::Smooth;
    std::function<double(double)> f;
    std::string name;  // stable identifier for config round-trips

    double threshold = 0.0;  // Indicator only
    IndicatorDirection direction = IndicatorDirection::Leq;
    double holder_rho = 1.0;
    std::optional<double> lip_const;
    std::optional<double> holder_const;
};

Payoff payoff_square();
Payoff payoff_identity();
Payoff payoff_relu();
Payoff payoff_indicator(double threshold, IndicatorDirection direction);

// Closed forms used by the acceptance harness; any member may be absent.
struct AnalyticOracles {
    std::optional<double> target;                         // E[f(X_0)]
    std::function<double(double)> mean_payoff_at;         // h -> E[f(X_h)]
    std::function<double(double)> conditional_variance;   // y -> kappa_{2,y}
    std::function<double(double)> density_x0;             // x -> f_{X_0}(x)
    std::function<double(double)> p1;                     // first expansion polynomial
    std::function<double(double, double)> cdf_xh;         // (h, x) -> F_{X_h}(x)
    std::function<double(double, double)> strong_l2;      // (h, h') -> ||X_h - X_h'||_2
    std::function<double(double)> centered_pnorm;         // p -> ||Xi - E[Xi|Y]||_p
};

struct EvaluationError : std::runtime_error {
    EvaluationError(double y, long k)
        : std::runtime_error("non-finite inner function value at y=" + std::to_string(y) +
                             ", inner index " + std::to_string(k)),
          y_value(y),
          inner_index(k) {}
    double y_value;
    long inner_index;
};

struct NestedModel {
    std::function<double(Stream&)> outer_sampler;
    std::function<double(Stream&)> inner_sampler;
    std::function<double(double, double)> inner_fn;  // F(y, z)
    Payoff payoff;
    AnalyticOracles oracles;
    double moment_order = 16.0;  // p with Xi in L^p, asserted by the author
    std::string name;
};

// Mean of K inner evaluations (1/K) sum_k F(y, Z_k), with Z_k drawn from the
// stream at key extended by k. Deterministic given (y, K, key).
double sample_inner_mean(const NestedModel& model, double y, long K, StreamKey key);

// Y ~ N(mu_Y, sigma_Y^2), Z ~ N(0,1), F(y,z) = y + sigma*z, so X_0 = Y.
// Oracles are populated where closed forms exist for the given payoff.
NestedModel builtin_gaussian_linear(double mu_Y, double sigma_Y, double sigma, Payoff payoff);

// Y = geometric-Brownian asset value at t1; F propagates to T and pays the
// discounted call; payoff is the loss indicator 1{C(Y) >= q}. The target is
// recovered by monotone inversion of the call price against the lognormal law.
NestedModel builtin_bs_nested(double s0, double r, double vol, double t1, double T,
                              double strike, double loss_threshold);

}  // namespace nestmlmc::model
