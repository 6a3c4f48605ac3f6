#include "nestmlmc/model.hpp"

#include <cmath>

#include "nestmlmc/math.hpp"

namespace nestmlmc::model {

Payoff payoff_square() {
    Payoff p;
    p.kind = PayoffKind::HolderDerivative;
    p.f = [](double x) { return x * x; };
    p.name = "square";
    p.holder_rho = 1.0;
    p.holder_const = 2.0;  // [f']_1 for f' = 2x
    return p;
}

Payoff payoff_identity() {
    Payoff p;
    p.kind = PayoffKind::Smooth;
    p.f = [](double x) { return x; };
    p.name = "identity";
    p.lip_const = 1.0;
    return p;
}

Payoff payoff_relu() {
    Payoff p;
    p.kind = PayoffKind::Lipschitz;
    p.f = [](double x) { return x > 0.0 ? x : 0.0; };
    p.name = "relu";
    p.lip_const = 1.0;
    return p;
}

Payoff payoff_indicator(double threshold, IndicatorDirection direction) {
    Payoff p;
    p.kind = PayoffKind::Indicator;
    p.threshold = threshold;
    p.direction = direction;
    if (direction == IndicatorDirection::Leq)
        p.f = [threshold](double x) { return x <= threshold ? 1.0 : 0.0; };
    else
        p.f = [threshold](double x) { return x >= threshold ? 1.0 : 0.0; };
    p.name = "indicator";
    return p;
}

double sample_inner_mean(const NestedModel& model, double y, long K, StreamKey key) {
    if (K < 1) throw std::invalid_argument("sample_inner_mean: K must be >= 1");
    double sum = 0.0;
    for (long k = 1; k <= K; ++k) {
        Stream zs(key.child(static_cast<std::uint64_t>(k)));
        double v = model.inner_fn(y, model.inner_sampler(zs));
        if (!std::isfinite(v)) throw EvaluationError(y, k);
        sum += v;
    }
    return sum / static_cast<double>(K);
}

namespace {

double abs_gaussian_pnorm(double p) {
    // (E|N(0,1)|^p)^(1/p) = (2^{p/2} Gamma((p+1)/2) / sqrt(pi))^{1/p}
    double logm = 0.5 * p * std::log(2.0) + std::lgamma(0.5 * (p + 1.0)) -
                  0.5 * std::log(3.14159265358979323846);
    return std::exp(logm / p);
}

}  // namespace

NestedModel builtin_gaussian_linear(double mu_Y, double sigma_Y, double sigma, Payoff payoff) {
    if (!(sigma_Y > 0.0)) throw std::invalid_argument("builtin_gaussian_linear: sigma_Y > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("builtin_gaussian_linear: sigma > 0");

    NestedModel m;
    m.name = "gaussian_linear";
    m.payoff = payoff;
    m.outer_sampler = [mu_Y, sigma_Y](Stream& s) { return mu_Y + sigma_Y * s.next_gaussian(); };
    m.inner_sampler = [](Stream& s) { return s.next_gaussian(); };
    m.inner_fn = [sigma](double y, double z) { return y + sigma * z; };

    AnalyticOracles& o = m.oracles;
    o.conditional_variance = [sigma](double) { return sigma * sigma; };
    o.strong_l2 = [sigma](double h, double hp) { return sigma * std::sqrt(std::abs(h - hp)); };
    o.centered_pnorm = [sigma](double p) { return sigma * abs_gaussian_pnorm(p); };

    const double s2 = sigma * sigma;
    if (payoff.name == "square") {
        const double base = mu_Y * mu_Y + sigma_Y * sigma_Y;
        o.mean_payoff_at = [base, s2](double h) { return base + s2 * h; };
        o.target = base;
    } else if (payoff.name == "identity") {
        o.mean_payoff_at = [mu_Y](double) { return mu_Y; };
        o.target = mu_Y;
    } else if (payoff.name == "relu") {
        // E[max(N(mu, v), 0)] with v = sigma_Y^2 + sigma^2 h.
        o.mean_payoff_at = [mu_Y, sigma_Y, s2](double h) {
            double sd = std::sqrt(sigma_Y * sigma_Y + s2 * h);
            return mu_Y * norm_cdf(mu_Y / sd) + sd * norm_pdf(mu_Y / sd);
        };
        o.target = o.mean_payoff_at(0.0);
    } else if (payoff.kind == PayoffKind::Indicator && mu_Y == 0.0 && sigma_Y == 1.0) {
        const double a = payoff.threshold;
        const bool leq = payoff.direction == IndicatorDirection::Leq;
        o.mean_payoff_at = [a, s2, leq](double h) {
            double c = norm_cdf(a / std::sqrt(1.0 + s2 * h));
            return leq ? c : 1.0 - c;
        };
        o.target = o.mean_payoff_at(0.0);
        o.density_x0 = [](double x) { return norm_pdf(x); };
        o.p1 = [s2](double x) { return 0.5 * s2 * (x * x - 1.0); };
        o.cdf_xh = [s2](double h, double x) { return norm_cdf(x / std::sqrt(1.0 + s2 * h)); };
    }
    return m;
}

namespace {

double bs_call_price(double spot, double strike, double rate, double vol, double tau) {
    if (tau <= 0.0) return std::max(spot - strike, 0.0);
    double sd = vol * std::sqrt(tau);
    double d1 = (std::log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / sd;
    double d2 = d1 - sd;
    return spot * norm_cdf(d1) - strike * std::exp(-rate * tau) * norm_cdf(d2);
}

}  // namespace

NestedModel builtin_bs_nested(double s0, double r, double vol, double t1, double T,
                              double strike, double loss_threshold) {
    if (!(t1 > 0.0 && t1 < T)) throw std::invalid_argument("builtin_bs_nested: need 0 < t1 < T");
    if (!(vol > 0.0)) throw std::invalid_argument("builtin_bs_nested: vol > 0");
    if (!(s0 > 0.0 && strike > 0.0)) throw std::invalid_argument("builtin_bs_nested: s0, strike > 0");

    const double tau = T - t1;
    const double drift1 = (r - 0.5 * vol * vol) * t1;
    const double sd1 = vol * std::sqrt(t1);
    const double drift2 = (r - 0.5 * vol * vol) * tau;
    const double sd2 = vol * std::sqrt(tau);
    const double disc = std::exp(-r * tau);

    NestedModel m;
    m.name = "bs_nested";
    m.payoff = payoff_indicator(loss_threshold, IndicatorDirection::Geq);
    m.outer_sampler = [s0, drift1, sd1](Stream& s) {
        return s0 * std::exp(drift1 + sd1 * s.next_gaussian());
    };
    m.inner_sampler = [](Stream& s) { return s.next_gaussian(); };
    m.inner_fn = [strike, drift2, sd2, disc](double y, double z) {
        double sT = y * std::exp(drift2 + sd2 * z);
        return disc * std::max(sT - strike, 0.0);
    };

    AnalyticOracles& o = m.oracles;
    const auto price = [strike, r, vol, tau](double y) { return bs_call_price(y, strike, r, vol, tau); };
    o.conditional_variance = [=](double y) {
        // var(F(y,Z)) by direct quadrature over the Gaussian increment.
        double mean = price(y);
        auto sq = [&](double z) {
            double v = disc * std::max(y * std::exp(drift2 + sd2 * z) - strike, 0.0) - mean;
            return v * v * norm_pdf(z);
        };
        return simpson(sq, -10.0, 10.0, 2000);
    };

    if (loss_threshold <= 0.0) {
        o.target = 1.0;
    } else {
        // C(y) is strictly increasing in y; invert by bisection, then use the
        // lognormal law of Y.
        double lo = 1e-12, hi = s0;
        while (price(hi) < loss_threshold && hi < 1e12) hi *= 2.0;
        if (price(hi) < loss_threshold) {
            o.target = 0.0;
        } else {
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                (price(mid) < loss_threshold ? lo : hi) = mid;
            }
            double ystar = 0.5 * (lo + hi);
            o.target = norm_cdf(-(std::log(ystar / s0) - drift1) / sd1);
        }
    }
    return m;
}

}  // namespace nestmlmc::model
