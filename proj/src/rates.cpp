#include "nestmlmc/rates.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nestmlmc/math.hpp"

namespace nestmlmc::rates {

double mz_constant(double p) {
    if (p <= 1.0) throw std::domain_error("mz_constant: p must be > 1");
    if (p - 1.0 < 1e-12) return std::numeric_limits<double>::infinity();
    return 18.0 * std::pow(p, 1.5) / std::sqrt(p - 1.0);
}

StrongBound strong_bound_xh(const model::NestedModel& m, double p, double h, double h_prime,
                            StreamKey key) {
    if (p <= 1.0) throw std::domain_error("strong_bound_xh: p must be > 1");
    StrongBound out;
    double norm;
    if (m.oracles.centered_pnorm) {
        norm = m.oracles.centered_pnorm(p);
    } else {
        // Estimate ||Xi - E[Xi|Y]||_p: per outer draw, centre F(y, Z) by a
        // high-resolution inner mean.
        const long n_outer = 20000;
        const long k_ref = 1024;
        double sum = 0.0, sumsq = 0.0;
        for (long i = 0; i < n_outer; ++i) {
            StreamKey rk = key.child(static_cast<std::uint64_t>(i));
            Stream ys(rk.child(0));
            double y = m.outer_sampler(ys);
            double phi = model::sample_inner_mean(m, y, k_ref, rk.child(1));
            Stream zs(rk.child(2));
            double xi = m.inner_fn(y, m.inner_sampler(zs));
            double v = std::pow(std::abs(xi - phi), p);
            sum += v;
            sumsq += v * v;
        }
        double mean = sum / n_outer;
        double var = (sumsq - sum * mean) / (n_outer - 1);
        norm = std::pow(mean, 1.0 / p);
        // Delta method on the p-th root.
        out.norm_stderr = std::sqrt(var / n_outer) / (p * std::pow(mean, 1.0 - 1.0 / p));
    }
    out.value = 2.0 * mz_constant(p) * norm * std::sqrt(std::abs(h - h_prime));
    return out;
}

double indicator_strong_bound(double p, double sup_f0, double sup_fh, double delta_p) {
    if (p < 1.0) throw std::domain_error("indicator_strong_bound: p must be >= 1");
    if (sup_f0 < 0.0 || sup_fh < 0.0 || delta_p < 0.0)
        throw std::domain_error("indicator_strong_bound: negative inputs");
    double e = p / (p + 1.0);
    return (std::pow(p, e) + std::pow(p, 1.0 / (p + 1.0))) * std::pow(sup_f0 + sup_fh, e) *
           std::pow(delta_p, e);
}

RateReport fit_bias_points(std::span<const double> h, std::span<const double> bias,
                           std::span<const double> stderrs) {
    if (h.size() != bias.size() || h.size() < 2)
        throw std::invalid_argument("fit_bias_points: need >= 2 matching points");
    const bool noisy = !stderrs.empty();
    if (noisy && stderrs.size() != h.size())
        throw std::invalid_argument("fit_bias_points: stderr size mismatch");

    RateReport rep;
    rep.grid.assign(h.begin(), h.end());
    size_t drowned = 0;
    std::vector<double> lx, ly, lw;
    for (size_t i = 0; i < h.size(); ++i) {
        RatePoint pt;
        pt.h = h[i];
        pt.value = bias[i];
        pt.stderr_ = noisy ? stderrs[i] : 0.0;
        rep.per_h.push_back(pt);
        if (bias[i] == 0.0 || (noisy && std::abs(bias[i]) < 2.0 * stderrs[i])) {
            ++drowned;
            continue;
        }
        lx.push_back(std::log(h[i]));
        ly.push_back(std::log(std::abs(bias[i])));
        // var(log|b|) ~ (stderr/b)^2; inverse-variance weights.
        lw.push_back(noisy ? (bias[i] / stderrs[i]) * (bias[i] / stderrs[i]) : 1.0);
    }
    if (drowned * 2 >= h.size() || lx.size() < 2) {
        rep.inconclusive = true;
        return rep;
    }
    LineFit fit = ols_line(lx, ly, lw);
    rep.alpha_hat = fit.slope;
    rep.r_squared = fit.r_squared;
    double sign = bias[0] >= 0.0 ? 1.0 : -1.0;
    rep.c1_hat = sign * std::exp(fit.intercept);
    for (auto& pt : rep.per_h) {
        double fitted = std::exp(fit.intercept + fit.slope * std::log(pt.h));
        pt.fit_lo = sign * fitted - 1.96 * pt.stderr_;
        pt.fit_hi = sign * fitted + 1.96 * pt.stderr_;
    }
    return rep;
}

namespace {

// Common-random-number bias probe: E[Y_h - Y_{h_ref}] with the inner mean at
// K reusing the first K of the K_ref shared draws.
est::MeanVar crn_bias(const model::NestedModel& m, long K, long k_ref, long n, StreamKey key,
                      int workers) {
    return est::blocked_mean_var(n, workers, [&](long i) {
        StreamKey rk = key.child(static_cast<std::uint64_t>(i));
        Stream ys(rk.child(0));
        double y = m.outer_sampler(ys);
        StreamKey ik = rk.child(1);
        double sum = 0.0, sum_k = 0.0;
        for (long k = 1; k <= k_ref; ++k) {
            Stream zs(ik.child(static_cast<std::uint64_t>(k)));
            double v = m.inner_fn(y, m.inner_sampler(zs));
            if (!std::isfinite(v)) throw model::EvaluationError(y, k);
            sum += v;
            if (k == K) sum_k = sum;
        }
        return m.payoff.f(sum_k / static_cast<double>(K)) -
               m.payoff.f(sum / static_cast<double>(k_ref));
    });
}

}  // namespace

RateReport fit_weak_rate(const model::NestedModel& m, std::span<const double> h_grid,
                         long n_per_h, StreamKey key, const WeakRateOptions& opt) {
    if (h_grid.size() < 4)
        throw std::invalid_argument("fit_weak_rate: need a grid of >= 4 points");
    for (size_t i = 1; i < h_grid.size(); ++i)
        if (!(h_grid[i] < h_grid[i - 1]))
            throw std::invalid_argument("fit_weak_rate: grid must be strictly decreasing");

    const bool analytic = opt.prefer_analytic && static_cast<bool>(m.oracles.mean_payoff_at);
    std::vector<double> bias(h_grid.size()), errs;

    if (analytic) {
        double target = m.oracles.mean_payoff_at(0.0);
        for (size_t i = 0; i < h_grid.size(); ++i)
            bias[i] = m.oracles.mean_payoff_at(h_grid[i]) - target;
        return fit_bias_points(h_grid, bias);
    }

    errs.resize(h_grid.size());
    std::optional<double> target;
    if (opt.reference)
        target = *opt.reference;
    else if (m.oracles.target)
        target = *m.oracles.target;

    for (size_t i = 0; i < h_grid.size(); ++i) {
        long K = std::lround(1.0 / h_grid[i]);
        StreamKey hk = key.child(static_cast<std::uint64_t>(i));
        if (target) {
            est::EstimateResult r = est::estimate_crude(m, h_grid[i], n_per_h, hk, opt.workers);
            bias[i] = r.value - *target;
            errs[i] = r.std_error;
        } else {
            // No reference value at all: pair against h_ref = h_min / M^2.
            long k_ref = std::lround(1.0 / h_grid.back()) * 4;
            est::MeanVar mv = crn_bias(m, K, k_ref, n_per_h, hk, opt.workers);
            bias[i] = mv.mean;
            errs[i] = std::sqrt(mv.var / static_cast<double>(mv.n));
        }
    }
    return fit_bias_points(h_grid, bias, errs);
}

RateReport fit_weighted_weak_rate(const model::NestedModel& m, const weights::WeightVector& wv,
                                  std::span<const double> h_grid) {
    if (!m.oracles.mean_payoff_at)
        throw std::invalid_argument("fit_weighted_weak_rate: model has no mean oracle");
    double target = m.oracles.mean_payoff_at(0.0);
    std::vector<double> bias(h_grid.size());
    for (size_t i = 0; i < h_grid.size(); ++i) {
        double s = 0.0;
        double hj = h_grid[i];
        for (int j = 0; j < wv.spec.R; ++j) {
            s += wv.w[j] * m.oracles.mean_payoff_at(hj);
            hj /= wv.spec.M;
        }
        bias[i] = s - target;
    }
    return fit_bias_points(h_grid, bias);
}

RateReport fit_strong_rate(const model::NestedModel& m, const est::LevelGeometry& g,
                           est::CouplingMode mode, std::span<const int> levels, long n,
                           StreamKey key, int workers) {
    if (levels.size() < 4)
        throw std::invalid_argument("fit_strong_rate: need >= 4 probe levels");
    std::vector<double> gaps, meansq, errs;
    for (int j : levels) {
        if (j < 2 || j > g.R) throw std::invalid_argument("fit_strong_rate: level out of range");
        StreamKey lk = key.child(static_cast<std::uint64_t>(j));
        est::MeanVar mv = est::blocked_mean_var(n, workers, [&](long i) {
            double d = est::level_difference_sample(m, g, j, mode,
                                                    lk.child(static_cast<std::uint64_t>(i)));
            return d * d;
        });
        gaps.push_back(g.h_level(j - 1) - g.h_level(j));
        meansq.push_back(mv.mean);
        errs.push_back(std::sqrt(mv.var / static_cast<double>(n)));
    }
    RateReport rep = fit_bias_points(gaps, meansq, errs);
    rep.beta_hat = rep.alpha_hat;
    rep.V1_hat = rep.inconclusive ? 0.0 : std::sqrt(std::abs(rep.c1_hat));
    rep.alpha_hat = 0.0;
    rep.c1_hat = 0.0;
    return rep;
}

ExpansionCheck cdf_expansion_check(const model::NestedModel& m, std::span<const double> x_grid,
                                   std::span<const double> h_grid) {
    if (!m.oracles.density_x0 || !m.oracles.p1 || !m.oracles.cdf_xh)
        throw std::invalid_argument("cdf_expansion_check: model lacks the required oracles");
    ExpansionCheck chk;
    std::vector<double> d0(h_grid.size());
    for (double x : x_grid) {
        ExpansionPoint pt;
        pt.x = x;
        pt.c1_oracle = simpson(
            [&](double t) { return m.oracles.p1(t) * m.oracles.density_x0(t); }, x - 30.0, x,
            6000);
        for (size_t i = 0; i < h_grid.size(); ++i)
            d0[i] = m.oracles.cdf_xh(h_grid[i], x) - m.oracles.cdf_xh(0.0, x);
        pt.c1_hat = fit_h_h2(h_grid, d0).first;

        std::vector<double> lx, ly;
        for (size_t i = 0; i < h_grid.size(); ++i) {
            double resid = d0[i] - h_grid[i] * pt.c1_oracle;
            if (resid != 0.0) {
                lx.push_back(std::log(h_grid[i]));
                ly.push_back(std::log(std::abs(resid)));
            }
        }
        pt.resid_slope = lx.size() >= 2 ? ols_line(lx, ly).slope : 0.0;
        chk.per_x.push_back(pt);
    }
    return chk;
}

}  // namespace nestmlmc::rates
