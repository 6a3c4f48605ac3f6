#include "nestmlmc/calibrate.hpp"

#include <cmath>
#include <stdexcept>

namespace nestmlmc::calib {

namespace {

double bias_budget(const CalibrationInput& in) { return in.epsilon / std::sqrt(2.0); }

double ml2r_residual_bias(const CalibrationInput& in, int R) {
    double c_proxy = in.c_inf_override ? *in.c_inf_override : std::abs(in.c1);
    double h = 1.0 / static_cast<double>(in.K0);
    auto wv = weights::solve_weights({in.alpha, in.M, R});
    return std::abs(wv.w_tilde) * std::pow(c_proxy, R) * std::pow(h, in.alpha * R);
}

void check_rates(const CalibrationInput& in) {
    if (!(in.epsilon > 0.0)) throw std::invalid_argument("calibrate: epsilon must be > 0");
    if (!(in.alpha > 0.0)) throw std::invalid_argument("calibrate: alpha must be > 0");
    if (in.c1 == 0.0) throw std::invalid_argument("calibrate: c1 rate info missing");
    if (in.K0 < 1 || in.M < 2) throw std::invalid_argument("calibrate: bad geometry parameters");
}

}  // namespace

int choose_depth(const CalibrationInput& in) {
    check_rates(in);
    const double budget = bias_budget(in);
    const double h = 1.0 / static_cast<double>(in.K0);
    if (in.family == Family::Crude) return 1;
    if (in.family == Family::MLMC) {
        for (int R = 1; R <= 40; ++R) {
            double bias = std::abs(in.c1) * std::pow(h / std::pow(in.M, R - 1), in.alpha);
            if (bias <= budget) return R;
        }
        throw std::runtime_error("choose_depth: MLMC depth above 40 required");
    }
    for (int R = 1; R <= 12; ++R) {
        if (ml2r_residual_bias(in, R) <= budget) return R;
    }
    throw std::runtime_error("choose_depth: ML2R depth above the R = 12 cap required");
}

long choose_crude_inner_count(const CalibrationInput& in) {
    check_rates(in);
    double h_star = std::pow(bias_budget(in) / std::abs(in.c1), 1.0 / in.alpha);
    long K = static_cast<long>(std::ceil(1.0 / h_star));
    return K < 1 ? 1 : K;
}

std::vector<est::LevelStats> run_pilot(const model::NestedModel& m, const CalibrationInput& in,
                                       StreamKey key, int workers) {
    est::LevelGeometry g;
    if (in.family == Family::Crude) {
        g = {choose_crude_inner_count(in), in.M, 1};
    } else {
        g = {in.K0, in.M, choose_depth(in)};
    }
    const long n = in.pilot_n < 2 ? 2 : in.pilot_n;
    std::vector<est::LevelStats> stats;
    for (int j = 1; j <= g.R; ++j) {
        StreamKey lk = key.child(static_cast<std::uint64_t>(j));
        est::MeanVar mv;
        if (j == 1) {
            mv = est::blocked_mean_var(n, workers, [&](long i) {
                return est::level_one_sample(m, g, lk.child(static_cast<std::uint64_t>(i)));
            });
        } else {
            mv = est::blocked_mean_var(n, workers, [&](long i) {
                return est::level_difference_sample(m, g, j, in.mode,
                                                    lk.child(static_cast<std::uint64_t>(i)));
            });
        }
        est::LevelStats ls;
        ls.level = j;
        ls.mean = mv.mean;
        ls.var = mv.var;
        ls.n = n;
        ls.cost = static_cast<double>(n) * static_cast<double>(g.K(j));
        ls.nominal_cost = static_cast<double>(n) * est::level_cost(g, j);
        stats.push_back(ls);
    }
    return stats;
}

CalibrationPlan plan(const CalibrationInput& in, const std::vector<est::LevelStats>& pilot) {
    check_rates(in);
    CalibrationPlan out;
    out.family = in.family;

    if (in.family == Family::Crude) {
        out.geometry = {choose_crude_inner_count(in), in.M, 1};
    } else {
        out.geometry = {in.K0, in.M, choose_depth(in)};
        if (in.family == Family::ML2R)
            out.weights = weights::solve_weights({in.alpha, in.M, out.geometry.R});
    }
    const int R = out.geometry.R;
    if (static_cast<int>(pilot.size()) < R)
        throw std::invalid_argument(
            "plan: pilot variances unavailable for all levels; run a pilot at depth R = " +
            std::to_string(R) + " first");

    // Effective per-level variance includes the ML2R weight.
    std::vector<double> v_eff(R), c_per(R);
    double q_norm = 0.0;
    std::vector<double> q(R);
    for (int j = 0; j < R; ++j) {
        double wj = out.weights ? out.weights->W[j] : 1.0;
        v_eff[j] = std::max(wj * wj * pilot[j].var, 1e-300);
        c_per[j] = pilot[j].cost / static_cast<double>(pilot[j].n);
        q[j] = std::sqrt(v_eff[j] / c_per[j]);
        q_norm += q[j];
    }
    for (double& qi : q) qi /= q_norm;

    double var_budget = 0.5 * in.epsilon * in.epsilon;
    double n_needed = 0.0;
    for (int j = 0; j < R; ++j) n_needed += v_eff[j] / q[j];
    n_needed /= var_budget;
    long N = static_cast<long>(std::ceil(n_needed));
    if (N < 2) N = 2;

    out.allocation = est::Allocation{N, q};

    const double h = out.geometry.h();
    if (in.family == Family::ML2R) {
        out.predicted_bias = ml2r_residual_bias(in, R);
    } else if (in.family == Family::MLMC) {
        out.predicted_bias = std::abs(in.c1) * std::pow(out.geometry.h_level(R), in.alpha);
    } else {
        out.predicted_bias = std::abs(in.c1) * std::pow(h, in.alpha);
    }
    double stat2 = 0.0;
    for (int j = 0; j < R; ++j) {
        long nj = out.allocation.n_level(j + 1);
        stat2 += v_eff[j] / static_cast<double>(nj);
        out.predicted_cost += static_cast<double>(nj) * c_per[j];
    }
    out.predicted_stat_error = std::sqrt(stat2);
    return out;
}

CalibrationPlan calibrate(const model::NestedModel& m, const CalibrationInput& in, StreamKey key,
                          int workers) {
    auto pilot = run_pilot(m, in, key.child(0), workers);
    return plan(in, pilot);
}

est::EstimateResult execute(const model::NestedModel& m, const CalibrationPlan& p,
                            est::CouplingMode mode, StreamKey key, int workers) {
    switch (p.family) {
        case Family::Crude:
            return est::estimate_crude(m, p.geometry.h(), p.allocation.N, key, workers);
        case Family::MLMC:
            return est::estimate_mlmc(m, p.geometry, p.allocation, mode, key, workers);
        case Family::ML2R:
            return est::estimate_ml2r(m, p.geometry, p.allocation, *p.weights, mode, key,
                                      workers);
    }
    throw std::logic_error("execute: unknown family");
}

double theoretical_cost(double epsilon, double alpha, double beta, int M, double K) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("theoretical_cost: eps in (0,1)");
    if (!(alpha > 0.0)) throw std::domain_error("theoretical_cost: alpha must be > 0");
    if (M < 2) throw std::domain_error("theoretical_cost: M must be >= 2");
    double factor = std::exp(((1.0 - beta) / std::sqrt(alpha)) *
                             std::sqrt(2.0 * std::log(1.0 / epsilon) * std::log(double(M))));
    return K * factor / (epsilon * epsilon);
}

}  // namespace nestmlmc::calib
