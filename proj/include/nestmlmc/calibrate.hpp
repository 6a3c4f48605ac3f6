#pragma once

#include <optional>
#include <vector>

#include "nestmlmc/estimator.hpp"
#include "nestmlmc/weights.hpp"

namespace nestmlmc::calib {

enum class Family { Crude, MLMC, ML2R };

struct CalibrationInput {
    double epsilon = 0.0;  // target RMSE
    double alpha = 0.0;    // fitted weak order
    double c1 = 0.0;       // fitted first bias coefficient
    double beta = 0.0;     // fitted strong order (informational)
    double V1 = 0.0;
    int M = 2;
    long K0 = 2;
    Family family = Family::MLMC;
    est::CouplingMode mode = est::CouplingMode::Standard;
    long pilot_n = 2000;
    std::optional<double> c_inf_override;  // replaces |c1| in the ML2R depth proxy
};

struct CalibrationPlan {
    Family family = Family::MLMC;
    est::LevelGeometry geometry{};
    est::Allocation allocation{};
    std::optional<weights::WeightVector> weights;
    double predicted_cost = 0.0;
    double predicted_bias = 0.0;
    double predicted_stat_error = 0.0;
};

// Depth needed to push the residual bias below epsilon / sqrt(2):
// MLMC: |c1| (h / M^{R-1})^alpha; ML2R: |w_tilde_{R+1}| c_proxy^R h^{alpha R}
// with c_proxy = |c1| unless overridden.
int choose_depth(const CalibrationInput& in);

// Crude-MC bias parameter: largest h = 1/K with |c1| h^alpha <= eps/sqrt(2).
long choose_crude_inner_count(const CalibrationInput& in);

// Effort-minimizing allocation q_j proportional to sqrt(V_j / c_j) from pilot
// level variances, and N sized so the statistical error budget is eps^2 / 2.
// pilot must cover levels 1..R (as produced by run_pilot); refuses otherwise.
CalibrationPlan plan(const CalibrationInput& in, const std::vector<est::LevelStats>& pilot);

// Pilot statistics for plan(): level variances and per-sample costs at the
// geometry the input implies.
std::vector<est::LevelStats> run_pilot(const model::NestedModel& m, const CalibrationInput& in,
                                       StreamKey key, int workers = 1);

// Convenience: pilot + plan.
CalibrationPlan calibrate(const model::NestedModel& m, const CalibrationInput& in, StreamKey key,
                          int workers = 1);

// Execute a plan with the matching estimator family.
est::EstimateResult execute(const model::NestedModel& m, const CalibrationPlan& plan,
                            est::CouplingMode mode, StreamKey key, int workers = 1);

// K eps^-2 exp(((1-beta)/sqrt(alpha)) sqrt(2 log(1/eps) log M)), the reference
// weighted-estimator cost curve. No clamping: the formula as written.
double theoretical_cost(double epsilon, double alpha, double beta, int M, double K = 1.0);

}  // namespace nestmlmc::calib
