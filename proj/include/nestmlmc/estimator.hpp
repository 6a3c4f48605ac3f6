#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "nestmlmc/model.hpp"
#include "nestmlmc/weights.hpp"

namespace nestmlmc::est {

struct LevelGeometry {
    long K0;  // coarsest inner sample count, h = 1/K0
    int M;    // level root >= 2
    int R;    // depth >= 1

    double h() const { return 1.0 / static_cast<double>(K0); }
    long K(int j) const;        // K0 * M^(j-1)
    double h_level(int j) const { return 1.0 / static_cast<double>(K(j)); }
    void validate() const;
};

struct Allocation {
    long N = 0;             // total budget driver
    std::vector<double> q;  // positive, sums to 1, one entry per level

    long n_level(int j) const;  // max(2, ceil(q_j * N))
    void validate(int R) const;
};

enum class CouplingMode { Standard, Antithetic };

struct LevelStats {
    int level = 0;
    double mean = 0.0;
    double var = 0.0;  // empirical variance of the raw level summand
    long n = 0;
    double cost = 0.0;        // raw inner-function evaluations
    double nominal_cost = 0.0;  // kappa h^-1 convention, fine + coarse charged
    double weight = 1.0;      // W_j for ML2R, 1 otherwise
};

struct EstimateResult {
    double value = 0.0;
    double std_error = 0.0;
    double total_cost = 0.0;        // raw evaluations
    double total_nominal_cost = 0.0;
    std::vector<LevelStats> levels;
    LevelGeometry geometry{};
    Allocation allocation{};
    std::optional<weights::WeightVector> weight_vector;
    std::uint64_t seed = 0;
};

// Blocked deterministic reduction: replicates are split into fixed blocks,
// blocks are processed by any number of workers, and per-block partial sums
// are combined in index order. sample_at(i) must depend only on i.
struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
    long n = 0;
};
MeanVar blocked_mean_var(long n, int workers, const std::function<double(long)>& sample_at);

// One coarse-level payoff sample f(X_{h_1}) at the given replicate key.
double level_one_sample(const model::NestedModel& m, const LevelGeometry& g, StreamKey rk);

// One level-j difference sample, j >= 2. Standard: f(mean of K_j) - f(mean of
// first K_{j-1}), same outer draw and shared inner draws. Antithetic: f(mean
// of K_j) - average of f over the M consecutive group means of size K_{j-1}.
double level_difference_sample(const model::NestedModel& m, const LevelGeometry& g, int j,
                               CouplingMode mode, StreamKey rk);

// Paper-style per-sample cost: K_1 at level 1, K_j + K_{j-1} above.
double level_cost(const LevelGeometry& g, int j);

EstimateResult estimate_crude(const model::NestedModel& m, double h, long N, StreamKey key,
                              int workers = 1);
EstimateResult estimate_mlmc(const model::NestedModel& m, const LevelGeometry& g,
                             const Allocation& alloc, CouplingMode mode, StreamKey key,
                             int workers = 1);
EstimateResult estimate_ml2r(const model::NestedModel& m, const LevelGeometry& g,
                             const Allocation& alloc, const weights::WeightVector& wv,
                             CouplingMode mode, StreamKey key, int workers = 1);

}  // namespace nestmlmc::est
