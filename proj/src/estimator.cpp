#include "nestmlmc/estimator.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace nestmlmc::est {

namespace {
constexpr long kBlockSize = 4096;
}

long LevelGeometry::K(int j) const {
    if (j < 1 || j > R) throw std::invalid_argument("LevelGeometry: level out of range");
    long k = K0;
    for (int i = 1; i < j; ++i) k *= M;
    return k;
}

void LevelGeometry::validate() const {
    if (K0 < 1) throw std::invalid_argument("LevelGeometry: K0 must be >= 1");
    if (M < 2) throw std::invalid_argument("LevelGeometry: M must be >= 2");
    if (R < 1) throw std::invalid_argument("LevelGeometry: R must be >= 1");
}

long Allocation::n_level(int j) const {
    if (j < 1 || j > static_cast<int>(q.size()))
        throw std::invalid_argument("Allocation: level out of range");
    long n = static_cast<long>(std::ceil(q[j - 1] * static_cast<double>(N)));
    return n < 2 ? 2 : n;
}

void Allocation::validate(int R) const {
    if (N < 1) throw std::invalid_argument("Allocation: N must be positive");
    if (static_cast<int>(q.size()) != R)
        throw std::invalid_argument("Allocation: q must have one entry per level");
    double sum = 0.0;
    for (double qi : q) {
        if (!(qi > 0.0)) throw std::invalid_argument("Allocation: q_j must be positive");
        sum += qi;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("Allocation: q must sum to 1");
}

MeanVar blocked_mean_var(long n, int workers, const std::function<double(long)>& sample_at) {
    if (n < 1) throw std::invalid_argument("blocked_mean_var: n must be positive");
    if (workers < 1) workers = 1;

    const long n_blocks = (n + kBlockSize - 1) / kBlockSize;
    std::vector<double> block_sum(n_blocks, 0.0), block_sumsq(n_blocks, 0.0);

    std::atomic<long> next_block{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        try {
            for (;;) {
                long b = next_block.fetch_add(1, std::memory_order_relaxed);
                if (b >= n_blocks) return;
                long lo = b * kBlockSize;
                long hi = std::min(n, lo + kBlockSize);
                double s = 0.0, s2 = 0.0;
                for (long i = lo; i < hi; ++i) {
                    double v = sample_at(i);
                    s += v;
                    s2 += v * v;
                }
                block_sum[b] = s;
                block_sumsq[b] = s2;
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };

    if (workers == 1 || n_blocks == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        int nthreads = static_cast<int>(std::min<long>(workers, n_blocks));
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    // Index-ordered combination keeps the result schedule independent.
    double sum = 0.0, sumsq = 0.0;
    for (long b = 0; b < n_blocks; ++b) {
        sum += block_sum[b];
        sumsq += block_sumsq[b];
    }
    MeanVar mv;
    mv.n = n;
    mv.mean = sum / static_cast<double>(n);
    mv.var = n > 1 ? std::max(0.0, (sumsq - sum * mv.mean) / static_cast<double>(n - 1)) : 0.0;
    return mv;
}

namespace {

// Replicate stream layout: child(0) feeds the outer draw, child(1) is the
// inner key whose extension by k yields Z_k.
double draw_outer(const model::NestedModel& m, StreamKey rk) {
    Stream s(rk.child(0));
    return m.outer_sampler(s);
}

double inner_draw(const model::NestedModel& m, double y, StreamKey inner_key, long k) {
    Stream s(inner_key.child(static_cast<std::uint64_t>(k)));
    double v = m.inner_fn(y, m.inner_sampler(s));
    if (!std::isfinite(v)) throw model::EvaluationError(y, k);
    return v;
}

}  // namespace

double level_one_sample(const model::NestedModel& m, const LevelGeometry& g, StreamKey rk) {
    double y = draw_outer(m, rk);
    double x = model::sample_inner_mean(m, y, g.K(1), rk.child(1));
    double v = m.payoff.f(x);
    if (!std::isfinite(v)) throw model::EvaluationError(y, 0);
    return v;
}

double level_difference_sample(const model::NestedModel& m, const LevelGeometry& g, int j,
                               CouplingMode mode, StreamKey rk) {
    if (j < 2 || j > g.R) throw std::invalid_argument("level_difference_sample: need 2 <= j <= R");
    const long k_fine = g.K(j);
    const long k_coarse = g.K(j - 1);
    const int groups = g.M;

    double y = draw_outer(m, rk);
    StreamKey inner_key = rk.child(1);

    double total = 0.0;
    double group_sum = 0.0;
    double coarse_mean = 0.0;        // Standard: mean of first K_{j-1} draws
    double antithetic_acc = 0.0;     // Antithetic: running sum of f(group means)
    int group = 0;
    for (long k = 1; k <= k_fine; ++k) {
        double v = inner_draw(m, y, inner_key, k);
        total += v;
        group_sum += v;
        if (k % k_coarse == 0) {
            double gm = group_sum / static_cast<double>(k_coarse);
            if (group == 0) coarse_mean = gm;
            antithetic_acc += m.payoff.f(gm);
            group_sum = 0.0;
            ++group;
        }
    }
    double fine = m.payoff.f(total / static_cast<double>(k_fine));
    double out;
    if (mode == CouplingMode::Standard) {
        out = fine - m.payoff.f(coarse_mean);
    } else {
        out = fine - antithetic_acc / static_cast<double>(groups);
    }
    if (!std::isfinite(out)) throw model::EvaluationError(y, k_fine);
    return out;
}

double level_cost(const LevelGeometry& g, int j) {
    g.validate();
    if (j == 1) return static_cast<double>(g.K(1));
    return static_cast<double>(g.K(j) + g.K(j - 1));
}

EstimateResult estimate_crude(const model::NestedModel& m, double h, long N, StreamKey key,
                              int workers) {
    if (N < 2) throw std::invalid_argument("estimate_crude: N must be >= 2");
    double k_real = 1.0 / h;
    long K = std::lround(k_real);
    if (!(h > 0.0) || std::abs(k_real - static_cast<double>(K)) > 1e-9 || K < 1)
        throw std::invalid_argument("estimate_crude: 1/h must be a positive integer");

    LevelGeometry g{K, 2, 1};
    StreamKey level_key = key.child(1);
    MeanVar mv = blocked_mean_var(N, workers, [&](long i) {
        return level_one_sample(m, g, level_key.child(static_cast<std::uint64_t>(i)));
    });

    EstimateResult res;
    res.geometry = g;
    res.allocation = Allocation{N, {1.0}};
    res.seed = key.state;
    res.value = mv.mean;
    res.std_error = std::sqrt(mv.var / static_cast<double>(N));
    LevelStats ls;
    ls.level = 1;
    ls.mean = mv.mean;
    ls.var = mv.var;
    ls.n = N;
    ls.cost = static_cast<double>(N) * static_cast<double>(K);
    ls.nominal_cost = ls.cost;
    res.levels.push_back(ls);
    res.total_cost = ls.cost;
    res.total_nominal_cost = ls.nominal_cost;
    return res;
}

namespace {

EstimateResult estimate_multilevel(const model::NestedModel& m, const LevelGeometry& g,
                                   const Allocation& alloc, CouplingMode mode, StreamKey key,
                                   int workers, const std::vector<double>& level_weights) {
    g.validate();
    alloc.validate(g.R);

    if (mode == CouplingMode::Antithetic && m.payoff.kind == model::PayoffKind::Indicator)
        std::cerr << "warning: antithetic coupling with an indicator payoff; the improved "
                     "strong rate requires a Holder-continuous derivative\n";

    EstimateResult res;
    res.geometry = g;
    res.allocation = alloc;
    res.seed = key.state;

    double value = 0.0, var_acc = 0.0, cost = 0.0, nominal_cost = 0.0;
    for (int j = 1; j <= g.R; ++j) {
        const long nj = alloc.n_level(j);
        StreamKey level_key = key.child(static_cast<std::uint64_t>(j));
        MeanVar mv;
        if (j == 1) {
            mv = blocked_mean_var(nj, workers, [&](long i) {
                return level_one_sample(m, g, level_key.child(static_cast<std::uint64_t>(i)));
            });
        } else {
            mv = blocked_mean_var(nj, workers, [&](long i) {
                return level_difference_sample(m, g, j, mode,
                                               level_key.child(static_cast<std::uint64_t>(i)));
            });
        }
        const double wj = level_weights[j - 1];
        LevelStats ls;
        ls.level = j;
        ls.mean = mv.mean;
        ls.var = mv.var;
        ls.n = nj;
        ls.weight = wj;
        ls.cost = static_cast<double>(nj) * static_cast<double>(g.K(j));
        ls.nominal_cost = static_cast<double>(nj) * level_cost(g, j);
        res.levels.push_back(ls);

        value += wj * mv.mean;
        var_acc += wj * wj * mv.var / static_cast<double>(nj);
        cost += ls.cost;
        nominal_cost += ls.nominal_cost;
    }
    res.value = value;
    res.std_error = std::sqrt(var_acc);
    res.total_cost = cost;
    res.total_nominal_cost = nominal_cost;
    return res;
}

}  // namespace

EstimateResult estimate_mlmc(const model::NestedModel& m, const LevelGeometry& g,
                             const Allocation& alloc, CouplingMode mode, StreamKey key,
                             int workers) {
    std::vector<double> ones(g.R, 1.0);
    return estimate_multilevel(m, g, alloc, mode, key, workers, ones);
}

EstimateResult estimate_ml2r(const model::NestedModel& m, const LevelGeometry& g,
                             const Allocation& alloc, const weights::WeightVector& wv,
                             CouplingMode mode, StreamKey key, int workers) {
    if (wv.spec.M != g.M || wv.spec.R != g.R)
        throw std::invalid_argument("estimate_ml2r: weight vector solved for a different geometry");
    EstimateResult res = estimate_multilevel(m, g, alloc, mode, key, workers, wv.W);
    res.weight_vector = wv;
    return res;
}

}  // namespace nestmlmc::est
