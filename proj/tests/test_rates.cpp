#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nestmlmc/rates.hpp"
#include "nestmlmc/weights.hpp"

using namespace nestmlmc;

namespace {
model::NestedModel gaussian(model::Payoff p, double sigma = 1.0) {
    return model::builtin_gaussian_linear(0.0, 1.0, sigma, std::move(p));
}
}  // namespace

TEST_CASE("mz constant") {
    CHECK(rates::mz_constant(2.0) == doctest::Approx(36.0 * std::sqrt(2.0)));
    CHECK(rates::mz_constant(2.0) == doctest::Approx(50.9117).epsilon(1e-5));
    CHECK(rates::mz_constant(5.0) == doctest::Approx(100.623).epsilon(1e-5));
    CHECK(std::isinf(rates::mz_constant(1.0 + 1e-13)));
    CHECK_THROWS_AS(rates::mz_constant(1.0), std::domain_error);
    CHECK_THROWS_AS(rates::mz_constant(0.5), std::domain_error);
}

TEST_CASE("strong bound dominates the exact L2 distance") {
    auto m = gaussian(model::payoff_square(), 1.3);
    for (double h : {0.5, 0.125, 1.0 / 64.0}) {
        for (double hp : {0.0, h / 2.0}) {
            auto b = rates::strong_bound_xh(m, 2.0, h, hp);
            CHECK(b.norm_stderr == 0.0);  // analytic p-norm available
            CHECK(b.value >= m.oracles.strong_l2(h, hp));
            CHECK(b.value ==
                  doctest::Approx(2.0 * rates::mz_constant(2.0) * 1.3 * std::sqrt(h - hp)));
        }
    }
    CHECK_THROWS_AS(rates::strong_bound_xh(m, 1.0, 0.5, 0.0), std::domain_error);
}

TEST_CASE("strong bound falls back to a Monte Carlo p-norm") {
    auto m = gaussian(model::payoff_square(), 0.9);
    double analytic = rates::strong_bound_xh(m, 2.0, 0.25, 0.0).value;
    m.oracles.centered_pnorm = nullptr;
    auto mc = rates::strong_bound_xh(m, 2.0, 0.25, 0.0, StreamKey::from_seed(31));
    CHECK(mc.norm_stderr > 0.0);
    CHECK(mc.value == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("indicator strong bound") {
    // p = 1 collapses to 2 sqrt((sup_f0 + sup_fh) delta).
    CHECK(rates::indicator_strong_bound(1.0, 0.3, 0.2, 0.01) ==
          doctest::Approx(2.0 * std::sqrt(0.5 * 0.01)));
    // Monotone in every argument.
    double base = rates::indicator_strong_bound(3.0, 0.4, 0.4, 0.05);
    CHECK(rates::indicator_strong_bound(3.0, 0.5, 0.4, 0.05) > base);
    CHECK(rates::indicator_strong_bound(3.0, 0.4, 0.4, 0.06) > base);
    CHECK_THROWS_AS(rates::indicator_strong_bound(0.5, 1, 1, 1), std::domain_error);
    CHECK_THROWS_AS(rates::indicator_strong_bound(2.0, -1, 1, 1), std::domain_error);
}

TEST_CASE("log-log fit recovers synthetic power laws") {
    std::vector<double> h = {0.5, 0.25, 0.125, 0.0625, 0.03125};
    for (double a : {0.5, 1.0, 1.5, 2.0}) {
        for (double c : {0.7, -2.4}) {
            std::vector<double> bias(h.size());
            for (size_t i = 0; i < h.size(); ++i) bias[i] = c * std::pow(h[i], a);
            auto rep = rates::fit_bias_points(h, bias);
            CHECK_FALSE(rep.inconclusive);
            CHECK(rep.alpha_hat == doctest::Approx(a).epsilon(1e-10));
            CHECK(rep.c1_hat == doctest::Approx(c).epsilon(1e-10));
            CHECK(rep.r_squared == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    // Rescaling the bias leaves the order alone and scales the coefficient.
    std::vector<double> bias(h.size()), scaled(h.size());
    for (size_t i = 0; i < h.size(); ++i) {
        bias[i] = 0.8 * h[i];
        scaled[i] = 5.0 * bias[i];
    }
    auto r1 = rates::fit_bias_points(h, bias);
    auto r2 = rates::fit_bias_points(h, scaled);
    CHECK(r2.alpha_hat == doctest::Approx(r1.alpha_hat).epsilon(1e-12));
    CHECK(r2.c1_hat == doctest::Approx(5.0 * r1.c1_hat).epsilon(1e-12));
}

TEST_CASE("noise-drowned grids are flagged inconclusive") {
    std::vector<double> h = {0.5, 0.25, 0.125, 0.0625};
    std::vector<double> bias = {1e-6, -2e-6, 1e-6, -1e-6};
    std::vector<double> errs = {1e-3, 1e-3, 1e-3, 1e-3};
    auto rep = rates::fit_bias_points(h, bias, errs);
    CHECK(rep.inconclusive);
    // Exact data stays inside the reported band at every grid point.
    std::vector<double> clean(h.size()), cerr(h.size(), 1e-5);
    for (size_t i = 0; i < h.size(); ++i) clean[i] = 0.4 * h[i];
    auto ok = rates::fit_bias_points(h, clean, cerr);
    CHECK_FALSE(ok.inconclusive);
    for (auto& pt : ok.per_h) {
        CHECK(pt.fit_lo <= pt.value);
        CHECK(pt.value <= pt.fit_hi);
    }
    CHECK_THROWS_AS(rates::fit_bias_points(std::vector<double>{0.5}, std::vector<double>{0.1}),
                    std::invalid_argument);
}

TEST_CASE("weak rate, analytic path") {
    SUBCASE("square payoff: exact first-order bias sigma^2 h") {
        auto m = gaussian(model::payoff_square(), 1.5);
        std::vector<double> grid = {0.5, 0.25, 0.125, 0.0625};
        auto rep = rates::fit_weak_rate(m, grid, 0, StreamKey::from_seed(1));
        CHECK(rep.alpha_hat == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(rep.c1_hat == doctest::Approx(2.25).epsilon(1e-10));
    }
    SUBCASE("indicator payoff: coefficient -a phi(a) sigma^2 / 2") {
        auto m = gaussian(model::payoff_indicator(1.0, model::IndicatorDirection::Leq));
        std::vector<double> grid = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
        auto rep = rates::fit_weak_rate(m, grid, 0, StreamKey::from_seed(1));
        CHECK(rep.alpha_hat == doctest::Approx(1.0).epsilon(0.05));
        CHECK(rep.c1_hat == doctest::Approx(-0.120985).epsilon(0.05));
    }
    CHECK_THROWS_AS(rates::fit_weak_rate(gaussian(model::payoff_square()),
                                         std::vector<double>{0.5, 0.25, 0.125}, 0,
                                         StreamKey::from_seed(1)),
                    std::invalid_argument);
}

TEST_CASE("weak rate, Monte Carlo path with a known target") {
    auto m = gaussian(model::payoff_relu());
    std::vector<double> grid = {0.5, 0.25, 0.125, 0.0625};
    rates::WeakRateOptions opt;
    opt.prefer_analytic = false;
    auto rep = rates::fit_weak_rate(m, grid, 400000, StreamKey::from_seed(67), opt);
    REQUIRE_FALSE(rep.inconclusive);
    // E[Y_h] = sqrt(1 + h) / sqrt(2 pi): order 1, coefficient 1/(2 sqrt(2 pi)).
    CHECK(rep.alpha_hat == doctest::Approx(1.0).epsilon(0.2));
    CHECK(rep.c1_hat == doctest::Approx(0.19947).epsilon(0.3));
    for (auto& pt : rep.per_h) CHECK(pt.stderr_ > 0.0);
}

TEST_CASE("weighted weak rate") {
    SUBCASE("curved mean: residual order alpha R") {
        auto m = gaussian(model::payoff_relu());
        auto wv = weights::solve_weights({1.0, 2, 2});
        std::vector<double> grid = {0.125, 0.0625, 0.03125, 0.015625};
        auto rep = rates::fit_weighted_weak_rate(m, wv, grid);
        REQUIRE_FALSE(rep.inconclusive);
        CHECK(rep.alpha_hat == doctest::Approx(2.0).epsilon(0.05));
    }
    SUBCASE("affine mean: nothing left to fit") {
        auto m = gaussian(model::payoff_square());
        auto wv = weights::solve_weights({1.0, 2, 2});
        std::vector<double> grid = {0.5, 0.25, 0.125, 0.0625};
        auto rep = rates::fit_weighted_weak_rate(m, wv, grid);
        CHECK(rep.inconclusive);  // the weights cancel an affine bias exactly
    }
}

TEST_CASE("strong rate windows") {
    est::LevelGeometry g{2, 2, 6};
    std::vector<int> levels = {2, 3, 4, 5, 6};
    SUBCASE("locally Lipschitz payoff, standard coupling: order near 1") {
        auto m = gaussian(model::payoff_square());
        auto rep = rates::fit_strong_rate(m, g, est::CouplingMode::Standard, levels, 100000,
                                          StreamKey::from_seed(3));
        REQUIRE_FALSE(rep.inconclusive);
        CHECK(rep.beta_hat == doctest::Approx(1.0).epsilon(0.2));
        CHECK(rep.V1_hat > 0.0);
    }
    SUBCASE("smooth-derivative payoff, antithetic coupling: order near 2") {
        auto m = gaussian(model::payoff_square());
        auto rep = rates::fit_strong_rate(m, g, est::CouplingMode::Antithetic, levels, 100000,
                                          StreamKey::from_seed(4));
        REQUIRE_FALSE(rep.inconclusive);
        CHECK(rep.beta_hat == doctest::Approx(2.0).epsilon(0.15));
    }
    SUBCASE("indicator payoff, standard coupling: order near 1/2") {
        auto m = gaussian(model::payoff_indicator(1.0, model::IndicatorDirection::Leq));
        auto rep = rates::fit_strong_rate(m, g, est::CouplingMode::Standard, levels, 200000,
                                          StreamKey::from_seed(5));
        REQUIRE_FALSE(rep.inconclusive);
        CHECK(rep.beta_hat == doctest::Approx(0.5).epsilon(0.3));
    }
    CHECK_THROWS_AS(rates::fit_strong_rate(gaussian(model::payoff_square()), g,
                                           est::CouplingMode::Standard,
                                           std::vector<int>{2, 3, 4}, 100,
                                           StreamKey::from_seed(6)),
                    std::invalid_argument);
}

TEST_CASE("first-order CDF expansion check") {
    auto m = gaussian(model::payoff_indicator(1.0, model::IndicatorDirection::Leq), 1.2);
    std::vector<double> xs = {-1.5, -0.5, 1.0, 2.0};
    std::vector<double> hs = {1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512};
    auto chk = rates::cdf_expansion_check(m, xs, hs);
    REQUIRE(chk.per_x.size() == xs.size());
    for (auto& pt : chk.per_x) {
        // Oracle closed form: integral of P_1 phi up to x is -(sigma^2/2) x phi(x).
        double expect = -(1.2 * 1.2 / 2.0) * pt.x * norm_pdf(pt.x);
        CHECK(pt.c1_oracle == doctest::Approx(expect).epsilon(1e-6));
        CHECK(pt.c1_hat == doctest::Approx(pt.c1_oracle).epsilon(5e-3));
        // After removing the first-order term the remainder decays at order 2.
        CHECK(pt.resid_slope == doctest::Approx(2.0).epsilon(0.15));
    }
    auto bare = gaussian(model::payoff_square());
    CHECK_THROWS_AS(rates::cdf_expansion_check(bare, xs, hs), std::invalid_argument);
}
