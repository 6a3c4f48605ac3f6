#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "nestmlmc/model.hpp"
#include "nestmlmc/rng.hpp"

using namespace nestmlmc;

namespace {
model::NestedModel gaussian(double sigma = 1.0, model::Payoff p = model::payoff_square()) {
    return model::builtin_gaussian_linear(0.0, 1.0, sigma, std::move(p));
}
}  // namespace

TEST_CASE("stream determinism and splitting") {
    StreamKey k = StreamKey::from_seed(42);
    Stream a(k.child(3).child(7));
    Stream b(k.child(3).child(7));
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    // Sibling keys do not collide.
    CHECK(k.child(1).state != k.child(2).state);
    CHECK(k.child(1).child(0).state != k.child(2).child(0).state);
}

TEST_CASE("uniforms stay inside the open interval and gaussians look standard") {
    Stream s(StreamKey::from_seed(7));
    double sum = 0.0, sumsq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = s.next_uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        double g = norm_quantile(u);
        sum += g;
        sumsq += g * g;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / double(n)));
}

TEST_CASE("sample_inner_mean basics") {
    auto m = gaussian();
    m.inner_fn = [](double y, double) { return y; };
    StreamKey key = StreamKey::from_seed(1);
    CHECK(model::sample_inner_mean(m, 3.5, 1, key) == 3.5);
    CHECK(model::sample_inner_mean(m, -0.25, 17, key) == doctest::Approx(-0.25));

    auto g = gaussian();
    double one = g.inner_fn(2.0, Stream(key.child(1)).next_gaussian());
    // K = 1 returns F(y, Z_1) exactly.
    CHECK(model::sample_inner_mean(g, 2.0, 1, key) == one);
    CHECK_THROWS_AS(model::sample_inner_mean(g, 2.0, 0, key), std::invalid_argument);
}

TEST_CASE("sample_inner_mean reports the offending draw on non-finite output") {
    auto m = gaussian();
    m.inner_fn = [](double, double) { return std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(model::sample_inner_mean(m, 0.0, 4, StreamKey::from_seed(2)),
                    model::EvaluationError);
}

TEST_CASE("gaussian linear conditional law N(y, sigma^2/K)") {
    const double sigma = 0.8, y = 1.3;
    const long K = 16;
    auto m = gaussian(sigma);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    StreamKey key = StreamKey::from_seed(11);
    for (int i = 0; i < n; ++i) {
        double x = model::sample_inner_mean(m, y, K, key.child(i));
        sum += x;
        sumsq += x * x;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    double v0 = sigma * sigma / K;
    CHECK(std::abs(mean - y) < 4.0 * std::sqrt(v0 / n));
    CHECK(std::abs(var - v0) < 4.0 * v0 * std::sqrt(2.0 / double(n)));
}

TEST_CASE("outer and inner streams are uncorrelated") {
    auto m = gaussian();
    const int n = 1000000;
    StreamKey key = StreamKey::from_seed(5);
    double sy = 0, sz = 0, syz = 0, syy = 0, szz = 0;
    for (int i = 0; i < n; ++i) {
        StreamKey rk = key.child(i);
        Stream ys(rk.child(0)), zs(rk.child(1));
        double y = m.outer_sampler(ys);
        double z = m.inner_sampler(zs);
        sy += y;
        sz += z;
        syz += y * z;
        syy += y * y;
        szz += z * z;
    }
    double cov = syz / n - (sy / n) * (sz / n);
    double corr = cov / std::sqrt((syy / n - sy / n * (sy / n)) * (szz / n - sz / n * (sz / n)));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("exact L2 identity ||X_h - X_0||^2 = h sigma^2") {
    const double sigma = 1.4, h = 1.0 / 8.0;
    auto m = gaussian(sigma);
    const long K = std::lround(1.0 / h);
    const int n = 1000000;
    StreamKey key = StreamKey::from_seed(17);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        StreamKey rk = key.child(i);
        Stream ys(rk.child(0));
        double y = m.outer_sampler(ys);
        double d = model::sample_inner_mean(m, y, K, rk.child(1)) - y;  // X_0 = phi_0(Y) = Y
        sum += d * d;
        sumsq += d * d * d * d;
    }
    double mean = sum / n;
    double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - h * sigma * sigma) < 4.0 * se);
    CHECK(m.oracles.strong_l2(h, 0.0) == doctest::Approx(sigma * std::sqrt(h)));
}

TEST_CASE("gaussian linear oracles") {
    SUBCASE("square payoff") {
        auto m = model::builtin_gaussian_linear(0.5, 1.5, 0.7, model::payoff_square());
        CHECK(m.oracles.mean_payoff_at(0.0) == doctest::Approx(0.25 + 2.25));
        CHECK(m.oracles.mean_payoff_at(0.1) - m.oracles.mean_payoff_at(0.0) ==
              doctest::Approx(0.49 * 0.1));
        CHECK(*m.oracles.target == doctest::Approx(2.5));
    }
    SUBCASE("indicator payoff expansion coefficients") {
        const double a = 1.0, sigma = 1.0;
        auto m = gaussian(sigma, model::payoff_indicator(a, model::IndicatorDirection::Leq));
        // d/dh Phi(a / sqrt(1 + sigma^2 h)) at h = 0 equals -a phi(a) sigma^2 / 2.
        double eps = 1e-7;
        double deriv = (m.oracles.mean_payoff_at(eps) - m.oracles.mean_payoff_at(0.0)) / eps;
        CHECK(deriv == doctest::Approx(-a * norm_pdf(a) * sigma * sigma / 2.0).epsilon(1e-4));
        // E[P1(X_0) 1{X_0 <= a}] via the antiderivative -x phi(x).
        double integral = simpson(
            [&](double x) { return m.oracles.p1(x) * m.oracles.density_x0(x); }, -30.0, a, 8000);
        CHECK(integral == doctest::Approx(-(sigma * sigma / 2.0) * a * norm_pdf(a)).epsilon(1e-8));
    }
    SUBCASE("oracles omitted for unsupported combinations") {
        auto m = model::builtin_gaussian_linear(
            0.5, 2.0, 1.0, model::payoff_indicator(1.0, model::IndicatorDirection::Leq));
        CHECK_FALSE(static_cast<bool>(m.oracles.mean_payoff_at));
        CHECK_FALSE(m.oracles.target.has_value());
    }
}

TEST_CASE("bs nested model") {
    SUBCASE("threshold limits") {
        auto low = model::builtin_bs_nested(100, 0.03, 0.2, 1.0 / 12, 0.5, 100, 0.0);
        CHECK(*low.oracles.target == 1.0);
        auto high = model::builtin_bs_nested(100, 0.03, 0.2, 1.0 / 12, 0.5, 100, 1e9);
        CHECK(*high.oracles.target == 0.0);
    }
    SUBCASE("default-parameter target matches a direct lognormal computation") {
        auto m = model::builtin_bs_nested(100, 0.03, 0.2, 1.0 / 12, 0.5, 100, 5.0);
        REQUIRE(m.oracles.target.has_value());
        double t = *m.oracles.target;
        CHECK(t > 0.0);
        CHECK(t < 1.0);
        // Monte Carlo cross-check on the outer law with the analytic call price.
        StreamKey key = StreamKey::from_seed(23);
        const int n = 20000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            Stream ys(key.child(i));
            double y = m.outer_sampler(ys);
            double price = model::sample_inner_mean(m, y, 2000, key.child(i).child(1));
            hits += price >= 5.0 ? 1 : 0;
        }
        double p_hat = double(hits) / n;
        // Inner noise at K=2000 biases the indicator slightly; allow a loose band.
        CHECK(std::abs(p_hat - t) < 0.025);
    }
    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(model::builtin_bs_nested(100, 0.03, 0.2, 0.5, 0.5, 100, 5.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(model::builtin_bs_nested(100, 0.03, 0.0, 0.1, 0.5, 100, 5.0),
                        std::invalid_argument);
    }
}
