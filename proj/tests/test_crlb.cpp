#include "doctest.h"
#include "oracles.hpp"

#include "qident/crlb.hpp"
#include "qident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace qident;

namespace {

const QuantizerSpec kBinary({0.0});

std::vector<double> uniform_grid(double lo, double hi, double spacing) {
    std::vector<double> c;
    const int count = static_cast<int>(std::lround((hi - lo) / spacing));
    for (int i = 0; i <= count; ++i) c.push_back(lo + i * spacing);
    return c;
}

} // namespace

TEST_CASE("rho closed forms") {
    CHECK(std::fabs(rho(0.0, kBinary, GaussianNoise(1.0)) - 2.0 / M_PI) <= 1e-12);
    CHECK(rho(0.0, kBinary, GaussianNoise(1.5)) == doctest::Approx(2.0 / M_PI / 2.25).epsilon(1e-13));
    CHECK(rho(0.0, kBinary, GaussianNoise(1.5)) == doctest::Approx(0.282942).epsilon(1e-6));
}

TEST_CASE("rho matches the definition sum h^2/H") {
    std::mt19937_64 gen(71);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> us(0.4, 2.5);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> c{u(gen), u(gen), u(gen)};
        std::sort(c.begin(), c.end());
        if (std::adjacent_find(c.begin(), c.end()) != c.end()) continue;
        const double x = u(gen), sigma = us(gen);
        const double ref = static_cast<double>(oracle::rho(x, c, sigma));
        REQUIRE(rho(x, QuantizerSpec(c), GaussianNoise(sigma)) == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("rho refinement limit") {
    const double sigma = 1.5;
    const auto c = uniform_grid(-6 * sigma, 6 * sigma, 0.1 * sigma);
    const double r = rho(0.0, QuantizerSpec(c), GaussianNoise(sigma));
    CHECK(r * sigma * sigma >= 0.98);
    CHECK(r * sigma * sigma <= 1.0);
    // Independent evaluation of the same sum.
    CHECK(r == doctest::Approx(static_cast<double>(oracle::rho(0.0L, c, sigma))).epsilon(1e-10));
}

TEST_CASE("rho bounds over a grid and random specs") {
    std::mt19937_64 gen(73);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::uniform_real_distribution<double> us(0.3, 3.0);
    std::uniform_int_distribution<int> um(1, 9);
    for (int s = 0; s < 200; ++s) {
        std::vector<double> c(static_cast<std::size_t>(um(gen)));
        for (auto& t : c) t = u(gen);
        std::sort(c.begin(), c.end());
        if (std::adjacent_find(c.begin(), c.end()) != c.end()) continue;
        const QuantizerSpec spec(c);
        const double sigma = us(gen);
        const GaussianNoise noise(sigma);
        for (double x = -10 * sigma; x <= 10 * sigma; x += 0.25 * sigma) {
            const double r = rho(x, spec, noise);
            REQUIRE(r > 0.0);
            REQUIRE(r <= 1.0 / (sigma * sigma) * (1 + 1e-12));
        }
    }
}

TEST_CASE("rho is translation invariant") {
    std::mt19937_64 gen(79);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> c{u(gen), u(gen)};
        std::sort(c.begin(), c.end());
        if (c[0] == c[1]) continue;
        const double x = u(gen), shift = 3 * u(gen);
        std::vector<double> shifted = c;
        for (auto& t : shifted) t += shift;
        const GaussianNoise noise(0.8);
        REQUIRE(rho(x, QuantizerSpec(c), noise) ==
                doctest::Approx(rho(x + shift, QuantizerSpec(shifted), noise)).epsilon(1e-9));
    }
}

TEST_CASE("rho equals the variance of the score") {
    // Score of the observed level: d/dx log H_q(x), by central differences of the
    // independent oracle cdf, averaged over simulated levels.
    const double sigma = 1.0, x = 0.3, c = 0.0;
    const double dx = 1e-5;
    auto log_h = [&](std::size_t q, double at) {
        const long double F = oracle::cdf(c - at, sigma);
        return static_cast<double>(std::log(q == 0 ? F : 1.0L - F));
    };
    const double score[2] = {(log_h(0, x + dx) - log_h(0, x - dx)) / (2 * dx),
                             (log_h(1, x + dx) - log_h(1, x - dx)) / (2 * dx)};
    CounterRng rng(101);
    const int draws = 1000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = score[x + sigma * rng.normal() > c ? 1 : 0];
        s += v;
        s2 += v * v;
    }
    const double mean = s / draws;
    const double var = s2 / draws - mean * mean;
    const double r = rho(x, kBinary, GaussianNoise(sigma));
    CHECK(std::fabs(var - r) / r < 0.02);
}

TEST_CASE("accumulate and bound") {
    SUBCASE("constant rho closed form") {
        CrlbAccumulator acc(1, kBinary, GaussianNoise(1.0));
        for (int k = 1; k <= 100; ++k) {
            acc.accumulate(Vec{1.0}, 0.0);
            REQUIRE(acc.info()(0, 0) == doctest::Approx(k * 2.0 / M_PI).epsilon(1e-13));
        }
        CHECK(acc.k() == 100);
        const SymMatrix d = bound(acc);
        CHECK(std::fabs(d(0, 0) - M_PI / 200.0) <= 1e-12);
        CHECK(d(0, 0) == doctest::Approx(0.0157080).epsilon(1e-6));
    }
    SUBCASE("zero regressor carries no information") {
        CrlbAccumulator acc(2, kBinary, GaussianNoise(1.0));
        acc.accumulate(Vec{1.0, 2.0}, 0.4);
        const SymMatrix before = acc.info();
        acc.accumulate(Vec{0.0, 0.0}, 0.0);
        CHECK(acc.info() == before);
    }
    SUBCASE("orthogonal regressors give a diagonal information matrix") {
        CrlbAccumulator acc(2, kBinary, GaussianNoise(1.0));
        acc.accumulate(Vec{1.0, 0.0}, 0.2);
        acc.accumulate(Vec{0.0, 3.0}, -0.7);
        CHECK(acc.info()(0, 1) == 0.0);
        CHECK(acc.info()(0, 0) > 0.0);
        CHECK(acc.info()(1, 1) > 0.0);
    }
    SUBCASE("identity information") {
        CrlbAccumulator acc(3, kBinary, GaussianNoise(1.0));
        for (std::size_t i = 0; i < 3; ++i) {
            Vec e(3, 0.0);
            e[i] = 1.0;
            acc.add(e, 1.0);
        }
        CHECK(bound(acc) == SymMatrix::identity(3));
    }
    SUBCASE("insufficient excitation is a numeric error") {
        CrlbAccumulator acc(2, kBinary, GaussianNoise(1.0));
        acc.accumulate(Vec{1.0, 1.0}, 0.0);
        CHECK_THROWS_AS(bound(acc), NumericError);
    }
    SUBCASE("dimension mismatch") {
        CrlbAccumulator acc(2, kBinary, GaussianNoise(1.0));
        CHECK_THROWS_AS(acc.accumulate(Vec{1.0}, 0.0), DomainError);
    }
}

TEST_CASE("bound traces decrease and information grows in the Loewner order") {
    const QuantizerSpec spec({-1.0, 0.0, 0.5});
    const Vec theta{-0.5, 1.0, -1.0};
    CrlbAccumulator acc(3, spec, GaussianNoise(1.5));
    const CounterRng rng = CounterRng::derive(5, 0, 0);
    double last_trace = INFINITY;
    std::mt19937_64 gen(83);
    std::normal_distribution<double> nd;
    for (std::size_t k = 1; k <= 300; ++k) {
        const Vec phi = example1_regressors(k, rng);
        const SymMatrix before = acc.info();
        acc.accumulate(phi, dot(phi, theta));
        const Vec v{nd(gen), nd(gen), nd(gen)};
        REQUIRE(acc.info().quad_form(v) >= before.quad_form(v));
        if (k >= 3) {
            const double tr = bound(acc).trace();
            REQUIRE(tr <= last_trace * (1 + 1e-12));
            last_trace = tr;
        }
    }
}

TEST_CASE("recursive bound agrees with direct inversion") {
    SUBCASE("example-1 regressors, 1e3 steps") {
        const QuantizerSpec spec({-1.0, 0.0, 0.5});
        const Vec theta{-0.5, 1.0, -1.0};
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            CrlbAccumulator acc(3, spec, GaussianNoise(1.5), true);
            const CounterRng rng = CounterRng::derive(seed, 0, 0);
            for (std::size_t k = 1; k <= 1000; ++k) {
                const Vec phi = example1_regressors(k, rng);
                acc.accumulate(phi, dot(phi, theta));
            }
            CHECK(bound_recursive_check(acc.history()) <= 1e-9);
        }
    }
    SUBCASE("random regressors and specs") {
        std::mt19937_64 gen(89);
        std::normal_distribution<double> nd;
        for (int t = 0; t < 5; ++t) {
            const std::size_t n = 2 + t;
            CrlbAccumulator acc(n, QuantizerSpec({-0.5, 0.7}), GaussianNoise(0.9), true);
            for (int k = 0; k < 1000; ++k) {
                Vec phi(n);
                for (auto& v : phi) v = nd(gen);
                acc.accumulate(phi, 0.3 * nd(gen));
            }
            CHECK(bound_recursive_check(acc.history()) <= 1e-9);
        }
    }
    SUBCASE("scalar constant rho: both forms equal pi / (2k)") {
        CrlbAccumulator acc(1, kBinary, GaussianNoise(1.0), true);
        for (int k = 0; k < 500; ++k) acc.accumulate(Vec{1.0}, 0.0);
        CHECK(bound_recursive_check(acc.history()) <= 1e-12);
        CHECK(bound(acc)(0, 0) == doctest::Approx(M_PI / 1000.0).epsilon(1e-12));
    }
    SUBCASE("single step from a prior matches rank_one_downdate") {
        const SymMatrix p0 = SymMatrix::identity(2, 3.0);
        const Vec phi{0.4, -1.2};
        const double r = rho(0.3, kBinary, GaussianNoise(1.0));
        const std::vector<CrlbStep> hist{{phi, r}};
        CHECK(bound_recursive_check(hist, p0) <= 1e-14);

        SymMatrix info = sym_invert(p0);
        info.add_outer(r, phi);
        const SymMatrix direct = sym_invert(info);
        const auto dd = rank_one_downdate(p0, phi, r);
        for (std::size_t i = 0; i < 4; ++i) CHECK(dd.p.data()[i] == doctest::Approx(direct.data()[i]));
    }
}
