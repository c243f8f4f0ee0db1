#include "doctest.h"

#include "qident/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace qident;

namespace {

double q_norm2(const SymMatrix& q, const Vec& a, const Vec& b) {
    Vec d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return q.quad_form(d);
}

SymMatrix random_spd(std::mt19937_64& gen, std::size_t n) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ue(-3.0, 1.0);
    std::vector<double> b(n * n);
    for (auto& v : b) v = nd(gen);
    SymMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b[i * n + k] * b[j * n + k];
            a.set(i, j, s + (i == j ? std::pow(10.0, ue(gen)) : 0.0));
        }
    return a;
}

BoxDomain random_box(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> w(0.0, 2.0);
    Vec lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = u(gen);
        hi[i] = lo[i] + w(gen);
    }
    return BoxDomain(lo, hi);
}

// Brute-force minimizer for 2-D: grid, then coordinate refinement.
Vec grid_argmin(const Vec& x, const SymMatrix& q, const BoxDomain& box) {
    Vec best = box.center();
    double best_val = q_norm2(q, best, x);
    const int steps = 1000;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const Vec z{box.lo()[0] + (box.hi()[0] - box.lo()[0]) * i / steps,
                        box.lo()[1] + (box.hi()[1] - box.lo()[1]) * j / steps};
            const double v = q_norm2(q, z, x);
            if (v < best_val) {
                best_val = v;
                best = z;
            }
        }
    double h = (box.hi()[0] - box.lo()[0]) / steps;
    while (h > 1e-12) {
        bool moved = false;
        for (std::size_t c = 0; c < 2; ++c)
            for (double s : {-h, h}) {
                Vec z = best;
                z[c] = std::clamp(z[c] + s, box.lo()[c], box.hi()[c]);
                const double v = q_norm2(q, z, x);
                if (v < best_val) {
                    best_val = v;
                    best = z;
                    moved = true;
                }
            }
        if (!moved) h *= 0.5;
    }
    return best;
}

} // namespace

TEST_CASE("project: interior points are fixed") {
    const BoxDomain box({0.0, 0.0}, {1.0, 1.0});
    const SymMatrix q = SymMatrix::from_rows({{2, 1}, {1, 2}});
    CHECK(project(Vec{0.3, 0.9}, q, box) == Vec{0.3, 0.9});
}

TEST_CASE("project: diagonal metric clips coordinatewise") {
    const BoxDomain box({-1.0, 0.0, 2.0}, {1.0, 1.0, 3.0});
    const SymMatrix q = SymMatrix::diagonal(Vec{1.0, 7.0, 0.1});
    CHECK(project(Vec{2.0, -0.5, 2.5}, q, box) == Vec{1.0, 0.0, 2.5});
    CHECK(project(Vec{-4.0, 0.5, 9.0}, q, box) == Vec{-1.0, 0.5, 3.0});
}

TEST_CASE("project: coupled metric example") {
    const BoxDomain box({0.0, 0.0}, {1.0, 1.0});
    const SymMatrix q = SymMatrix::from_rows({{2, 1}, {1, 2}});
    const Vec x{1.2, 0.5};
    const Vec z = project(x, q, box);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(z[1] == doctest::Approx(0.6).epsilon(1e-14));
    const Vec ref = grid_argmin(x, q, box);
    CHECK(z[0] == doctest::Approx(ref[0]).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(ref[1]).epsilon(1e-6));
}

TEST_CASE("project: agrees with brute force on random 2-D cases") {
    std::mt19937_64 gen(61);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int t = 0; t < 30; ++t) {
        const BoxDomain box = random_box(gen, 2);
        const SymMatrix q = random_spd(gen, 2);
        const Vec x{u(gen), u(gen)};
        const Vec z = project(x, q, box);
        const Vec ref = grid_argmin(x, q, box);
        CHECK(q_norm2(q, z, x) <= q_norm2(q, ref, x) + 1e-10);
    }
}

TEST_CASE("project: non-expansive, idempotent, KKT on 1e4 random instances") {
    std::mt19937_64 gen(67);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 10000; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(t % 8);
        const BoxDomain box = random_box(gen, n);
        const SymMatrix q = random_spd(gen, n);
        Vec x(n), feasible(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = u(gen);
            feasible[i] = box.lo()[i] + unit(gen) * (box.hi()[i] - box.lo()[i]);
        }
        const Vec z = project(x, q, box);
        REQUIRE(box.contains(z));

        // Non-expansive toward any feasible point.
        REQUIRE(q_norm2(q, z, feasible) <= q_norm2(q, x, feasible) * (1 + 1e-12) + 1e-12);

        // Idempotent.
        REQUIRE(project(z, q, box) == z);

        // KKT: g = Q (z - x) has the right sign at active bounds and vanishes elsewhere.
        Vec d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = z[i] - x[i];
        const Vec g = q.multiply(d);
        const double tol = 1e-10 * std::max(1.0, q.max_abs()) * (1.0 + q.max_abs());
        for (std::size_t i = 0; i < n; ++i) {
            const bool at_lo = z[i] == box.lo()[i];
            const bool at_hi = z[i] == box.hi()[i];
            if (at_lo && at_hi) continue;
            if (at_lo)
                REQUIRE(g[i] >= -tol);
            else if (at_hi)
                REQUIRE(g[i] <= tol);
            else
                REQUIRE(std::fabs(g[i]) <= tol);
        }
    }
}
