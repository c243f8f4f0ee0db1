// Projection onto a box under a quadratic metric:
//   minimize (z - x)^T Q (z - x)  subject to  lo <= z <= hi.
// Primal active-set method. The iterate stays feasible; each pass solves the
// equality-constrained problem on the free coordinates, then either steps to
// the first blocking bound or releases the bound with the worst multiplier.

#include "qident/estimator.hpp"

#include "qident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qident {
namespace {

enum class Bound : unsigned char { Free, Lower, Upper };

} // namespace

Vec project(std::span<const double> x, const SymMatrix& q, const BoxDomain& box) {
    const std::size_t n = box.dim();
    if (x.size() != n || q.order() != n) throw DomainError("project: dimension mismatch");
    if (box.contains(x)) return Vec(x.begin(), x.end());

    const Vec& lo = box.lo();
    const Vec& hi = box.hi();
    Vec z(n);
    std::vector<Bound> state(n, Bound::Free);
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] < lo[i]) {
            z[i] = lo[i];
            state[i] = Bound::Lower;
        } else if (x[i] > hi[i]) {
            z[i] = hi[i];
            state[i] = Bound::Upper;
        } else {
            z[i] = x[i];
        }
    }

    const double scale = std::max(1.0, q.max_abs());
    const std::size_t max_iter = 20 * (n + 1) + 100;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i)
            if (state[i] == Bound::Free) free.push_back(i);

        if (!free.empty()) {
            // Q_FF (z_F - x_F) = -Q_FA (z_A - x_A)
            SymMatrix qff(free.size());
            Vec rhs(free.size(), 0.0);
            for (std::size_t a = 0; a < free.size(); ++a) {
                for (std::size_t b = a; b < free.size(); ++b) qff.set(a, b, q(free[a], free[b]));
                double r = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (state[j] != Bound::Free) r -= q(free[a], j) * (z[j] - x[j]);
                rhs[a] = r;
            }
            const Vec d = spd_solve(qff, rhs);

            // Longest feasible step toward the free-set optimum.
            double t = 1.0;
            std::size_t blocking = n;
            for (std::size_t a = 0; a < free.size(); ++a) {
                const std::size_t i = free[a];
                const double target = x[i] + d[a];
                const double delta = target - z[i];
                if (target < lo[i] && delta < 0.0) {
                    const double ti = (lo[i] - z[i]) / delta;
                    if (ti < t) { t = ti; blocking = i; }
                } else if (target > hi[i] && delta > 0.0) {
                    const double ti = (hi[i] - z[i]) / delta;
                    if (ti < t) { t = ti; blocking = i; }
                }
            }
            t = std::clamp(t, 0.0, 1.0);
            for (std::size_t a = 0; a < free.size(); ++a) {
                const std::size_t i = free[a];
                z[i] = std::clamp(z[i] + t * (x[i] + d[a] - z[i]), lo[i], hi[i]);
            }
            if (blocking < n) {
                const bool at_lower = x[blocking] + d[std::find(free.begin(), free.end(), blocking) -
                                                      free.begin()] < lo[blocking];
                z[blocking] = at_lower ? lo[blocking] : hi[blocking];
                state[blocking] = at_lower ? Bound::Lower : Bound::Upper;
                continue;
            }
        }

        // Stationary on the free set: check multipliers of the active bounds.
        // Gradient g = Q (z - x); a lower bound needs g_i >= 0, an upper bound g_i <= 0.
        Vec diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = z[i] - x[i];
        const Vec g = q.multiply(diff);
        double reach = 0.0;
        for (double v : diff) reach = std::max(reach, std::fabs(v));
        double worst = 1e-13 * scale * (1.0 + reach);
        std::size_t release = n;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = state[i] == Bound::Lower ? -g[i] : state[i] == Bound::Upper ? g[i] : 0.0;
            if (v > worst) {
                worst = v;
                release = i;
            }
        }
        if (release == n) return z;
        state[release] = Bound::Free;
    }
    throw NumericError("project: active-set iteration did not converge", 0);
}

} // namespace qident
