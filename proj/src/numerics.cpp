#include "qident/numerics.hpp"

#include "qident/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qident {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kSqrtHalfPi = 1.25331413731550025121;

void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw DomainError("sigma must be finite and positive, got " + std::to_string(sigma));
}

void check_order(std::size_t n) {
    if (n == 0 || n > kMaxOrder)
        throw DomainError("matrix order must be in [1, " + std::to_string(kMaxOrder) +
                          "], got " + std::to_string(n));
}

} // namespace

double gauss_pdf(double x, double sigma) {
    check_sigma(sigma);
    if (!std::isfinite(x)) throw DomainError("gauss_pdf: x must be finite");
    const double z = x / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

double gauss_cdf(double x, double sigma) {
    check_sigma(sigma);
    if (std::isnan(x)) throw DomainError("gauss_cdf: x is NaN");
    return 0.5 * erfc_rational(-x / sigma * kInvSqrt2);
}

double gauss_sf(double x, double sigma) {
    check_sigma(sigma);
    if (std::isnan(x)) throw DomainError("gauss_sf: x is NaN");
    return 0.5 * erfc_rational(x / sigma * kInvSqrt2);
}

double mills_ratio(double z) { return kSqrtHalfPi * erfcx_rational(z * kInvSqrt2); }

// ---------------------------------------------------------------------------

SymMatrix::SymMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) { check_order(n); }

SymMatrix SymMatrix::identity(std::size_t n, double scale) {
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.a_[i * n + i] = scale;
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m.a_[i * m.n_ + i] = diag[i];
    return m;
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    SymMatrix m(n);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != n) throw DomainError("SymMatrix::from_rows: matrix is not square");
        std::copy(row.begin(), row.end(), m.a_.begin() + static_cast<std::ptrdiff_t>(i * n));
        ++i;
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = r + 1; c < n; ++c)
            if (m(r, c) != m(c, r)) throw DomainError("SymMatrix::from_rows: matrix is not symmetric");
    return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double v) noexcept {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
}

void SymMatrix::add_outer(double w, std::span<const double> v) {
    if (v.size() != n_) throw DomainError("add_outer: dimension mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
        const double wi = w * v[i];
        for (std::size_t j = i; j < n_; ++j) {
            const double x = a_[i * n_ + j] + wi * v[j];
            a_[i * n_ + j] = x;
            a_[j * n_ + i] = x;
        }
    }
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    if (other.n_ != n_) throw DomainError("SymMatrix +=: order mismatch");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += other.a_[k];
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) noexcept {
    for (double& x : a_) x *= s;
    return *this;
}

Vec SymMatrix::multiply(std::span<const double> v) const {
    if (v.size() != n_) throw DomainError("SymMatrix::multiply: dimension mismatch");
    Vec out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n_; ++j) s += a_[i * n_ + j] * v[j];
        out[i] = s;
    }
    return out;
}

double SymMatrix::quad_form(std::span<const double> v) const {
    if (v.size() != n_) throw DomainError("SymMatrix::quad_form: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n_; ++j) row += a_[i * n_ + j] * v[j];
        s += v[i] * row;
    }
    return s;
}

double SymMatrix::trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += a_[i * n_ + i];
    return t;
}

double SymMatrix::max_abs() const noexcept {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::fabs(x));
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Downdate rank_one_downdate(const SymMatrix& p, std::span<const double> phi, double beta) {
    const std::size_t n = p.order();
    if (phi.size() != n) throw DomainError("rank_one_downdate: dimension mismatch");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw DomainError("rank_one_downdate: beta must be finite and positive");

    const Vec g = p.multiply(phi);
    const double quad = dot(phi, g);
    if (std::all_of(phi.begin(), phi.end(), [](double x) { return x == 0.0; }))
        return {p, 1.0};
    if (!(quad > 0.0)) throw StateError("rank_one_downdate: P is not positive definite");

    const double a = 1.0 / (1.0 + beta * quad);
    SymMatrix out = p;
    out.add_outer(-a * beta, g);
    return {std::move(out), a};
}

namespace {

// Lower Cholesky factor of a, row-major.
std::vector<double> cholesky_lower(const SymMatrix& a, const char* who) {
    const std::size_t n = a.order();
    std::vector<double> l(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
        if (!(d > 0.0) || !std::isfinite(d))
            throw NumericError(std::string(who) + ": non-positive pivot " + std::to_string(j) +
                                   " (matrix not positive definite)",
                               j);
        const double ljj = std::sqrt(d);
        l[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            l[i * n + j] = s / ljj;
        }
    }
    return l;
}

} // namespace

Vec spd_solve(const SymMatrix& a, std::span<const double> b) {
    const std::size_t n = a.order();
    if (b.size() != n) throw DomainError("spd_solve: dimension mismatch");
    const auto l = cholesky_lower(a, "spd_solve");
    Vec x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) x[i] -= l[i * n + k] * x[k];
        x[i] /= l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) x[i] -= l[k * n + i] * x[k];
        x[i] /= l[i * n + i];
    }
    return x;
}

SymMatrix sym_invert(const SymMatrix& a) {
    const std::size_t n = a.order();
    const auto l = cholesky_lower(a, "sym_invert");

    // W = L^{-1}, lower triangular.
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        w[i * n + i] = 1.0 / l[i * n + i];
        for (std::size_t j = 0; j < i; ++j) {
            double s = 0.0;
            for (std::size_t k = j; k < i; ++k) s += l[i * n + k] * w[k * n + j];
            w[i * n + j] = -s / l[i * n + i];
        }
    }

    // A^{-1} = W^T W
    SymMatrix inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = j; k < n; ++k) s += w[k * n + i] * w[k * n + j];
            inv.set(i, j, s);
        }
    }
    return inv;
}

double identity_residual(const SymMatrix& a, const SymMatrix& b) {
    const std::size_t n = a.order();
    if (b.order() != n) throw DomainError("identity_residual: order mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a(i, k) * b(k, j);
            worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
        }
    }
    return worst;
}

double truncated_normal_mean(double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
        throw DomainError("truncated_normal_mean: need lo < hi");
    if (hi <= 0.0) return -truncated_normal_mean(-hi, -lo);
    if (lo >= 0.0) {
        // phi(lo) cancels: (1 - E) / (R(lo) - E R(hi)), E = phi(hi)/phi(lo).
        if (std::isinf(hi)) return 1.0 / mills_ratio(lo);
        const double t = 0.5 * (hi - lo) * (hi + lo);
        const double one_minus_e = -std::expm1(-t);
        const double e = std::exp(-t);
        return one_minus_e / (mills_ratio(lo) - e * mills_ratio(hi));
    }
    // Straddles zero: the mass is bounded away from underflow.
    const double dens_lo = std::isinf(lo) ? 0.0 : kInvSqrt2Pi * std::exp(-0.5 * lo * lo);
    const double dens_hi = std::isinf(hi) ? 0.0 : kInvSqrt2Pi * std::exp(-0.5 * hi * hi);
    const double mass = 0.5 * (erf_rational(hi * kInvSqrt2) - erf_rational(lo * kInvSqrt2));
    return (dens_lo - dens_hi) / mass;
}

} // namespace qident
