#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace qident {

using Vec = std::vector<double>;

/// Largest supported parameter dimension.
inline constexpr std::size_t kMaxOrder = 64;

// ---------------------------------------------------------------------------
// Error function family (Cody's rational Chebyshev approximations).
// ---------------------------------------------------------------------------

double erf_rational(double x);
double erfc_rational(double x);
/// exp(x^2) * erfc(x); finite for x > -26.6, never underflows for large x.
double erfcx_rational(double x);

// ---------------------------------------------------------------------------
// Gaussian N(0, sigma^2) primitives.
// ---------------------------------------------------------------------------

double gauss_pdf(double x, double sigma);
double gauss_cdf(double x, double sigma);
/// Upper tail 1 - F(x), computed without cancellation.
double gauss_sf(double x, double sigma);

/// Standard-normal Mills ratio Q(z)/phi(z). Finite and positive for z > -26.
double mills_ratio(double z);

// ---------------------------------------------------------------------------
// Dense symmetric matrices.
// ---------------------------------------------------------------------------

/// Dense symmetric matrix of order n <= kMaxOrder, stored row-major with both
/// triangles kept identical.
class SymMatrix {
public:
    explicit SymMatrix(std::size_t n);

    static SymMatrix identity(std::size_t n, double scale = 1.0);
    static SymMatrix diagonal(std::span<const double> diag);
    /// Throws DomainError if `rows` is not square and exactly symmetric.
    static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t order() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
    /// Sets both (i, j) and (j, i).
    void set(std::size_t i, std::size_t j, double v) noexcept;

    /// this += w * v v^T
    void add_outer(double w, std::span<const double> v);
    SymMatrix& operator+=(const SymMatrix& other);
    SymMatrix& operator*=(double s) noexcept;

    Vec multiply(std::span<const double> v) const;
    double quad_form(std::span<const double> v) const;
    double trace() const noexcept;
    double max_abs() const noexcept;

    std::span<const double> data() const noexcept { return a_; }

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    std::size_t n_;
    std::vector<double> a_;
};

double dot(std::span<const double> a, std::span<const double> b);

struct Downdate {
    SymMatrix p;
    double gain; ///< 1 / (1 + beta phi^T P phi), in (0, 1]
};

/// P - a beta (P phi)(P phi)^T with a = 1 / (1 + beta phi^T P phi).
/// Inverse form: P_new^{-1} = P^{-1} + beta phi phi^T.
Downdate rank_one_downdate(const SymMatrix& p, std::span<const double> phi, double beta);

/// Solves A x = b for symmetric positive definite A (Cholesky).
Vec spd_solve(const SymMatrix& a, std::span<const double> b);

/// Inverse of a symmetric positive definite matrix via Cholesky.
/// Throws NumericError carrying the first non-positive pivot.
SymMatrix sym_invert(const SymMatrix& a);

/// max_ij |(A B - I)_ij|
double identity_residual(const SymMatrix& a, const SymMatrix& b);

/// E[Z | lo < Z <= hi] for Z ~ N(0, 1). Either bound may be infinite.
/// Evaluated through Mills ratios, so it stays finite deep in the tails.
double truncated_normal_mean(double lo, double hi);

} // namespace qident
