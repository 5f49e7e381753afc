#pragma once

#include <array>
#include <cstdint>

#include "doabound/array_model.hpp"
#include "doabound/numerics.hpp"

namespace doabound {

/// Hard-limited covariance Sigma_z = (2/pi) arcsin(rho) with its
/// theta-derivative and the underlying Gaussian correlations
/// rho_ij = [Sigma_y]_ij / (gamma^2 + 1). Off-diagonal correlations are
/// clamped to [-1 + 1e-12, 1 - 1e-12] before the arcsin derivative and any
/// orthant evaluation; diagonals are 1 respectively 0 by construction.
struct QuantizedCovariance {
    SymMatrix sigma_z;
    SymMatrix d_sigma_z;
    SymMatrix rho;
};

/// Bijection l <-> (i, j) with 0 <= j < i < M over the strict lower
/// triangle, enumerated column-major: (1,0), (2,0), ..., (M-1,0), (2,1), ...
/// The ordering is shared by every module that touches length-L vectors.
class PairIndex {
  public:
    explicit PairIndex(int m);

    int dim() const { return m_; }
    int count() const { return static_cast<int>(pairs_.size()); }
    std::pair<int, int> pair(int l) const { return pairs_[l]; }  // (i, j), i > j
    int index(int i, int j) const;

  private:
    int m_ = 0;
    std::vector<std::pair<int, int>> pairs_;
};

/// First and second moments of the strict-lower-triangle quadratic
/// statistics phi_l = z_i z_j (L = M(M-1)/2 of them).
struct StatisticMoments {
    std::vector<double> mu;
    std::vector<double> d_mu;
    SymMatrix r;
};

/// Quadrature effort for the orthant machinery. `coarse` is only used for
/// grid scans that locate an objective basin; every reported quantity goes
/// through `full`.
enum class QuadPrecision { full, coarse };

QuantizedCovariance arcsine_map(const CovariancePair& cov, double gamma);

/// P(z_i > 0, z_j > 0) for a zero-mean unit-variance bivariate Gaussian:
/// 1/4 + arcsin(rho) / (2 pi).
double orthant2(double rho);

/// Positive-orthant probability of a quadrivariate standard Gaussian with
/// the given correlation matrix, |error| <= 1e-8. Evaluated as 1/16 plus a
/// single adaptive 1-D quadrature along the correlation path
/// R(t) = (1-t) I + t R, whose integrand is closed form for zero thresholds
/// (origin density times the conditional bivariate orthant). A slower
/// sequential-conditioning evaluator lives in detail:: as an independent
/// cross-check, and Monte Carlo agreement is enforced by the acceptance
/// suite. Results are memoized on the permutation-canonical correlation
/// 6-tuple rounded to 1e-14.
double orthant4(const SymMatrix& corr);

/// E[z_i z_j z_k z_l] of the hard-limiter outputs, by case split: 1 when the
/// indices pair up completely; (2/pi) arcsin rho of the surviving pair when
/// exactly two indices coincide; a signed sum of 8 quadrivariate orthants
/// (sign patterns with q_1 = +1, doubled by central symmetry) when all four
/// indices are distinct. Indices are 0-based.
double quartic_moment(int i, int j, int k, int l, const QuantizedCovariance& qc);
double quartic_moment(int i, int j, int k, int l, const QuantizedCovariance& qc,
                      QuadPrecision prec);

StatisticMoments statistic_moments(const QuantizedCovariance& qc);
StatisticMoments statistic_moments(const QuantizedCovariance& qc, QuadPrecision prec);

namespace detail {

/// P(X > h, Y > k) for a standard bivariate normal pair with correlation r.
double bvn_upper(double h, double k, double r);

/// Correlations in PairIndex(4) order: (1,0), (2,0), (3,0), (2,1), (3,1), (3,2).
double orthant4_corr6(const std::array<double, 6>& corr, QuadPrecision prec);

/// Sequential-conditioning evaluator (outer quadrature over the first
/// coordinate, conditional trivariate orthant as a 1-D integral of a shifted
/// bivariate normal CDF). Slow; exists to cross-validate orthant4.
double orthant4_conditioning(const std::array<double, 6>& corr);

/// Orthant of D_q corr D_q for a sign pattern q in {-1,+1}^4.
double orthant4_signed(const std::array<double, 6>& corr, const std::array<int, 4>& signs,
                       QuadPrecision prec);

void orthant_cache_clear();
std::size_t orthant_cache_size();

}  // namespace detail

}  // namespace doabound
