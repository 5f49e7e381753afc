#pragma once

#include "doabound/numerics.hpp"

namespace doabound {

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

/// SNR is gamma^2 with unit-variance noise per real dimension.
inline double gamma_from_snr_db(double snr_db) {
    return std::sqrt(std::pow(10.0, snr_db / 10.0));
}

/// Single Gaussian source impinging on a half-wavelength ULA of K sensors.
/// The real-valued stacked model has dimension M = 2K. Angles are radians
/// everywhere inside the library; degrees exist only at CLI boundaries.
struct UlaSource {
    int sensor_count = 1;  // K
    double theta_rad = 0.0;
    double gamma = 1.0;  // source amplitude, SNR = gamma^2

    int dim() const { return 2 * sensor_count; }

    void validate() const {
        if (sensor_count < 1) throw std::invalid_argument("UlaSource: K must be >= 1");
        if (!(gamma >= 0.0)) throw std::invalid_argument("UlaSource: gamma must be >= 0");
        if (!std::isfinite(theta_rad) || std::fabs(theta_rad) >= kPi / 2.0)
            throw DomainError("UlaSource: theta must lie in the open interval (-pi/2, pi/2)");
    }
};

/// Stacked steering matrix A = [A_I; A_Q] (M x 2, row-major) and its
/// entrywise theta-derivative.
struct SteeringPair {
    int m = 0;
    std::vector<double> a;   // M x 2
    std::vector<double> da;  // M x 2

    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * 2 + c]; }
    double d_at(int r, int c) const { return da[static_cast<std::size_t>(r) * 2 + c]; }
};

struct CovariancePair {
    SymMatrix sigma_y;
    SymMatrix d_sigma_y;
};

/// In-phase rows are (xi_k, psi_k) with xi_k = cos((k-1) pi sin theta) and
/// psi_k = sin((k-1) pi sin theta); quadrature rows are (-psi_k, xi_k).
SteeringPair steering(const UlaSource& src);

/// sigma_y = gamma^2 A A^T + I, d_sigma_y = gamma^2 (dA A^T + A dA^T).
/// Diagonals are set to gamma^2 + 1 and 0 exactly.
CovariancePair receive_covariance(const UlaSource& src);

/// Gaussian Fisher information 0.5 tr(S^-1 S' S^-1 S'), evaluated column-wise
/// through the Cholesky solve (no explicit inverse).
double fisher_unquantized(const CovariancePair& cov);

}  // namespace doabound
