#pragma once

#include "doabound/quantized_moments.hpp"

namespace doabound {

/// Per-model-point performance summary. chi is the quantization loss
/// fisher_lb / fisher_y (dB variant alongside); pcrlb is 1/(N * fisher_lb)
/// in rad^2 and deg^2; gls_weights is the optimized score direction
/// R_phi^-1 d_mu.
struct BoundReport {
    double fisher_y = 0.0;
    double fisher_lb = 0.0;
    double chi = 0.0;
    double chi_db = 0.0;
    double pcrlb_rad2 = 0.0;
    double pcrlb_deg2 = 0.0;
    std::vector<double> gls_weights;
};

/// Fisher information lower bound d_mu^T R^-1 d_mu together with the weight
/// vector R^-1 d_mu. R goes through the jitter ladder, never an explicit
/// inverse.
std::pair<double, std::vector<double>> fisher_lower_bound(const StatisticMoments& sm);

/// chi = fisher_lb / fisher_y and 10 log10(chi). Throws DegenerateModel for
/// fisher_y <= 0.
std::pair<double, double> quantization_loss(double fisher_lb, double fisher_y);

/// (1/(N F), same in deg^2). Throws DegenerateModel for fisher_lb <= 0.
std::pair<double, double> pcrlb(double fisher_lb, int n);

/// Exact quantized Fisher information by enumerating all sign patterns,
/// available as a verification oracle for K <= 2 (M <= 4). The score
/// derivative uses central differences at theta +- h so the oracle stays
/// independent of the analytic d_sigma_z pipeline. Verifies the outcome
/// probabilities sum to 1 within 1e-7 first.
double fisher_exact_small(const UlaSource& src, double h = 1e-6);

/// Full pipeline at one model point: unquantized Fisher information,
/// quantized lower bound, loss and PCRLB for N snapshots.
BoundReport bound_report(const UlaSource& src, int n);

}  // namespace doabound
