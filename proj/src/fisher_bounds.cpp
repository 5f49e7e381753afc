#include "doabound/fisher_bounds.hpp"

#include <cmath>

namespace doabound {

std::pair<double, std::vector<double>> fisher_lower_bound(const StatisticMoments& sm) {
    const CholeskyFactor f = spd_factor(sm.r);
    std::vector<double> w = sm.d_mu;
    f.solve_in_place(w);
    double lb = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) lb += sm.d_mu[i] * w[i];
    return {lb, std::move(w)};
}

std::pair<double, double> quantization_loss(double fisher_lb, double fisher_y) {
    if (!(fisher_y > 0.0))
        throw DegenerateModel("quantization_loss: unquantized Fisher information must be > 0");
    const double chi = fisher_lb / fisher_y;
    return {chi, 10.0 * std::log10(chi)};
}

std::pair<double, double> pcrlb(double fisher_lb, int n) {
    if (n < 1) throw std::invalid_argument("pcrlb: N must be >= 1");
    if (!(fisher_lb > 0.0))
        throw DegenerateModel("pcrlb: Fisher lower bound must be > 0");
    const double rad2 = 1.0 / (n * fisher_lb);
    const double scale = 180.0 / kPi;
    return {rad2, rad2 * scale * scale};
}

namespace {

// Outcome probabilities p(z; theta) for every z in {-1,+1}^M, M in {2, 4}.
std::vector<double> outcome_probabilities(const UlaSource& src) {
    const QuantizedCovariance qc = arcsine_map(receive_covariance(src), src.gamma);
    const int m = src.dim();
    const int outcomes = 1 << m;
    std::vector<double> p(outcomes);
    if (m == 2) {
        const double rho = qc.rho(1, 0);
        for (int z = 0; z < outcomes; ++z) {
            const int q0 = (z & 1) ? -1 : 1;
            const int q1 = (z & 2) ? -1 : 1;
            p[z] = orthant2(q0 * q1 * rho);
        }
    } else {
        SymMatrix corr = SymMatrix::identity(4);
        for (int z = 0; z < outcomes; ++z) {
            int q[4];
            for (int b = 0; b < 4; ++b) q[b] = (z & (1 << b)) ? -1 : 1;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < i; ++j) corr.set(i, j, q[i] * q[j] * qc.rho(i, j));
            p[z] = orthant4(corr);
        }
    }
    return p;
}

}  // namespace

double fisher_exact_small(const UlaSource& src, double h) {
    src.validate();
    if (src.sensor_count > 2)
        throw DimensionTooLarge("fisher_exact_small: enumeration oracle requires K <= 2");
    if (!(h >= 1e-7 && h <= 1e-4))
        throw std::invalid_argument("fisher_exact_small: h must lie in [1e-7, 1e-4]");

    UlaSource plus = src, minus = src;
    plus.theta_rad += h;
    minus.theta_rad -= h;

    const std::vector<double> p0 = outcome_probabilities(src);
    const std::vector<double> pp = outcome_probabilities(plus);
    const std::vector<double> pm = outcome_probabilities(minus);

    double total = 0.0;
    for (double v : p0) total += v;
    if (std::fabs(total - 1.0) > 1e-7)
        throw NormalizationFailure("fisher_exact_small: outcome probabilities sum to " +
                                   std::to_string(total));

    double fisher = 0.0;
    for (std::size_t z = 0; z < p0.size(); ++z) {
        const double lp = std::log(std::max(pp[z], 1e-300));
        const double lm = std::log(std::max(pm[z], 1e-300));
        const double score = (lp - lm) / (2.0 * h);
        fisher += score * score * p0[z];
    }
    return fisher;
}

BoundReport bound_report(const UlaSource& src, int n) {
    src.validate();
    const CovariancePair cov = receive_covariance(src);
    const QuantizedCovariance qc = arcsine_map(cov, src.gamma);
    const StatisticMoments sm = statistic_moments(qc);

    BoundReport rep;
    rep.fisher_y = fisher_unquantized(cov);
    auto [lb, w] = fisher_lower_bound(sm);
    rep.fisher_lb = lb;
    rep.gls_weights = std::move(w);
    std::tie(rep.chi, rep.chi_db) = quantization_loss(rep.fisher_lb, rep.fisher_y);
    std::tie(rep.pcrlb_rad2, rep.pcrlb_deg2) = pcrlb(rep.fisher_lb, n);
    return rep;
}

}  // namespace doabound
