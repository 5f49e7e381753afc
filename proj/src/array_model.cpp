#include "doabound/array_model.hpp"

#include <cmath>

namespace doabound {

SteeringPair steering(const UlaSource& src) {
    src.validate();
    const int k = src.sensor_count;
    const int m = 2 * k;
    SteeringPair sp;
    sp.m = m;
    sp.a.resize(static_cast<std::size_t>(m) * 2);
    sp.da.resize(static_cast<std::size_t>(m) * 2);

    const double s = std::sin(src.theta_rad);
    const double c = std::cos(src.theta_rad);
    for (int i = 0; i < k; ++i) {
        const double phase = i * kPi * s;     // (k-1) pi sin(theta)
        const double rate = i * kPi * c;      // (k-1) pi cos(theta)
        const double xi = std::cos(phase);
        const double psi = std::sin(phase);
        const double dxi = -rate * psi;
        const double dpsi = rate * xi;
        // in-phase block
        sp.a[static_cast<std::size_t>(i) * 2 + 0] = xi;
        sp.a[static_cast<std::size_t>(i) * 2 + 1] = psi;
        sp.da[static_cast<std::size_t>(i) * 2 + 0] = dxi;
        sp.da[static_cast<std::size_t>(i) * 2 + 1] = dpsi;
        // quadrature block
        sp.a[static_cast<std::size_t>(k + i) * 2 + 0] = -psi;
        sp.a[static_cast<std::size_t>(k + i) * 2 + 1] = xi;
        sp.da[static_cast<std::size_t>(k + i) * 2 + 0] = -dpsi;
        sp.da[static_cast<std::size_t>(k + i) * 2 + 1] = dxi;
    }
    return sp;
}

CovariancePair receive_covariance(const UlaSource& src) {
    const SteeringPair sp = steering(src);
    const int m = sp.m;
    const double g2 = src.gamma * src.gamma;

    CovariancePair cov{SymMatrix(m), SymMatrix(m)};
    for (int i = 0; i < m; ++i) {
        cov.sigma_y.set(i, i, g2 + 1.0);
        cov.d_sigma_y.set(i, i, 0.0);
        for (int j = 0; j < i; ++j) {
            const double aa = sp.at(i, 0) * sp.at(j, 0) + sp.at(i, 1) * sp.at(j, 1);
            const double daa = sp.d_at(i, 0) * sp.at(j, 0) + sp.d_at(i, 1) * sp.at(j, 1) +
                               sp.at(i, 0) * sp.d_at(j, 0) + sp.at(i, 1) * sp.d_at(j, 1);
            cov.sigma_y.set(i, j, g2 * aa);
            cov.d_sigma_y.set(i, j, g2 * daa);
        }
    }
    return cov;
}

double fisher_unquantized(const CovariancePair& cov) {
    const int m = cov.sigma_y.dim();
    const CholeskyFactor f = spd_factor(cov.sigma_y);

    // X = sigma_y^-1 d_sigma_y, column by column.
    std::vector<double> x(static_cast<std::size_t>(m) * m);
    std::vector<double> col(m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) col[i] = cov.d_sigma_y(i, j);
        f.solve_in_place(col);
        for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i) * m + j] = col[i];
    }

    double tr = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            tr += x[static_cast<std::size_t>(i) * m + j] * x[static_cast<std::size_t>(j) * m + i];
    return 0.5 * tr;
}

}  // namespace doabound
