#include <cmath>
#include <random>

#include "doctest.h"
#include "doabound/montecarlo.hpp"
#include "test_util.hpp"

using namespace doabound;

TEST_CASE("PairIndex strict lower triangle, column-major") {
    const PairIndex pi(4);
    CHECK(pi.count() == 6);
    const std::pair<int, int> expected[6] = {{1, 0}, {2, 0}, {3, 0}, {2, 1}, {3, 1}, {3, 2}};
    for (int l = 0; l < 6; ++l) {
        CHECK(pi.pair(l) == expected[l]);
        CHECK(pi.index(expected[l].first, expected[l].second) == l);
        CHECK(pi.index(expected[l].second, expected[l].first) == l);
    }
    for (int m : {2, 5, 9, 16}) {
        const PairIndex p(m);
        CHECK(p.count() == m * (m - 1) / 2);
        for (int l = 0; l < p.count(); ++l) {
            const auto [i, j] = p.pair(l);
            CHECK(i > j);
            CHECK(p.index(i, j) == l);
        }
    }
    CHECK_THROWS_AS(pi.index(2, 2), std::invalid_argument);
}

TEST_CASE("arcsine_map") {
    SUBCASE("no signal: identity, zero derivative") {
        const QuantizedCovariance qc = testutil::model_qc(3, 0.4, 0.0);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                CHECK(qc.sigma_z(i, j) == (i == j ? 1.0 : 0.0));
                CHECK(qc.d_sigma_z(i, j) == 0.0);
            }
    }
    SUBCASE("rho = 1/2 maps to 1/3") {
        // gamma = 1 so the denominator is 2; an off-diagonal entry of 1 gives rho = 1/2
        CovariancePair cov{SymMatrix(2), SymMatrix(2)};
        cov.sigma_y.set(0, 0, 2.0);
        cov.sigma_y.set(1, 1, 2.0);
        cov.sigma_y.set(1, 0, 1.0);
        const QuantizedCovariance qc = arcsine_map(cov, 1.0);
        CHECK(qc.rho(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(qc.sigma_z(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    }
    SUBCASE("derivative matches finite differences of the map") {
        const double theta = deg_to_rad(30.0);
        const double h = 1e-6;
        const QuantizedCovariance qc = testutil::model_qc(2, theta, 1.0);
        const QuantizedCovariance qp = testutil::model_qc(2, theta + h, 1.0);
        const QuantizedCovariance qm = testutil::model_qc(2, theta - h, 1.0);
        const double scale = qc.d_sigma_z.max_abs();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < i; ++j) {
                const double fd = (qp.sigma_z(i, j) - qm.sigma_z(i, j)) / (2 * h);
                CHECK(std::fabs(fd - qc.d_sigma_z(i, j)) <= 1e-6 * std::max(scale, 1e-6));
            }
    }
    SUBCASE("unit diagonal is required") {
        CovariancePair cov{SymMatrix::identity(2), SymMatrix(2)};
        CHECK_THROWS_AS(arcsine_map(cov, 1.0), std::invalid_argument);
    }
}

TEST_CASE("orthant2") {
    CHECK(orthant2(0.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(orthant2(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(orthant2(-1.0) == doctest::Approx(0.0).scale(1));
    CHECK_THROWS_AS(orthant2(1.5), std::invalid_argument);
}

TEST_CASE("bivariate normal upper probability") {
    SUBCASE("orthant consistency") {
        for (double r = -0.999; r <= 0.999; r += 0.111) {
            CHECK(std::fabs(detail::bvn_upper(0.0, 0.0, r) - orthant2(r)) <= 2e-15);
        }
    }
    SUBCASE("independence factorizes") {
        for (double h : {-1.5, 0.3, 2.0})
            for (double k : {-2.0, 0.0, 1.1})
                CHECK(detail::bvn_upper(h, k, 0.0) ==
                      doctest::Approx(std_normal_cdf(-h) * std_normal_cdf(-k)).epsilon(1e-14));
    }
    SUBCASE("quadrature oracle over (h, k, r)") {
        // P(X > h, Y > k) = int_h^inf pdf(x) Phi((r x - k)/sqrt(1-r^2)) dx
        for (double r : {-0.99, -0.8, -0.35, 0.2, 0.6, 0.925, 0.99}) {
            const double s = std::sqrt(1.0 - r * r);
            for (double h : {-1.7, 0.0, 0.9}) {
                for (double k : {-0.6, 0.4, 2.1}) {
                    auto f = [&](double x) {
                        return std_normal_pdf(x) * std_normal_cdf((r * x - k) / s);
                    };
                    const double oracle = quad_adaptive(f, h, 8.5, {1e-13, 1e-13, 40});
                    CHECK(std::fabs(detail::bvn_upper(h, k, r) - oracle) <= 5e-14);
                }
            }
        }
    }
    SUBCASE("degenerate correlations") {
        CHECK(detail::bvn_upper(0.5, -0.2, 1.0) ==
              doctest::Approx(std_normal_cdf(-0.5)).epsilon(1e-14));
        CHECK(detail::bvn_upper(-1.0, -0.2, -1.0) ==
              doctest::Approx(std_normal_cdf(0.2) - std_normal_cdf(-1.0)).epsilon(1e-13));
        CHECK(detail::bvn_upper(0.5, 0.2, -1.0) == 0.0);
    }
}

TEST_CASE("orthant4 reference values") {
    CHECK(orthant4(SymMatrix::identity(4)) == doctest::Approx(1.0 / 16).epsilon(1e-10));

    SymMatrix block = SymMatrix::identity(4);
    block.set(1, 0, 0.5);
    CHECK(orthant4(block) == doctest::Approx(1.0 / 12).epsilon(1e-10));

    SUBCASE("consistency with orthant2 when rows 3, 4 are independent") {
        for (double r : {-0.7, -0.2, 0.4, 0.85}) {
            SymMatrix c = SymMatrix::identity(4);
            c.set(1, 0, r);
            CHECK(std::fabs(orthant4(c) - orthant2(r) / 4.0) <= 1e-8);
        }
    }
    SUBCASE("input validation") {
        SymMatrix bad = SymMatrix::identity(4);
        bad.set(1, 0, 1.2);
        CHECK_THROWS_AS(orthant4(bad), InvalidCorrelation);
        SymMatrix notpsd = SymMatrix::identity(4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < i; ++j) notpsd.set(i, j, -0.9);
        CHECK_THROWS_AS(orthant4(notpsd), InvalidCorrelation);
        CHECK_THROWS_AS(orthant4(SymMatrix::identity(3)), std::invalid_argument);
    }
}

TEST_CASE("orthant4 against the sequential-conditioning evaluator") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 12; ++trial) {
        const SymMatrix c = testutil::random_correlation4(rng);
        const auto c6 = testutil::corr6_of(c);
        const double fast = detail::orthant4_corr6(c6, QuadPrecision::full);
        const double slow = detail::orthant4_conditioning(c6);
        CHECK(std::fabs(fast - slow) <= 1e-8);
    }
}

TEST_CASE("orthant4 closure and Monte Carlo oracle (unit-sized)") {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 8; ++trial) {
        const SymMatrix c = testutil::random_correlation4(rng);
        const auto c6 = testutil::corr6_of(c);
        double sum = 0.0;
        for (int mask = 0; mask < 16; ++mask) {
            const std::array<int, 4> q = {(mask & 1) ? -1 : 1, (mask & 2) ? -1 : 1,
                                          (mask & 4) ? -1 : 1, (mask & 8) ? -1 : 1};
            sum += detail::orthant4_signed(c6, q, QuadPrecision::full);
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-7);
    }

    // Monte Carlo agreement on two fresh matrices
    for (int trial = 0; trial < 2; ++trial) {
        const SymMatrix c = testutil::random_correlation4(rng);
        const double p = orthant4(c);
        const CholeskyFactor f = spd_factor(c);
        Rng draw(9000 + trial);
        const int n = 1000000;
        int hits = 0;
        for (int s = 0; s < n; ++s) {
            double w[4];
            for (auto& v : w) v = draw.next_normal();
            bool all = true;
            for (int i = 0; i < 4 && all; ++i) {
                double y = 0.0;
                for (int k = 0; k <= i; ++k) y += f.at(i, k) * w[k];
                all = y > 0.0;
            }
            if (all) ++hits;
        }
        const double mc = static_cast<double>(hits) / n;
        const double sigma = std::sqrt(std::max(mc * (1.0 - mc), 1e-12) / n);
        CHECK(std::fabs(p - mc) <= 3.0 * sigma);
    }
}

TEST_CASE("quartic_moment case split") {
    const QuantizedCovariance qc = testutil::model_qc(3, deg_to_rad(20.0), 1.2);

    SUBCASE("all indices equal") {
        CHECK(quartic_moment(2, 2, 2, 2, qc) == 1.0);
        CHECK(quartic_moment(0, 0, 3, 3, qc) == 1.0);
    }
    SUBCASE("three equal indices collapse to the pair moment") {
        CHECK(quartic_moment(1, 1, 1, 4, qc) == qc.sigma_z(1, 4));
        CHECK(quartic_moment(0, 2, 2, 2, qc) == qc.sigma_z(0, 2));
    }
    SUBCASE("one repeated index collapses to the singleton pair") {
        CHECK(quartic_moment(1, 1, 2, 5, qc) == qc.sigma_z(2, 5));
        CHECK(quartic_moment(3, 0, 3, 4, qc) == qc.sigma_z(0, 4));
    }
    SUBCASE("independent components give zero") {
        const QuantizedCovariance iid = testutil::model_qc(2, 0.1, 0.0);
        CHECK(std::fabs(quartic_moment(0, 1, 2, 3, iid)) <= 1e-9);
    }
    SUBCASE("block structure factorizes into arcsine pair moments") {
        // rho(0,1) = a, rho(2,3) = b, zero cross-correlations
        for (double a : {-0.6, 0.3}) {
            for (double b : {0.45, 0.8}) {
                QuantizedCovariance blk{SymMatrix::identity(4), SymMatrix(4),
                                        SymMatrix::identity(4)};
                blk.rho.set(1, 0, a);
                blk.rho.set(3, 2, b);
                blk.sigma_z.set(1, 0, (2.0 / kPi) * std::asin(a));
                blk.sigma_z.set(3, 2, (2.0 / kPi) * std::asin(b));
                const double expected =
                    (2.0 / kPi) * std::asin(a) * (2.0 / kPi) * std::asin(b);
                CHECK(std::fabs(quartic_moment(0, 1, 2, 3, blk) - expected) <= 1e-8);
            }
        }
    }
    SUBCASE("invariant under all 24 permutations") {
        const QuantizedCovariance m = testutil::model_qc(4, deg_to_rad(33.0), 0.9);
        int idx[4] = {0, 2, 5, 7};
        const double ref = quartic_moment(idx[0], idx[1], idx[2], idx[3], m);
        std::sort(idx, idx + 4);
        do {
            CHECK(std::fabs(quartic_moment(idx[0], idx[1], idx[2], idx[3], m) - ref) <= 1e-9);
        } while (std::next_permutation(idx, idx + 4));
    }
}

TEST_CASE("statistic_moments") {
    SUBCASE("iid signs: zero mean, identity covariance") {
        const StatisticMoments sm = statistic_moments(testutil::model_qc(3, 0.25, 0.0));
        for (int l = 0; l < 15; ++l) {
            CHECK(sm.mu[l] == 0.0);
            CHECK(sm.d_mu[l] == 0.0);
            for (int m = 0; m < 15; ++m) CHECK(sm.r(l, m) == (l == m ? 1.0 : 0.0));
        }
    }
    SUBCASE("pairs sharing one index reduce to the non-shared pair moment") {
        const QuantizedCovariance qc = testutil::model_qc(2, deg_to_rad(10.0), 1.0);
        const StatisticMoments sm = statistic_moments(qc);
        const PairIndex pi(4);
        for (int l = 0; l < pi.count(); ++l) {
            for (int m = 0; m < l; ++m) {
                const auto [i, j] = pi.pair(l);
                const auto [p, q] = pi.pair(m);
                int shared = -1, a = -1, b = -1;
                if (i == p) shared = i, a = j, b = q;
                else if (i == q) shared = i, a = j, b = p;
                else if (j == p) shared = j, a = i, b = q;
                else if (j == q) shared = j, a = i, b = p;
                if (shared < 0) continue;
                const double expected = qc.sigma_z(a, b) - sm.mu[l] * sm.mu[m];
                CHECK(sm.r(l, m) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
    SUBCASE("R diagonal identity") {
        const StatisticMoments sm = statistic_moments(testutil::model_qc(2, 0.3, 1.5));
        for (int l = 0; l < 6; ++l)
            CHECK(sm.r(l, l) == doctest::Approx(1.0 - sm.mu[l] * sm.mu[l]).epsilon(1e-14));
    }
    SUBCASE("R stays PSD across random models up to K=6") {
        std::mt19937_64 rng(404);
        std::uniform_real_distribution<double> ud(-1.4, 1.4);
        for (int trial = 0; trial < 6; ++trial) {
            const int k = 2 + static_cast<int>(rng() % 5);
            const double gamma = 0.2 + 2.0 * std::generate_canonical<double, 53>(rng);
            const StatisticMoments sm = statistic_moments(testutil::model_qc(k, ud(rng), gamma));
            SymMatrix shifted = sm.r;
            for (int l = 0; l < shifted.dim(); ++l) shifted.set(l, l, shifted(l, l) + 1e-8);
            CHECK_NOTHROW(spd_factor(shifted));
        }
    }
    SUBCASE("d_mu matches finite differences of mu") {
        const double theta = deg_to_rad(24.0);
        const double h = 1e-6;
        const StatisticMoments sm = statistic_moments(testutil::model_qc(3, theta, 1.1));
        const StatisticMoments sp = statistic_moments(testutil::model_qc(3, theta + h, 1.1));
        const StatisticMoments sn = statistic_moments(testutil::model_qc(3, theta - h, 1.1));
        double scale = 0.0;
        for (double v : sm.d_mu) scale = std::max(scale, std::fabs(v));
        for (std::size_t l = 0; l < sm.mu.size(); ++l) {
            const double fd = (sp.mu[l] - sn.mu[l]) / (2 * h);
            CHECK(std::fabs(fd - sm.d_mu[l]) <= 1e-6 * std::max(scale, 1e-6));
        }
    }
    SUBCASE("empirical moment oracle at K=2") {
        const int k = 2;
        const double theta = deg_to_rad(10.0);
        const double gamma = 1.0;
        const QuantizedCovariance qc = testutil::model_qc(k, theta, gamma);
        const StatisticMoments sm = statistic_moments(qc);

        const int n = 200000;
        const RealMatrix y = sample_receive({k, theta, gamma}, n, 515151);
        const BitSnapshots z = quantize(y);
        const std::vector<double> phi = sample_statistics(z);

        const PairIndex pi(2 * k);
        for (int l = 0; l < pi.count(); ++l) {
            const double se = std::sqrt((1.0 - sm.mu[l] * sm.mu[l]) / n);
            CHECK(std::fabs(phi[l] - sm.mu[l]) <= 5.0 * se + 1e-9);
        }
        // empirical covariance of the statistics
        for (int l = 0; l < pi.count(); ++l) {
            const auto [i, j] = pi.pair(l);
            for (int m = 0; m <= l; ++m) {
                const auto [p, q] = pi.pair(m);
                double acc = 0.0;
                for (int col = 0; col < n; ++col)
                    acc += z.at(i, col) * z.at(j, col) * z.at(p, col) * z.at(q, col);
                const double second = acc / n;
                const double r_hat = second - phi[l] * phi[m];
                const double pair_second = sm.r(l, m) + sm.mu[l] * sm.mu[m];
                const double var_prod = std::max(1.0 - pair_second * pair_second, 0.0);
                const double se = std::sqrt(var_prod / n) +
                                  std::fabs(sm.mu[l]) * std::sqrt((1 - sm.mu[m] * sm.mu[m]) / n) +
                                  std::fabs(sm.mu[m]) * std::sqrt((1 - sm.mu[l] * sm.mu[l]) / n);
                CHECK(std::fabs(r_hat - sm.r(l, m)) <= 5.0 * se + 10.0 / n);
            }
        }
    }
}
