#include <cmath>
#include <random>

#include "doctest.h"
#include "doabound/montecarlo.hpp"
#include "test_util.hpp"

using namespace doabound;

namespace {

std::vector<double> population_statistics(int k, double theta_rad, double gamma) {
    return statistic_moments(testutil::model_qc(k, theta_rad, gamma)).mu;
}

}  // namespace

TEST_CASE("sample_statistics") {
    SUBCASE("single snapshot gives exact sign products") {
        BitSnapshots z;
        z.m = 3;
        z.n = 1;
        z.z = {1, -1, 1};
        const auto phi = sample_statistics(z);
        // pairs (1,0), (2,0), (2,1)
        CHECK(phi == std::vector<double>{-1.0, 1.0, -1.0});
    }
    SUBCASE("repeated identical columns equal the single-column value") {
        BitSnapshots one;
        one.m = 4;
        one.n = 1;
        one.z = {1, -1, -1, 1};
        BitSnapshots many;
        many.m = 4;
        many.n = 5;
        for (int c = 0; c < 5; ++c)
            many.z.insert(many.z.end(), one.z.begin(), one.z.end());
        CHECK(sample_statistics(many) == sample_statistics(one));
    }
    SUBCASE("large-sample agreement with the analytic mean") {
        const int k = 2;
        const double theta = deg_to_rad(25.0);
        const double gamma = 1.3;
        const StatisticMoments sm = statistic_moments(testutil::model_qc(k, theta, gamma));
        const int n = 500000;
        const auto phi = sample_statistics(quantize(sample_receive({k, theta, gamma}, n, 99)));
        for (std::size_t l = 0; l < phi.size(); ++l) {
            const double se = std::sqrt((1.0 - sm.mu[l] * sm.mu[l]) / n);
            CHECK(std::fabs(phi[l] - sm.mu[l]) <= 4.0 * se + 1e-9);
        }
    }
}

TEST_CASE("cmle population fixed points") {
    SUBCASE("exact statistics recover theta0") {
        for (double theta_deg : {-40.0, 5.0, 62.0}) {
            const double theta0 = deg_to_rad(theta_deg);
            const auto phi = population_statistics(3, theta0, 1.0);
            const EstimateResult res = cmle(phi, 3, 1.0);
            CHECK(res.converged);
            CHECK(std::fabs(res.theta_hat_rad - theta0) <= 1e-7);
            CHECK(std::fabs(res.objective_at_solution) <= 1e-12);
        }
    }
    SUBCASE("pure noise exercises the flat-objective diagnostic") {
        const auto phi = std::vector<double>(6, 0.0);
        const EstimateResult res = cmle(phi, 2, 0.0);
        CHECK_FALSE(res.converged);
    }
    SUBCASE("mirror equivariance at the population level") {
        const double theta0 = deg_to_rad(23.0);
        const EstimateResult plus = cmle(population_statistics(2, theta0, 1.2), 2, 1.2);
        const EstimateResult minus = cmle(population_statistics(2, -theta0, 1.2), 2, 1.2);
        CHECK(plus.converged);
        CHECK(minus.converged);
        CHECK(std::fabs(plus.theta_hat_rad + minus.theta_hat_rad) <= 1e-7);

        // flipping the quadrature-block signs mirrors the statistics
        const PairIndex pi(4);
        auto mirrored = population_statistics(2, theta0, 1.2);
        for (int l = 0; l < pi.count(); ++l) {
            const auto [i, j] = pi.pair(l);
            const bool iq = i >= 2, jq = j >= 2;
            if (iq != jq) mirrored[l] = -mirrored[l];
        }
        const auto direct = population_statistics(2, -theta0, 1.2);
        for (int l = 0; l < pi.count(); ++l)
            CHECK(mirrored[l] == doctest::Approx(direct[l]).epsilon(1e-12));
    }
    SUBCASE("score vanishes at the population point") {
        const double theta0 = deg_to_rad(31.0);
        const auto phi = population_statistics(2, theta0, 0.9);
        const ExactMomentProvider provider(2, 0.9);
        const auto ev = provider.at(theta0, QuadPrecision::full);
        std::vector<double> resid(phi.size());
        for (std::size_t l = 0; l < phi.size(); ++l) resid[l] = phi[l] - ev->mu[l];
        auto x = resid;
        ev->r_factor.solve_in_place(x);
        double s = 0.0;
        for (std::size_t l = 0; l < phi.size(); ++l) s += ev->d_mu[l] * x[l];
        CHECK(std::fabs(s) <= 1e-9);
    }
}

TEST_CASE("tabulated provider matches the exact pipeline") {
    const int k = 4;
    const double gamma = gamma_from_snr_db(-3.0);
    const TabulatedMomentProvider tab(k, gamma);
    const ExactMomentProvider exact(k, gamma);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(deg_to_rad(3.4), deg_to_rad(6.6));
    for (int trial = 0; trial < 4; ++trial) {
        const double theta = ud(rng);
        const auto a = tab.at(theta, QuadPrecision::full);
        const auto b = exact.at(theta, QuadPrecision::full);
        for (std::size_t l = 0; l < a->mu.size(); ++l) {
            CHECK(std::fabs(a->mu[l] - b->mu[l]) <= 1e-7);
            CHECK(std::fabs(a->d_mu[l] - b->d_mu[l]) <= 1e-6);
        }
    }

    // estimation equivalence on sampled data
    const double theta0 = deg_to_rad(5.0);
    for (int run = 0; run < 6; ++run) {
        const auto phi = sample_statistics(
            quantize(sample_receive({k, theta0, gamma}, 1000, derive_run_seed(4242, 0, run))));
        const EstimateResult via_tab = cmle(phi, tab);
        const EstimateResult via_exact = cmle(phi, exact);
        CHECK(via_tab.converged == via_exact.converged);
        CHECK(std::fabs(via_tab.theta_hat_rad - via_exact.theta_hat_rad) <= 5e-8);
    }
}

TEST_CASE("gaussian_mle") {
    SUBCASE("population covariance recovers theta0") {
        for (double theta_deg : {-55.0, 5.0, 38.0}) {
            const double theta0 = deg_to_rad(theta_deg);
            const CovariancePair cov = receive_covariance({3, theta0, 1.0});
            const EstimateResult res = gaussian_mle(cov.sigma_y, 3, 1.0);
            CHECK(res.converged);
            CHECK(std::fabs(res.theta_hat_rad - theta0) <= 1e-7);
        }
    }
    SUBCASE("pure noise is flat") {
        const EstimateResult res = gaussian_mle(SymMatrix::identity(4), 2, 0.0);
        CHECK_FALSE(res.converged);
    }
    SUBCASE("RMSE efficiency against the unquantized CRLB") {
        const int k = 4;
        const double theta0 = deg_to_rad(5.0);
        const double gamma = gamma_from_snr_db(-3.0);
        const double fy = fisher_unquantized(receive_covariance({k, theta0, gamma}));
        const int n = 1000, runs = 2000;
        double acc = 0.0;
        int good = 0;
        for (int run = 0; run < runs; ++run) {
            const RealMatrix y =
                sample_receive({k, theta0, gamma}, n, derive_run_seed(77, 1, run));
            const EstimateResult res = gaussian_mle(sample_covariance(y), k, gamma);
            if (!res.converged) continue;
            acc += (res.theta_hat_rad - theta0) * (res.theta_hat_rad - theta0);
            ++good;
        }
        REQUIRE(good > runs * 99 / 100);
        const double rmse = std::sqrt(acc / good);
        const double crlb_root = std::sqrt(1.0 / (n * fy));
        CHECK(rmse == doctest::Approx(crlb_root).epsilon(0.15));
    }
}

TEST_CASE("cmle sampling consistency against the pessimistic bound") {
    const int k = 4;
    const double theta0 = deg_to_rad(5.0);
    const double gamma = gamma_from_snr_db(-3.0);
    const BoundReport rep = bound_report({k, theta0, gamma}, 1000);
    const double pcrlb_root = std::sqrt(rep.pcrlb_rad2);

    const TabulatedMomentProvider provider(k, gamma);
    const int runs = 200;
    int within = 0, good = 0;
    for (int run = 0; run < runs; ++run) {
        const auto phi = sample_statistics(
            quantize(sample_receive({k, theta0, gamma}, 1000, derive_run_seed(55, 2, run))));
        const EstimateResult res = cmle(phi, provider);
        if (!res.converged) continue;
        ++good;
        if (std::fabs(res.theta_hat_rad - theta0) <= 3.0 * pcrlb_root) ++within;
    }
    REQUIRE(good >= runs * 99 / 100);
    CHECK(within >= good * 99 / 100);
}
