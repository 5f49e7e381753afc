#include <cmath>

#include "doctest.h"
#include "doabound/montecarlo.hpp"
#include "test_util.hpp"

using namespace doabound;

TEST_CASE("quantize") {
    SUBCASE("zero maps to +1") {
        RealMatrix y(2, 2);
        const BitSnapshots z = quantize(y);
        for (auto v : z.z) CHECK(v == 1);
    }
    SUBCASE("negative entries map to -1") {
        RealMatrix y(2, 1);
        y.at(0, 0) = -3.5;
        y.at(1, 0) = -1e-300;
        const BitSnapshots z = quantize(y);
        CHECK(z.at(0, 0) == -1);
        CHECK(z.at(1, 0) == -1);
    }
    SUBCASE("idempotent on its own output") {
        const RealMatrix y = sample_receive({2, 0.4, 1.0}, 50, 7);
        const BitSnapshots z = quantize(y);
        RealMatrix as_reals(z.m, z.n);
        for (std::size_t i = 0; i < z.z.size(); ++i) as_reals.a[i] = z.z[i];
        CHECK(quantize(as_reals).z == z.z);
    }
}

TEST_CASE("sample_receive") {
    SUBCASE("determinism for a fixed seed") {
        const RealMatrix a = sample_receive({3, 0.2, 1.1}, 100, 4242);
        const RealMatrix b = sample_receive({3, 0.2, 1.1}, 100, 4242);
        CHECK(a.a == b.a);
        const RealMatrix c = sample_receive({3, 0.2, 1.1}, 100, 4243);
        CHECK(a.a != c.a);
    }
    SUBCASE("noise-only covariance converges to identity") {
        const int n = 400000;
        const RealMatrix y = sample_receive({2, 0.1, 0.0}, n, 11);
        const SymMatrix s = sample_covariance(y);
        // variance of a covariance entry of iid normals is (1 + delta_ij)/n
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j) {
                const double se = std::sqrt((i == j ? 2.0 : 1.0) / n);
                CHECK(std::fabs(s(i, j) - (i == j ? 1.0 : 0.0)) <= 4.0 * se);
            }
    }
    SUBCASE("model covariance matches sigma_y entrywise") {
        const int n = 400000;
        const UlaSource src{2, deg_to_rad(30.0), 1.0};
        const CovariancePair cov = receive_covariance(src);
        const SymMatrix s = sample_covariance(sample_receive(src, n, 2024));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j) {
                // var of the (i,j) sample moment: (sii sjj + sij^2)/n
                const double se = std::sqrt(
                    (cov.sigma_y(i, i) * cov.sigma_y(j, j) + cov.sigma_y(i, j) * cov.sigma_y(i, j)) /
                    n);
                CHECK(std::fabs(s(i, j) - cov.sigma_y(i, j)) <= 4.0 * se);
            }
    }
    SUBCASE("quantized sign covariance follows the arcsine law end to end") {
        const int n = 1000000;
        const UlaSource src{2, deg_to_rad(20.0), 1.4};
        const QuantizedCovariance qc = arcsine_map(receive_covariance(src), src.gamma);
        const BitSnapshots z = quantize(sample_receive(src, n, 31337));
        const auto phi = sample_statistics(z);
        const PairIndex pi(4);
        for (int l = 0; l < pi.count(); ++l) {
            const auto [i, j] = pi.pair(l);
            const double expected = qc.sigma_z(i, j);
            const double se = std::sqrt((1.0 - expected * expected) / n);
            CHECK(std::fabs(phi[l] - expected) <= 4.0 * se + 1e-9);
        }
    }
}

TEST_CASE("derive_run_seed decorrelates indices") {
    CHECK(derive_run_seed(1, 0, 0) != derive_run_seed(1, 0, 1));
    CHECK(derive_run_seed(1, 0, 0) != derive_run_seed(1, 1, 0));
    CHECK(derive_run_seed(1, 0, 0) != derive_run_seed(2, 0, 0));
    CHECK(derive_run_seed(5, 3, 9) == derive_run_seed(5, 3, 9));
}

TEST_CASE("run_rmse_experiment") {
    ExperimentConfig cfg;
    cfg.sensor_count = 2;
    cfg.theta_deg = 10.0;
    cfg.snr_db_list = {0.0};
    cfg.snapshots = 400;
    cfg.runs = 40;
    cfg.master_seed = 777;

    SUBCASE("population statistics hook gives zero RMSE") {
        ExperimentConfig c = cfg;
        c.runs = 1;
        ExperimentHooks hooks;
        hooks.force_population_statistics = true;
        const RmseReport rep = run_rmse_experiment(c, hooks);
        REQUIRE(rep.points.size() == 1);
        CHECK(rep.points[0].failed_runs == 0);
        CHECK(rep.points[0].rmse_deg <= 1e-5);
    }
    SUBCASE("same master seed reproduces the report") {
        const RmseReport a = run_rmse_experiment(cfg);
        const RmseReport b = run_rmse_experiment(cfg);
        REQUIRE(a.points.size() == b.points.size());
        CHECK(a.points[0].rmse_deg == b.points[0].rmse_deg);
        CHECK(a.points[0].failed_runs == b.points[0].failed_runs);
    }
    SUBCASE("thread count does not change the numbers") {
        ExperimentConfig c1 = cfg, c2 = cfg, c8 = cfg;
        c2.threads = 2;
        c8.threads = 8;
        const RmseReport r1 = run_rmse_experiment(c1);
        const RmseReport r2 = run_rmse_experiment(c2);
        const RmseReport r8 = run_rmse_experiment(c8);
        CHECK(r1.points[0].rmse_deg == r2.points[0].rmse_deg);
        CHECK(r1.points[0].rmse_deg == r8.points[0].rmse_deg);
        CHECK(r1.points[0].failed_runs == r8.points[0].failed_runs);
    }
    SUBCASE("config validation") {
        ExperimentConfig bad = cfg;
        bad.snr_db_list.clear();
        CHECK_THROWS_AS(run_rmse_experiment(bad), std::invalid_argument);
        bad = cfg;
        bad.runs = 0;
        CHECK_THROWS_AS(run_rmse_experiment(bad), std::invalid_argument);
    }
}

TEST_CASE("quantization costs accuracy: MLE beats CMLE, both above their bounds") {
    ExperimentConfig cfg;
    cfg.sensor_count = 4;
    cfg.theta_deg = 5.0;
    cfg.snr_db_list = {-3.0};
    cfg.snapshots = 1000;
    cfg.runs = 6000;
    cfg.master_seed = 20240515;

    ExperimentConfig gauss = cfg;
    gauss.runs = 2000;
    gauss.method = EstimatorMethod::gaussian_mle;

    const RmseReport quant = run_rmse_experiment(cfg);
    const RmseReport ideal = run_rmse_experiment(gauss);

    const double cmle_rmse = quant.points[0].rmse_deg;
    const double mle_rmse = ideal.points[0].rmse_deg;
    CHECK(mle_rmse < cmle_rmse);

    // both estimators sit above their respective bound roots (2% sampling slack)
    const UlaSource src{4, deg_to_rad(5.0), gamma_from_snr_db(-3.0)};
    const double fy = fisher_unquantized(receive_covariance(src));
    const double crlb_root_deg = rad_to_deg(std::sqrt(1.0 / (cfg.snapshots * fy)));
    CHECK(quant.points[0].ratio >= 0.98);
    CHECK(mle_rmse >= crlb_root_deg * 0.98);
}
