#include "doabound/montecarlo.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

namespace doabound {

namespace {
constexpr double kTwoPiBm = 6.28318530717958647692;
}

double Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = kTwoPiBm * u2;
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
}

std::uint64_t derive_run_seed(std::uint64_t master_seed, std::uint64_t snr_index,
                              std::uint64_t run_index) {
    auto mix = [](std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    std::uint64_t s = mix(master_seed + 0x9e3779b97f4a7c15ull);
    s = mix(s ^ (snr_index + 0xd1b54a32d192ed03ull));
    s = mix(s ^ (run_index + 0x8cb92ba72f3d8dd7ull));
    return s;
}

void ExperimentConfig::validate() const {
    if (sensor_count < 1) throw std::invalid_argument("ExperimentConfig: K must be >= 1");
    if (runs < 1) throw std::invalid_argument("ExperimentConfig: runs must be >= 1");
    if (snapshots < 1) throw std::invalid_argument("ExperimentConfig: N must be >= 1");
    if (snr_db_list.empty()) throw std::invalid_argument("ExperimentConfig: empty SNR list");
    if (threads < 1) throw std::invalid_argument("ExperimentConfig: threads must be >= 1");
    UlaSource probe{sensor_count, deg_to_rad(theta_deg), 1.0};
    probe.validate();
}

RealMatrix sample_receive(const UlaSource& src, int n, std::uint64_t seed) {
    src.validate();
    if (n < 1) throw std::invalid_argument("sample_receive: N must be >= 1");
    const SteeringPair sp = steering(src);
    const int m = sp.m;
    RealMatrix y(m, n);
    Rng rng(seed);
    for (int col = 0; col < n; ++col) {
        const double x0 = rng.next_normal();
        const double x1 = rng.next_normal();
        double* out = y.a.data() + static_cast<std::size_t>(col) * m;
        for (int i = 0; i < m; ++i) {
            const double signal = src.gamma * (sp.at(i, 0) * x0 + sp.at(i, 1) * x1);
            out[i] = signal + rng.next_normal();
        }
    }
    return y;
}

BitSnapshots quantize(const RealMatrix& y) {
    BitSnapshots z;
    z.m = y.rows;
    z.n = y.cols;
    z.z.resize(y.a.size());
    for (std::size_t idx = 0; idx < y.a.size(); ++idx) {
        const double v = y.a[idx];
        if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite input");
        z.z[idx] = (v >= 0.0) ? 1 : -1;  // sign(0) = +1
    }
    return z;
}

SymMatrix sample_covariance(const RealMatrix& y) {
    const int m = y.rows;
    SymMatrix s(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (int col = 0; col < y.cols; ++col) acc += y.at(i, col) * y.at(j, col);
            s.set(i, j, acc / y.cols);
        }
    }
    return s;
}

namespace {

// Neumaier compensated sum in fixed index order.
double compensated_sum(const std::vector<double>& v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

}  // namespace

RmseReport run_rmse_experiment(const ExperimentConfig& cfg) {
    return run_rmse_experiment(cfg, ExperimentHooks{});
}

RmseReport run_rmse_experiment(const ExperimentConfig& cfg, const ExperimentHooks& hooks) {
    cfg.validate();
    const double theta0 = deg_to_rad(cfg.theta_deg);

    RmseReport report;
    report.config = cfg;
    report.points.reserve(cfg.snr_db_list.size());

    for (std::size_t snr_idx = 0; snr_idx < cfg.snr_db_list.size(); ++snr_idx) {
        const auto t_start = std::chrono::steady_clock::now();
        const double snr_db = cfg.snr_db_list[snr_idx];
        const double gamma = gamma_from_snr_db(snr_db);
        const UlaSource src{cfg.sensor_count, theta0, gamma};

        const BoundReport bound = bound_report(src, cfg.snapshots);
        const double pcrlb_root_deg = std::sqrt(bound.pcrlb_deg2);

        // Shared across all runs of this SNR point; thread-safe and
        // schedule-independent by construction.
        const TabulatedMomentProvider provider(cfg.sensor_count, gamma);
        std::shared_ptr<const MomentEval> population;
        if (hooks.force_population_statistics)
            population = provider.at(theta0, QuadPrecision::full);

        std::vector<double> sq_err(cfg.runs, 0.0);
        std::vector<std::uint8_t> ok(cfg.runs, 0);

        auto one_run = [&](int run_idx) {
            const std::uint64_t seed = derive_run_seed(cfg.master_seed, snr_idx, run_idx);
            EstimateResult est;
            if (cfg.method == EstimatorMethod::cmle) {
                std::vector<double> phi;
                if (hooks.force_population_statistics) {
                    phi = population->mu;
                } else {
                    const RealMatrix y = sample_receive(src, cfg.snapshots, seed);
                    phi = sample_statistics(quantize(y));
                }
                est = cmle(phi, provider, cfg.estimator);
            } else {
                const RealMatrix y = sample_receive(src, cfg.snapshots, seed);
                est = gaussian_mle(sample_covariance(y), cfg.sensor_count, gamma, cfg.estimator);
            }
            if (est.converged) {
                const double err = est.theta_hat_rad - theta0;
                sq_err[run_idx] = err * err;
                ok[run_idx] = 1;
            }
        };

        const int workers = std::min(cfg.threads, cfg.runs);
        if (workers <= 1) {
            for (int r = 0; r < cfg.runs; ++r) one_run(r);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (int r = next.fetch_add(1); r < cfg.runs; r = next.fetch_add(1))
                        one_run(r);
                });
            }
            for (auto& t : pool) t.join();
        }

        int good = 0;
        std::vector<double> kept;
        kept.reserve(cfg.runs);
        for (int r = 0; r < cfg.runs; ++r) {
            if (ok[r]) {
                kept.push_back(sq_err[r]);
                ++good;
            }
        }
        const int failed = cfg.runs - good;
        if (failed > cfg.runs / 100)
            std::cerr << "warning: " << failed << "/" << cfg.runs
                      << " runs failed to converge at SNR " << snr_db << " dB\n";

        SnrPointResult point;
        point.snr_db = snr_db;
        point.failed_runs = failed;
        point.pcrlb_root_deg = pcrlb_root_deg;
        point.rmse_deg =
            good > 0 ? rad_to_deg(std::sqrt(compensated_sum(kept) / good)) : 0.0;
        point.ratio = pcrlb_root_deg > 0.0 ? point.rmse_deg / pcrlb_root_deg : 0.0;
        point.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        report.points.push_back(point);
    }
    return report;
}

}  // namespace doabound
