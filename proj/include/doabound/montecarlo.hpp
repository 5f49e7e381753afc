#pragma once

#include "doabound/estimator.hpp"

namespace doabound {

/// Column-major dense real matrix (snapshots live in columns).
struct RealMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    RealMatrix() = default;
    RealMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& at(int i, int j) { return a[static_cast<std::size_t>(j) * rows + i]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(j) * rows + i]; }
};

/// Portable deterministic generator: splitmix64 stream feeding Box-Muller
/// normal pairs. Not cryptographic; chosen so identical seeds reproduce
/// identical streams regardless of platform RNG library details.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform on (0, 1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal();

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Run seed derivation: a named splitmix64 mix of (master, snr index, run
/// index), independent of any parallel schedule.
std::uint64_t derive_run_seed(std::uint64_t master_seed, std::uint64_t snr_index,
                              std::uint64_t run_index);

struct ExperimentConfig {
    int sensor_count = 4;
    double theta_deg = 5.0;
    std::vector<double> snr_db_list;
    int snapshots = 1000;  // N per run
    int runs = 2000;
    std::uint64_t master_seed = 0x1bda5eed;
    EstimatorMethod method = EstimatorMethod::cmle;
    int threads = 1;
    EstimatorOptions estimator;

    void validate() const;
};

struct SnrPointResult {
    double snr_db = 0.0;
    double rmse_deg = 0.0;
    double pcrlb_root_deg = 0.0;
    double ratio = 0.0;  // rmse / pcrlb root
    int failed_runs = 0;
    double wall_time_sec = 0.0;
};

struct RmseReport {
    ExperimentConfig config;
    std::vector<SnrPointResult> points;
};

/// Test hooks for the experiment driver.
struct ExperimentHooks {
    /// Replaces every run's sample statistics by the population value
    /// mu_phi(theta0); the resulting RMSE must be 0.
    bool force_population_statistics = false;
};

/// One column per snapshot: y_n = gamma A(theta) x_n + eta_n with
/// x_n ~ N(0, I_2) and eta_n ~ N(0, I_M).
RealMatrix sample_receive(const UlaSource& src, int n, std::uint64_t seed);

/// Element-wise hard limiter with sign(0) = +1.
BitSnapshots quantize(const RealMatrix& y);

/// Sample covariance (1/N) Y Y^T of unquantized snapshots.
SymMatrix sample_covariance(const RealMatrix& y);

/// Seeded RMSE-versus-PCRLB experiment. Non-converged runs are counted in
/// failed_runs and excluded from the RMSE (a warning goes to stderr when
/// they exceed 1%). Identical configs produce identical reports for any
/// thread count: per-run squared errors land in a run-indexed buffer and are
/// reduced with compensated summation in index order.
RmseReport run_rmse_experiment(const ExperimentConfig& cfg);
RmseReport run_rmse_experiment(const ExperimentConfig& cfg, const ExperimentHooks& hooks);

}  // namespace doabound
