#pragma once

#include <string>

#include "doabound/montecarlo.hpp"

namespace doabound {

/// Shortest-exact decimal rendering used by every CSV column ("%.17g" keeps
/// doubles bit-exact across a write/parse round trip).
std::string format_double(double v);

struct LossRow {
    std::string variable;  // name of the swept quantity: snr | theta | k
    int sensor_count = 0;
    double theta_deg = 0.0;
    double snr_db = 0.0;
    double fisher_y = 0.0;
    double fisher_lb = 0.0;
    double chi_db = 0.0;
};

/// Header: variable,K,theta_deg,snr_db,fisher_y,fisher_lb,chi_db
std::string loss_csv(const std::vector<LossRow>& rows);

/// Header: snr_db,rmse_deg,pcrlb_root_deg,ratio,failed_runs
std::string simulate_csv(const RmseReport& report);

/// JSON summary embedding the full configuration (master seed included) for
/// exact replay, plus the per-SNR results.
std::string simulate_summary_json(const RmseReport& report, const std::string& csv_path);

/// Parses the config block of a summary produced by simulate_summary_json.
ExperimentConfig parse_replay_config(const std::string& json_text);

}  // namespace doabound
