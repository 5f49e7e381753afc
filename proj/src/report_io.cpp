#include "doabound/report_io.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace doabound {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string loss_csv(const std::vector<LossRow>& rows) {
    std::ostringstream out;
    out << "variable,K,theta_deg,snr_db,fisher_y,fisher_lb,chi_db\n";
    for (const LossRow& r : rows) {
        out << r.variable << ',' << r.sensor_count << ',' << format_double(r.theta_deg) << ','
            << format_double(r.snr_db) << ',' << format_double(r.fisher_y) << ','
            << format_double(r.fisher_lb) << ',' << format_double(r.chi_db) << '\n';
    }
    return out.str();
}

std::string simulate_csv(const RmseReport& report) {
    std::ostringstream out;
    out << "snr_db,rmse_deg,pcrlb_root_deg,ratio,failed_runs\n";
    for (const SnrPointResult& p : report.points) {
        out << format_double(p.snr_db) << ',' << format_double(p.rmse_deg) << ','
            << format_double(p.pcrlb_root_deg) << ',' << format_double(p.ratio) << ','
            << p.failed_runs << '\n';
    }
    return out.str();
}

std::string simulate_summary_json(const RmseReport& report, const std::string& csv_path) {
    nlohmann::json j;
    const ExperimentConfig& c = report.config;
    j["config"] = {
        {"k", c.sensor_count},
        {"theta_deg", c.theta_deg},
        {"snr_db_list", c.snr_db_list},
        {"n", c.snapshots},
        {"runs", c.runs},
        {"master_seed", c.master_seed},
        {"estimator", c.method == EstimatorMethod::cmle ? "cmle" : "gaussian"},
        {"grid_points", c.estimator.grid_points},
        {"x_tol_rad", c.estimator.x_tol_rad},
        {"theta_min_deg", c.estimator.theta_min_deg},
        {"theta_max_deg", c.estimator.theta_max_deg},
    };
    j["csv_path"] = csv_path;
    nlohmann::json pts = nlohmann::json::array();
    for (const SnrPointResult& p : report.points) {
        pts.push_back({{"snr_db", p.snr_db},
                       {"rmse_deg", p.rmse_deg},
                       {"pcrlb_root_deg", p.pcrlb_root_deg},
                       {"ratio", p.ratio},
                       {"failed_runs", p.failed_runs},
                       {"wall_time_sec", p.wall_time_sec}});
    }
    j["points"] = pts;
    return j.dump(2) + "\n";
}

ExperimentConfig parse_replay_config(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    const nlohmann::json& c = j.at("config");
    ExperimentConfig cfg;
    cfg.sensor_count = c.at("k").get<int>();
    cfg.theta_deg = c.at("theta_deg").get<double>();
    cfg.snr_db_list = c.at("snr_db_list").get<std::vector<double>>();
    cfg.snapshots = c.at("n").get<int>();
    cfg.runs = c.at("runs").get<int>();
    cfg.master_seed = c.at("master_seed").get<std::uint64_t>();
    cfg.method = c.at("estimator").get<std::string>() == "gaussian"
                     ? EstimatorMethod::gaussian_mle
                     : EstimatorMethod::cmle;
    cfg.estimator.grid_points = c.at("grid_points").get<int>();
    cfg.estimator.x_tol_rad = c.at("x_tol_rad").get<double>();
    cfg.estimator.theta_min_deg = c.at("theta_min_deg").get<double>();
    cfg.estimator.theta_max_deg = c.at("theta_max_deg").get<double>();
    return cfg;
}

}  // namespace doabound
