// Command-line front end: quantization-loss sweeps, single-point bound
// reports, RMSE-versus-bound experiments, orthant probes and a selftest.
// Angles are degrees and ratios are dB at this boundary; everything inside
// the library is radians and linear.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "doabound/report_io.hpp"

namespace {

using namespace doabound;

// ---- parsing helpers ----------------------------------------------------------

std::vector<double> parse_range(const std::string& spec) {
    // "start:stop:step" inclusive, or a single value
    std::vector<double> vals;
    const auto c1 = spec.find(':');
    if (c1 == std::string::npos) {
        vals.push_back(std::stod(spec));
        return vals;
    }
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw std::invalid_argument("range must look like start:stop:step");
    const double a = std::stod(spec.substr(0, c1));
    const double b = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(spec.substr(c2 + 1));
    if (!(step > 0.0) || b < a) throw std::invalid_argument("bad range " + spec);
    const int n = static_cast<int>(std::floor((b - a) / step + 1e-9)) + 1;
    for (int i = 0; i < n; ++i) vals.push_back(a + i * step);
    return vals;
}

std::vector<double> parse_double_list(const std::string& spec) {
    if (spec.find(':') != std::string::npos) return parse_range(spec);
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        auto comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        vals.push_back(std::stod(spec.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (vals.empty()) throw std::invalid_argument("empty list");
    return vals;
}

std::vector<int> parse_int_list(const std::string& spec) {
    // "a..b" inclusive or comma-separated values
    std::vector<int> vals;
    const auto dots = spec.find("..");
    if (dots != std::string::npos) {
        const int a = std::stoi(spec.substr(0, dots));
        const int b = std::stoi(spec.substr(dots + 2));
        if (b < a) throw std::invalid_argument("bad list " + spec);
        for (int v = a; v <= b; ++v) vals.push_back(v);
        return vals;
    }
    std::size_t pos = 0;
    while (pos < spec.size()) {
        auto comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        vals.push_back(std::stoi(spec.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (vals.empty()) throw std::invalid_argument("empty list");
    return vals;
}

void write_output(const std::string& path, const std::string& payload) {
    if (path.empty() || path == "-") {
        std::cout << payload;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << payload;
    if (!out.good()) {
        out.close();
        std::remove(path.c_str());
        throw std::runtime_error("failed while writing " + path);
    }
}

template <class Fn>
void indexed_parallel(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int workers = std::min(threads, count);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

// ---- loss sweep -----------------------------------------------------------------

struct LossArgs {
    std::string var;
    std::string range;
    std::string list;
    int k = 4;
    double theta_deg = 10.0;
    double snr_db = 0.0;
    bool allow_long = false;
};

int run_loss(const LossArgs& args, const std::string& out, const std::string& format,
             int threads) {
    struct Point {
        int k;
        double theta_deg;
        double snr_db;
    };
    std::vector<Point> points;
    if (args.var == "snr") {
        if (args.range.empty()) throw std::invalid_argument("loss --var snr needs --range");
        for (double s : parse_range(args.range)) points.push_back({args.k, args.theta_deg, s});
    } else if (args.var == "theta") {
        if (args.range.empty()) throw std::invalid_argument("loss --var theta needs --range");
        for (double t : parse_range(args.range)) points.push_back({args.k, t, args.snr_db});
    } else if (args.var == "k") {
        if (args.list.empty()) throw std::invalid_argument("loss --var k needs --list");
        for (int k : parse_int_list(args.list)) points.push_back({k, args.theta_deg, args.snr_db});
    } else {
        throw std::invalid_argument("loss --var must be one of snr, theta, k");
    }

    for (const Point& p : points) {
        if (p.k < 1) throw std::invalid_argument("K must be >= 1");
        if (p.k > 12 && !args.allow_long)
            throw std::invalid_argument("K > 12 sweeps take long; pass --allow-long to confirm");
    }

    std::vector<LossRow> rows(points.size());
    std::exception_ptr first_error;
    std::mutex error_mu;
    indexed_parallel(static_cast<int>(points.size()), threads, [&](int i) {
        try {
            const Point& p = points[i];
            const UlaSource src{p.k, deg_to_rad(p.theta_deg), gamma_from_snr_db(p.snr_db)};
            const BoundReport rep = bound_report(src, 1);
            rows[i] = {args.var,      p.k,           p.theta_deg, p.snr_db,
                       rep.fisher_y,  rep.fisher_lb, rep.chi_db};
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    if (format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const LossRow& r : rows)
            j.push_back({{"variable", r.variable},
                         {"k", r.sensor_count},
                         {"theta_deg", r.theta_deg},
                         {"snr_db", r.snr_db},
                         {"fisher_y", r.fisher_y},
                         {"fisher_lb", r.fisher_lb},
                         {"chi_db", r.chi_db}});
        write_output(out, j.dump(2) + "\n");
    } else {
        write_output(out, loss_csv(rows));
    }
    return 0;
}

// ---- single-point bound -----------------------------------------------------------

int run_bound(int k, double theta_deg, double snr_db, int n, const std::string& out,
              const std::string& format) {
    const UlaSource src{k, deg_to_rad(theta_deg), gamma_from_snr_db(snr_db)};
    const BoundReport rep = bound_report(src, n);
    if (format == "csv") {
        std::ostringstream os;
        os << "K,theta_deg,snr_db,n,fisher_y,fisher_lb,chi,chi_db,pcrlb_rad2,pcrlb_deg2\n"
           << k << ',' << format_double(theta_deg) << ',' << format_double(snr_db) << ',' << n
           << ',' << format_double(rep.fisher_y) << ',' << format_double(rep.fisher_lb) << ','
           << format_double(rep.chi) << ',' << format_double(rep.chi_db) << ','
           << format_double(rep.pcrlb_rad2) << ',' << format_double(rep.pcrlb_deg2) << '\n';
        write_output(out, os.str());
    } else {
        nlohmann::json j{{"k", k},
                         {"theta_deg", theta_deg},
                         {"snr_db", snr_db},
                         {"n", n},
                         {"fisher_y", rep.fisher_y},
                         {"fisher_lb", rep.fisher_lb},
                         {"chi", rep.chi},
                         {"chi_db", rep.chi_db},
                         {"pcrlb_rad2", rep.pcrlb_rad2},
                         {"pcrlb_deg2", rep.pcrlb_deg2},
                         {"pcrlb_root_deg", std::sqrt(rep.pcrlb_deg2)},
                         {"gls_weights", rep.gls_weights}};
        write_output(out, j.dump(2) + "\n");
    }
    return 0;
}

// ---- simulate ----------------------------------------------------------------------

std::string summary_path_for(const std::string& csv_path) {
    const auto dot = csv_path.rfind('.');
    if (dot == std::string::npos || csv_path.substr(dot) != ".csv") return csv_path + ".json";
    return csv_path.substr(0, dot) + ".json";
}

int run_simulate(const ExperimentConfig& cfg, const std::string& out) {
    if (out.empty() || out == "-")
        throw std::invalid_argument("simulate needs a file path in --out");
    const RmseReport rep = run_rmse_experiment(cfg);
    const std::string summary_path = summary_path_for(out);
    write_output(out, simulate_csv(rep));
    write_output(summary_path, simulate_summary_json(rep, out));
    std::cout << "wrote " << out << " and " << summary_path << "\n"
              << "replay: doabound simulate --replay " << summary_path << " --out " << out
              << "\n";
    return 0;
}

// ---- orthant probe -------------------------------------------------------------------

int run_orthant(const std::vector<double>& rho, long long mc_samples, std::uint64_t seed,
                const std::string& out) {
    // input order is the strict-lower-triangle walk (2,1) (3,1) (4,1) (3,2) (4,2) (4,3)
    SymMatrix corr = SymMatrix::identity(4);
    const int pr[6] = {1, 2, 3, 2, 3, 3};
    const int pc[6] = {0, 0, 0, 1, 1, 2};
    for (int e = 0; e < 6; ++e) corr.set(pr[e], pc[e], rho[e]);

    const double p = orthant4(corr);
    std::array<double, 6> c6;
    for (int e = 0; e < 6; ++e) c6[e] = rho[e];
    double closure = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
        const std::array<int, 4> q = {(mask & 1) ? -1 : 1, (mask & 2) ? -1 : 1,
                                      (mask & 4) ? -1 : 1, (mask & 8) ? -1 : 1};
        closure += detail::orthant4_signed(c6, q, QuadPrecision::full);
    }

    nlohmann::json j{{"orthant4", p}, {"closure_sum", closure}};
    if (mc_samples > 0) {
        const CholeskyFactor f = spd_factor(corr);
        Rng rng(seed);
        long long hits = 0;
        for (long long s = 0; s < mc_samples; ++s) {
            double w[4];
            for (auto& v : w) v = rng.next_normal();
            bool all = true;
            for (int i = 0; i < 4 && all; ++i) {
                double y = 0.0;
                for (int k = 0; k <= i; ++k) y += f.at(i, k) * w[k];
                all = y > 0.0;
            }
            if (all) ++hits;
        }
        const double est = static_cast<double>(hits) / mc_samples;
        const double sigma = std::sqrt(std::max(est * (1.0 - est), 1e-12) / mc_samples);
        j["mc"] = {{"samples", mc_samples},
                   {"estimate", est},
                   {"std_error", sigma},
                   {"abs_diff", std::fabs(est - p)},
                   {"within_3_sigma", std::fabs(est - p) <= 3.0 * sigma}};
    }
    write_output(out, j.dump(2) + "\n");
    return 0;
}

// ---- selftest -----------------------------------------------------------------------

// Scales the moment pipeline so downstream checks must notice.
class CorruptedProvider : public MomentProvider {
  public:
    CorruptedProvider(int k, double gamma) : exact_(k, gamma) {}
    std::shared_ptr<const MomentEval> at(double theta_rad, QuadPrecision prec) const override {
        auto clean = exact_.at(theta_rad, prec);
        auto ev = std::make_shared<MomentEval>(*clean);
        for (auto& v : ev->mu) v *= 1.02;
        for (auto& v : ev->d_mu) v *= 1.02;
        return ev;
    }
    int statistic_count() const override { return exact_.statistic_count(); }

  private:
    ExactMomentProvider exact_;
};

int run_selftest(bool corrupt_arcsine) {
    const auto t_start = std::chrono::steady_clock::now();
    int failed_groups = 0;

    // group 1: information sandwich on a K=2 grid
    {
        bool ok = true;
        for (double theta_deg = -80.0; theta_deg <= 80.0; theta_deg += 20.0) {
            for (double snr_db : {-9.0, 0.0}) {
                const UlaSource src{2, deg_to_rad(theta_deg), gamma_from_snr_db(snr_db)};
                const CovariancePair cov = receive_covariance(src);
                QuantizedCovariance qc = arcsine_map(cov, src.gamma);
                if (corrupt_arcsine) {
                    for (int i = 0; i < 4; ++i)
                        for (int j = 0; j < i; ++j)
                            qc.d_sigma_z.set(i, j, 1.02 * qc.d_sigma_z(i, j));
                }
                const double fy = fisher_unquantized(cov);
                const auto [lb, w] = fisher_lower_bound(statistic_moments(qc));
                const double fz = fisher_exact_small(src);
                if (lb > fz + 1e-6 * fy || fz > fy * (1.0 + 1e-6)) ok = false;
            }
        }
        std::cout << "selftest sandwich (K=2 grid): " << (ok ? "pass" : "FAIL") << "\n";
        if (!ok) ++failed_groups;
    }

    // group 2: orthant closure over random correlation matrices
    {
        bool ok = true;
        Rng rng(12345);
        const int pr[6] = {1, 2, 3, 2, 3, 3};
        const int pc[6] = {0, 0, 0, 1, 1, 2};
        for (int trial = 0; trial < 20; ++trial) {
            double g[4][6];
            for (auto& row : g)
                for (auto& v : row) v = rng.next_normal();
            double d[4];
            for (int i = 0; i < 4; ++i) {
                double acc = 0.0;
                for (int k = 0; k < 6; ++k) acc += g[i][k] * g[i][k];
                d[i] = std::sqrt(acc);
            }
            std::array<double, 6> c6;
            for (int e = 0; e < 6; ++e) {
                double acc = 0.0;
                for (int k = 0; k < 6; ++k) acc += g[pr[e]][k] * g[pc[e]][k];
                c6[e] = acc / (d[pr[e]] * d[pc[e]]);
            }
            double sum = 0.0;
            for (int mask = 0; mask < 16; ++mask) {
                const std::array<int, 4> q = {(mask & 1) ? -1 : 1, (mask & 2) ? -1 : 1,
                                              (mask & 4) ? -1 : 1, (mask & 8) ? -1 : 1};
                sum += detail::orthant4_signed(c6, q, QuadPrecision::full);
            }
            if (std::fabs(sum - 1.0) > 1e-7) ok = false;
        }
        std::cout << "selftest orthant closure: " << (ok ? "pass" : "FAIL") << "\n";
        if (!ok) ++failed_groups;
    }

    // group 3: population fixed points of the conservative estimator
    {
        bool ok = true;
        Rng rng(999);
        for (int trial = 0; trial < 6; ++trial) {
            const int k = 2 + static_cast<int>(rng.next_u64() % 3);
            const double theta0 = deg_to_rad(-70.0 + 140.0 * rng.next_unit());
            const double gamma = 0.4 + 1.6 * rng.next_unit();
            const auto mu =
                statistic_moments(arcsine_map(receive_covariance({k, theta0, gamma}), gamma)).mu;
            EstimateResult res;
            if (corrupt_arcsine) {
                const CorruptedProvider provider(k, gamma);
                res = cmle(mu, provider);
            } else {
                res = cmle(mu, k, gamma);
            }
            if (!res.converged || std::fabs(res.theta_hat_rad - theta0) > 1e-6) ok = false;
        }
        std::cout << "selftest estimator fixed points: " << (ok ? "pass" : "FAIL") << "\n";
        if (!ok) ++failed_groups;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::cout << "selftest finished in " << format_double(wall) << " s, " << failed_groups
              << " group(s) failed\n";
    if (wall > 120.0) std::cerr << "warning: selftest exceeded the 120 s budget\n";
    return failed_groups;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pessimistic DOA performance bounds and estimation for 1-bit arrays"};
    app.set_config("--config", "", "flat key=value file mirroring the flags; flags win");
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand name

    int threads = std::max(1u, std::thread::hardware_concurrency());
    std::uint64_t seed = 0x1bda5eed;
    std::string out = "-";
    std::string format = "csv";
    app.add_option("--threads", threads, "worker threads for sweeps and runs");
    app.add_option("--seed", seed, "master seed for anything randomized");
    app.add_option("--out", out, "output path ('-' for stdout)");
    app.add_option("--format", format, "csv or json where applicable")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* loss = app.add_subcommand("loss", "quantization-loss sweep");
    LossArgs largs;
    loss->add_option("--var", largs.var, "sweep variable: snr, theta or k")->required();
    loss->add_option("--range", largs.range, "start:stop:step for snr (dB) or theta (deg)");
    loss->add_option("--list", largs.list, "K values, e.g. 2..8 or 2,4,8");
    loss->add_option("--k", largs.k, "sensor count when fixed");
    loss->add_option("--theta", largs.theta_deg, "DOA in degrees when fixed");
    loss->add_option("--snr", largs.snr_db, "SNR in dB when fixed");
    loss->add_flag("--allow-long", largs.allow_long, "permit K > 12 sweeps");

    auto* bound = app.add_subcommand("bound", "single-point bound report");
    int bk = 4, bn = 1000;
    double btheta = 5.0, bsnr = -3.0;
    bound->add_option("--k", bk, "sensor count");
    bound->add_option("--theta", btheta, "DOA in degrees");
    bound->add_option("--snr", bsnr, "SNR in dB");
    bound->add_option("--n", bn, "snapshot count for the PCRLB");

    auto* sim = app.add_subcommand("simulate", "RMSE vs pessimistic bound experiment");
    ExperimentConfig cfg;
    std::string snr_range, snr_list, estimator = "cmle", replay;
    sim->add_option("--k", cfg.sensor_count, "sensor count");
    sim->add_option("--theta", cfg.theta_deg, "true DOA in degrees");
    sim->add_option("--snr-range", snr_range, "start:stop:step in dB");
    sim->add_option("--snr-list", snr_list, "comma-separated SNRs in dB");
    sim->add_option("--n", cfg.snapshots, "snapshots per run");
    sim->add_option("--runs", cfg.runs, "independent runs per SNR point");
    sim->add_option("--estimator", estimator, "cmle or gaussian")
        ->check(CLI::IsMember({"cmle", "gaussian"}));
    sim->add_option("--grid-points", cfg.estimator.grid_points, "search grid size");
    sim->add_option("--replay", replay, "summary JSON of a previous run; overrides flags");

    auto* orth = app.add_subcommand("orthant", "quadrivariate orthant probe");
    std::vector<double> rho;
    long long mc_samples = 0;
    orth->add_option("rho", rho,
                     "6 correlations, lower triangle by columns: r21 r31 r41 r32 r42 r43")
        ->expected(6);
    orth->add_option("--mc", mc_samples, "Monte Carlo cross-check sample count");

    auto* self = app.add_subcommand("selftest", "sandwich, closure and fixed-point checks");
    bool corrupt_arcsine = false;
    self->add_flag("--corrupt-arcsine", corrupt_arcsine,
                   "negative control: perturb the quantized moments")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    try {
        if (*loss) return run_loss(largs, out, format, threads);
        if (*bound) return run_bound(bk, btheta, bsnr, bn, out, format);
        if (*sim) {
            if (!replay.empty()) {
                std::ifstream in(replay);
                if (!in) throw std::invalid_argument("cannot read replay file " + replay);
                std::stringstream ss;
                ss << in.rdbuf();
                cfg = parse_replay_config(ss.str());
                if (out == "-")
                    out = nlohmann::json::parse(ss.str()).value("csv_path", std::string("simulate.csv"));
            } else {
                if (!snr_range.empty())
                    cfg.snr_db_list = parse_range(snr_range);
                else if (!snr_list.empty())
                    cfg.snr_db_list = parse_double_list(snr_list);
                else
                    throw std::invalid_argument("simulate needs --snr-range or --snr-list");
                cfg.method = estimator == "gaussian" ? EstimatorMethod::gaussian_mle
                                                     : EstimatorMethod::cmle;
                cfg.master_seed = seed;
            }
            cfg.threads = threads;
            if (out == "-") out = "simulate.csv";
            return run_simulate(cfg, out);
        }
        if (*orth) return run_orthant(rho, mc_samples, seed, out);
        if (*self) return run_selftest(corrupt_arcsine);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidCorrelation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
