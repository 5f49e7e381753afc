#include "doabound/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <unordered_map>

namespace doabound {

namespace {

constexpr double kFlatTol = 1e-10;

std::shared_ptr<const MomentEval> build_moment_eval(int sensor_count, double gamma,
                                                    double theta_rad, QuadPrecision prec) {
    UlaSource src{sensor_count, theta_rad, gamma};
    const QuantizedCovariance qc = arcsine_map(receive_covariance(src), gamma);
    auto ev = std::make_shared<MomentEval>();
    StatisticMoments sm = statistic_moments(qc, prec);
    ev->mu = std::move(sm.mu);
    ev->d_mu = std::move(sm.d_mu);
    ev->r = std::move(sm.r);
    ev->r_factor = spd_factor(ev->r);
    return ev;
}

double gls_objective(const MomentEval& ev, const std::vector<double>& phi_tilde) {
    std::vector<double> y(phi_tilde.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = phi_tilde[i] - ev.mu[i];
    ev.r_factor.forward_solve_in_place(y);
    double q = 0.0;
    for (double v : y) q += v * v;
    return q;
}

double gls_score(const MomentEval& ev, const std::vector<double>& phi_tilde) {
    std::vector<double> x(phi_tilde.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = phi_tilde[i] - ev.mu[i];
    ev.r_factor.solve_in_place(x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += ev.d_mu[i] * x[i];
    return s;
}

double golden_min(const std::function<double(double)>& f, double lo, double hi, double x_tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > x_tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

std::vector<double> sample_statistics(const BitSnapshots& z) {
    if (z.m < 1 || z.n < 1) throw std::invalid_argument("sample_statistics: empty snapshots");
    const PairIndex pi(z.m);
    std::vector<long long> acc(pi.count(), 0);
    for (int col = 0; col < z.n; ++col) {
        const std::int8_t* v = z.z.data() + static_cast<std::size_t>(col) * z.m;
        int l = 0;
        for (int j = 0; j < z.m; ++j)
            for (int i = j + 1; i < z.m; ++i) acc[l++] += v[i] * v[j];
    }
    std::vector<double> phi(pi.count());
    for (int l = 0; l < pi.count(); ++l) phi[l] = static_cast<double>(acc[l]) / z.n;
    return phi;
}

// ---- providers ---------------------------------------------------------------

ExactMomentProvider::ExactMomentProvider(int sensor_count, double gamma)
    : sensor_count_(sensor_count), gamma_(gamma) {
    if (sensor_count < 1) throw std::invalid_argument("ExactMomentProvider: K must be >= 1");
    const int m = 2 * sensor_count;
    count_ = m * (m - 1) / 2;
}

std::shared_ptr<const MomentEval> ExactMomentProvider::at(double theta_rad,
                                                          QuadPrecision prec) const {
    return build_moment_eval(sensor_count_, gamma_, theta_rad, prec);
}

struct TabulatedMomentProvider::Impl {
    int sensor_count = 0;
    double gamma = 0.0;
    double panel_width_rad = 0.0;
    int degree = 0;
    int count = 0;  // L

    // One Chebyshev fit of all raw moment components (mu, d_mu, lower
    // triangle of R) over [lo, hi].
    struct Panel {
        double lo = 0.0, hi = 0.0;
        int degree = 0;
        int fun_count = 0;
        std::vector<double> coef;  // fun_count x (degree + 1)

        void eval(double theta, double* out) const {
            const double x = std::clamp(2.0 * (theta - lo) / (hi - lo) - 1.0, -1.0, 1.0);
            for (int f = 0; f < fun_count; ++f) {
                const double* c = coef.data() + static_cast<std::size_t>(f) * (degree + 1);
                double b1 = 0.0, b2 = 0.0;
                for (int d = degree; d >= 1; --d) {
                    const double b0 = 2.0 * x * b1 - b2 + c[d];
                    b2 = b1;
                    b1 = b0;
                }
                out[f] = x * b1 - b2 + c[0];
            }
        }
    };

    using PanelFuture = std::shared_future<std::shared_ptr<const Panel>>;
    using PointFuture = std::shared_future<std::shared_ptr<const MomentEval>>;

    mutable std::mutex mu;
    mutable std::map<long, PanelFuture> panels;
    mutable std::unordered_map<std::uint64_t, PointFuture> points;

    int fun_count() const { return 2 * count + count * (count + 1) / 2; }

    void pack(const MomentEval& ev, double* out) const {
        int f = 0;
        for (int l = 0; l < count; ++l) out[f++] = ev.mu[l];
        for (int l = 0; l < count; ++l) out[f++] = ev.d_mu[l];
        for (int l = 0; l < count; ++l)
            for (int m2 = 0; m2 <= l; ++m2) out[f++] = ev.r(l, m2);
    }

    std::shared_ptr<const MomentEval> unpack(const double* in) const {
        auto ev = std::make_shared<MomentEval>();
        ev->mu.assign(in, in + count);
        ev->d_mu.assign(in + count, in + 2 * count);
        ev->r = SymMatrix(count);
        int f = 2 * count;
        for (int l = 0; l < count; ++l)
            for (int m2 = 0; m2 <= l; ++m2) ev->r.set(l, m2, in[f++]);
        ev->r_factor = spd_factor(ev->r);
        return ev;
    }

    std::shared_ptr<const Panel> build_panel(long index) const {
        auto panel = std::make_shared<Panel>();
        panel->lo = index * panel_width_rad;
        panel->hi = (index + 1) * panel_width_rad;
        panel->degree = degree;
        panel->fun_count = fun_count();
        const int nodes = degree + 1;
        const double mid = 0.5 * (panel->lo + panel->hi);
        const double half = 0.5 * (panel->hi - panel->lo);

        std::vector<double> vals(static_cast<std::size_t>(nodes) * panel->fun_count);
        for (int jn = 0; jn < nodes; ++jn) {
            const double x = std::cos(kPi * jn / degree);
            const double theta = mid + half * x;
            auto ev = build_moment_eval(sensor_count, gamma, theta, QuadPrecision::full);
            pack(*ev, vals.data() + static_cast<std::size_t>(jn) * panel->fun_count);
        }

        // First-kind coefficients from the Lobatto grid.
        panel->coef.assign(static_cast<std::size_t>(panel->fun_count) * nodes, 0.0);
        for (int d = 0; d < nodes; ++d) {
            for (int jn = 0; jn < nodes; ++jn) {
                double w = std::cos(kPi * d * jn / degree);
                if (jn == 0 || jn == degree) w *= 0.5;
                for (int f = 0; f < panel->fun_count; ++f)
                    panel->coef[static_cast<std::size_t>(f) * nodes + d] +=
                        w * vals[static_cast<std::size_t>(jn) * panel->fun_count + f];
            }
        }
        const double norm = 2.0 / degree;
        for (int f = 0; f < panel->fun_count; ++f) {
            double* c = panel->coef.data() + static_cast<std::size_t>(f) * nodes;
            for (int d = 0; d < nodes; ++d) c[d] *= norm;
            c[0] *= 0.5;
            c[degree] *= 0.5;
        }

        // Certify against the exact pipeline at two off-node angles.
        double scale = 1.0;
        for (double v : vals) scale = std::max(scale, std::fabs(v));
        std::vector<double> fit(panel->fun_count), exact(panel->fun_count);
        for (double frac : {0.3819660112501051, 0.7861513777574233}) {
            const double theta = panel->lo + frac * (panel->hi - panel->lo);
            panel->eval(theta, fit.data());
            auto ev = build_moment_eval(sensor_count, gamma, theta, QuadPrecision::full);
            pack(*ev, exact.data());
            for (int f = 0; f < panel->fun_count; ++f) {
                if (std::fabs(fit[f] - exact[f]) > 5e-8 * scale)
                    throw std::runtime_error(
                        "TabulatedMomentProvider: panel certification failed");
            }
        }
        return panel;
    }
};

TabulatedMomentProvider::TabulatedMomentProvider(int sensor_count, double gamma,
                                                 double panel_width_deg, int cheb_degree)
    : impl_(std::make_unique<Impl>()) {
    if (sensor_count < 1) throw std::invalid_argument("TabulatedMomentProvider: K must be >= 1");
    if (cheb_degree < 2 || panel_width_deg <= 0.0)
        throw std::invalid_argument("TabulatedMomentProvider: bad panel configuration");
    impl_->sensor_count = sensor_count;
    impl_->gamma = gamma;
    impl_->panel_width_rad = deg_to_rad(panel_width_deg);
    impl_->degree = cheb_degree;
    const int m = 2 * sensor_count;
    impl_->count = m * (m - 1) / 2;
}

TabulatedMomentProvider::~TabulatedMomentProvider() = default;

int TabulatedMomentProvider::statistic_count() const { return impl_->count; }

std::shared_ptr<const MomentEval> TabulatedMomentProvider::at(double theta_rad,
                                                              QuadPrecision prec) const {
    Impl& im = *impl_;
    if (prec == QuadPrecision::coarse) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &theta_rad, sizeof(bits));

        std::promise<std::shared_ptr<const MomentEval>> prom;
        Impl::PointFuture fut;
        bool builder = false;
        {
            std::lock_guard<std::mutex> lock(im.mu);
            auto it = im.points.find(bits);
            if (it == im.points.end()) {
                fut = prom.get_future().share();
                im.points.emplace(bits, fut);
                builder = true;
            } else {
                fut = it->second;
            }
        }
        if (builder) {
            try {
                prom.set_value(
                    build_moment_eval(im.sensor_count, im.gamma, theta_rad, QuadPrecision::coarse));
            } catch (...) {
                prom.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

    const long index = static_cast<long>(std::floor(theta_rad / im.panel_width_rad));
    std::promise<std::shared_ptr<const Impl::Panel>> prom;
    Impl::PanelFuture fut;
    bool builder = false;
    {
        std::lock_guard<std::mutex> lock(im.mu);
        auto it = im.panels.find(index);
        if (it == im.panels.end()) {
            fut = prom.get_future().share();
            im.panels.emplace(index, fut);
            builder = true;
        } else {
            fut = it->second;
        }
    }
    if (builder) {
        try {
            prom.set_value(im.build_panel(index));
        } catch (...) {
            prom.set_exception(std::current_exception());
        }
    }
    auto panel = fut.get();
    std::vector<double> packed(im.fun_count());
    panel->eval(theta_rad, packed.data());
    return im.unpack(packed.data());
}

// ---- estimators --------------------------------------------------------------

namespace {

EstimateResult grid_then_refine_cmle(const std::vector<double>& phi_tilde,
                                     const MomentProvider& moments,
                                     const EstimatorOptions& opts) {
    if (opts.grid_points < 3) throw std::invalid_argument("cmle: grid_points must be >= 3");
    if (static_cast<int>(phi_tilde.size()) != moments.statistic_count())
        throw std::invalid_argument("cmle: phi_tilde length does not match the model");

    const double lo = deg_to_rad(opts.theta_min_deg);
    const double hi = deg_to_rad(opts.theta_max_deg);
    const int g = opts.grid_points;
    const double step = (hi - lo) / (g - 1);

    int g_star = 0;
    double q_min = 0.0, q_max = 0.0;
    for (int i = 0; i < g; ++i) {
        const double theta = lo + i * step;
        const double q = gls_objective(*moments.at(theta, QuadPrecision::coarse), phi_tilde);
        if (i == 0 || q < q_min) {
            q_min = q;
            g_star = i;
        }
        if (i == 0 || q > q_max) q_max = q;
    }

    EstimateResult res;
    res.method = EstimatorMethod::cmle;
    res.grid_minimum_deg = rad_to_deg(lo + g_star * step);

    // Flat objective (gamma = 0 data): nothing to refine.
    if (q_max - q_min <= kFlatTol * std::max(1.0, q_max)) {
        res.theta_hat_rad = lo + g_star * step;
        res.objective_at_solution = q_min;
        res.converged = false;
        return res;
    }

    const double b_lo = lo + std::max(0, g_star - 1) * step;
    const double b_hi = lo + std::min(g - 1, g_star + 1) * step;

    auto score = [&](double theta) {
        return gls_score(*moments.at(theta, QuadPrecision::full), phi_tilde);
    };
    const double s_lo = score(b_lo);
    const double s_hi = score(b_hi);

    if (s_lo * s_hi <= 0.0 && !(s_lo == 0.0 && s_hi == 0.0)) {
        res.theta_hat_rad = brent_root(score, b_lo, b_hi, opts.x_tol_rad);
        res.root_bracket = std::make_pair(b_lo, b_hi);
        res.converged = true;
    } else {
        auto objective = [&](double theta) {
            return gls_objective(*moments.at(theta, QuadPrecision::full), phi_tilde);
        };
        res.theta_hat_rad = golden_min(objective, b_lo, b_hi, opts.x_tol_rad);
        res.converged = false;
    }
    res.objective_at_solution =
        gls_objective(*moments.at(res.theta_hat_rad, QuadPrecision::full), phi_tilde);
    return res;
}

}  // namespace

EstimateResult cmle(const std::vector<double>& phi_tilde, const MomentProvider& moments,
                    const EstimatorOptions& opts) {
    return grid_then_refine_cmle(phi_tilde, moments, opts);
}

EstimateResult cmle(const std::vector<double>& phi_tilde, int sensor_count, double gamma,
                    const EstimatorOptions& opts) {
    ExactMomentProvider provider(sensor_count, gamma);
    return grid_then_refine_cmle(phi_tilde, provider, opts);
}

EstimateResult gaussian_mle(const SymMatrix& sample_cov, int sensor_count, double gamma,
                            const EstimatorOptions& opts) {
    const int m = 2 * sensor_count;
    if (sample_cov.dim() != m)
        throw std::invalid_argument("gaussian_mle: sample covariance dimension mismatch");
    if (opts.grid_points < 3)
        throw std::invalid_argument("gaussian_mle: grid_points must be >= 3");

    auto objective = [&](double theta) {
        UlaSource src{sensor_count, theta, gamma};
        const CovariancePair cov = receive_covariance(src);
        const CholeskyFactor f = spd_factor(cov.sigma_y);
        double tr = 0.0;
        std::vector<double> col(m);
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < m; ++i) col[i] = sample_cov(i, j);
            f.solve_in_place(col);
            tr += col[j];
        }
        return f.log_det() + tr;
    };

    const double lo = deg_to_rad(opts.theta_min_deg);
    const double hi = deg_to_rad(opts.theta_max_deg);
    const int g = opts.grid_points;
    const double step = (hi - lo) / (g - 1);

    int g_star = 0;
    double f_min = 0.0, f_max = 0.0;
    for (int i = 0; i < g; ++i) {
        const double v = objective(lo + i * step);
        if (i == 0 || v < f_min) {
            f_min = v;
            g_star = i;
        }
        if (i == 0 || v > f_max) f_max = v;
    }

    EstimateResult res;
    res.method = EstimatorMethod::gaussian_mle;
    res.grid_minimum_deg = rad_to_deg(lo + g_star * step);

    if (f_max - f_min <= kFlatTol * std::max(1.0, std::fabs(f_max))) {
        res.theta_hat_rad = lo + g_star * step;
        res.objective_at_solution = f_min;
        res.converged = false;
        return res;
    }

    const double b_lo = lo + std::max(0, g_star - 1) * step;
    const double b_hi = lo + std::min(g - 1, g_star + 1) * step;
    res.theta_hat_rad = golden_min(objective, b_lo, b_hi, opts.x_tol_rad);
    res.root_bracket = std::make_pair(b_lo, b_hi);
    res.objective_at_solution = objective(res.theta_hat_rad);
    res.converged = true;
    return res;
}

}  // namespace doabound
