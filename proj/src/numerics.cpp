#include "doabound/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace doabound {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// One Cholesky attempt on s + jitter*I. Returns false on a non-positive pivot.
bool try_cholesky(const SymMatrix& s, double jitter, std::vector<double>& lower) {
    const int n = s.dim();
    lower.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = s(i, j) + (i == j ? jitter : 0.0);
            for (int k = 0; k < j; ++k)
                sum -= lower[static_cast<std::size_t>(i) * n + k] *
                       lower[static_cast<std::size_t>(j) * n + k];
            if (i == j) {
                if (!(sum > 0.0) || !std::isfinite(sum)) return false;
                lower[static_cast<std::size_t>(i) * n + i] = std::sqrt(sum);
            } else {
                lower[static_cast<std::size_t>(i) * n + j] =
                    sum / lower[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
    return true;
}

}  // namespace

void CholeskyFactor::forward_solve_in_place(std::vector<double>& x) const {
    for (int i = 0; i < dim; ++i) {
        double sum = x[i];
        for (int k = 0; k < i; ++k) sum -= at(i, k) * x[k];
        x[i] = sum / at(i, i);
    }
}

void CholeskyFactor::solve_in_place(std::vector<double>& x) const {
    forward_solve_in_place(x);
    for (int i = dim - 1; i >= 0; --i) {
        double sum = x[i];
        for (int k = i + 1; k < dim; ++k) sum -= at(k, i) * x[k];
        x[i] = sum / at(i, i);
    }
}

double CholeskyFactor::log_det() const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += std::log(at(i, i));
    return 2.0 * s;
}

CholeskyFactor spd_factor(const SymMatrix& s, double jitter) {
    if (jitter < 0.0) throw std::invalid_argument("spd_factor: jitter must be >= 0");
    CholeskyFactor f;
    f.dim = s.dim();
    double j = jitter;
    while (true) {
        if (try_cholesky(s, j, f.lower)) {
            f.jitter_used = j;
            return f;
        }
        if (j >= 1e-6) break;
        j = (j == 0.0) ? 1e-12 : j * 10.0;
        if (j > 1e-6) j = 1e-6;
    }
    throw NotPositiveDefinite("spd_factor: matrix not positive definite at max jitter 1e-6");
}

std::vector<double> spd_solve(const CholeskyFactor& f, const std::vector<double>& b) {
    if (static_cast<int>(b.size()) != f.dim)
        throw std::invalid_argument("spd_solve: dimension mismatch");
    std::vector<double> x = b;
    f.solve_in_place(x);
    return x;
}

std::vector<double> spd_solve(const SymMatrix& s, const std::vector<double>& b) {
    return spd_solve(spd_factor(s), b);
}

double brent_root(const std::function<double(double)>& f, double lo, double hi, double x_tol) {
    if (!(x_tol > 0.0)) throw std::invalid_argument("brent_root: x_tol must be positive");
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0)
        throw NoSignChange("brent_root: f(lo) and f(hi) have the same sign");

    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 0; iter < 200; ++iter) {
        if (std::fabs(fc) < std::fabs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol1 = 0.5 * x_tol + 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b);
        const double xm = 0.5 * (c - b);
        if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
        if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
            // inverse quadratic / secant step
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::fabs(p);
            const double min1 = 3.0 * xm * q - std::fabs(tol1 * q);
            const double min2 = std::fabs(e * q);
            if (2.0 * p < std::min(min1, min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::fabs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    return b;
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

NormalEval std_normal(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("std_normal: x must be finite");
    return {std_normal_pdf(x), std_normal_cdf(x)};
}

}  // namespace doabound
