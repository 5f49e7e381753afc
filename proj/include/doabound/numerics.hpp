#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace doabound {

// ---- error types -----------------------------------------------------------

class NotPositiveDefinite : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class MaxDepthExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NoSignChange : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidCorrelation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionTooLarge : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NormalizationFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DegenerateModel : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ---- dense symmetric matrix -------------------------------------------------

/// Dense symmetric matrix. Writes through set() always land on both (i,j) and
/// (j,i), so stored symmetry is exact by construction.
class SymMatrix {
  public:
    SymMatrix() = default;
    explicit SymMatrix(int dim) : dim_(dim), a_(static_cast<std::size_t>(dim) * dim, 0.0) {
        if (dim < 0) throw std::invalid_argument("SymMatrix: negative dimension");
    }

    static SymMatrix identity(int dim) {
        SymMatrix s(dim);
        for (int i = 0; i < dim; ++i) s.a_[idx(i, i, dim)] = 1.0;
        return s;
    }

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[idx(i, j, dim_)]; }

    void set(int i, int j, double v) {
        a_[idx(i, j, dim_)] = v;
        a_[idx(j, i, dim_)] = v;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::fabs(v));
        return m;
    }

    const std::vector<double>& data() const { return a_; }

  private:
    static std::size_t idx(int i, int j, int dim) {
        return static_cast<std::size_t>(i) * dim + j;
    }
    int dim_ = 0;
    std::vector<double> a_;
};

// ---- SPD factorization / solves --------------------------------------------

/// Lower-triangular Cholesky factor of S + jitter*I. jitter_used records the
/// diagonal shift that finally succeeded on the 0 -> 1e-12 -> ... -> 1e-6
/// escalation ladder.
struct CholeskyFactor {
    int dim = 0;
    std::vector<double> lower;  // row-major, entries above the diagonal are zero
    double jitter_used = 0.0;

    double at(int i, int j) const { return lower[static_cast<std::size_t>(i) * dim + j]; }

    /// Solves (L L^T) x = b in place.
    void solve_in_place(std::vector<double>& x) const;

    /// Forward substitution only: solves L y = b in place.
    void forward_solve_in_place(std::vector<double>& x) const;

    double log_det() const;  // of L L^T
};

CholeskyFactor spd_factor(const SymMatrix& s, double jitter = 0.0);
std::vector<double> spd_solve(const SymMatrix& s, const std::vector<double>& b);
std::vector<double> spd_solve(const CholeskyFactor& f, const std::vector<double>& b);

// ---- adaptive quadrature ----------------------------------------------------

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 40;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes/weights on [-1, 1], positive half (QUADPACK dqk15).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
inline void gk15_panel(F&& f, double a, double b, double& kronrod, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGk15Nodes[i]);
        fv[14 - i] = f(c + h * kGk15Nodes[i]);
    }
    fv[7] = f(c);
    double resk = kGk15WeightsK[7] * fv[7];
    double resg = kGk15WeightsG[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        resk += kGk15WeightsK[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) resg += kGk15WeightsG[i / 2] * (fv[i] + fv[14 - i]);
    }
    kronrod = resk * h;
    err = std::fabs((resk - resg) * h);
}

template <class F>
double quad_recurse(F&& f, double a, double b, double tol, int depth, int max_depth) {
    double value, err;
    gk15_panel(f, a, b, value, err);
    if (err <= tol || !(b - a > 0.0)) return value;
    if (depth >= max_depth)
        throw MaxDepthExceeded("quad_adaptive: refinement budget exhausted at depth " +
                               std::to_string(depth));
    const double c = 0.5 * (a + b);
    return quad_recurse(f, a, c, 0.5 * tol, depth + 1, max_depth) +
           quad_recurse(f, c, b, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 15(7) with bisection. The error target is
/// max(abs_tol, rel_tol * |first whole-interval estimate|), split evenly
/// across subpanels. Throws MaxDepthExceeded when a panel at max_depth still
/// misses its share of the tolerance.
template <class F>
double quad_adaptive(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
    if (!(spec.abs_tol > 0.0) || !(spec.rel_tol > 0.0))
        throw std::invalid_argument("quad_adaptive: tolerances must be positive");
    if (a == b) return 0.0;
    double value, err;
    detail::gk15_panel(f, a, b, value, err);
    const double tol = std::max(spec.abs_tol, spec.rel_tol * std::fabs(value));
    if (err <= tol) return value;
    const double c = 0.5 * (a + b);
    return detail::quad_recurse(f, a, c, 0.5 * tol, 1, spec.max_depth) +
           detail::quad_recurse(f, c, b, 0.5 * tol, 1, spec.max_depth);
}

// ---- bracketed root finding -------------------------------------------------

/// Brent's method. Requires f(lo) * f(hi) <= 0; converges for continuous f.
/// Returns a point whose enclosing bracket has width <= x_tol.
double brent_root(const std::function<double(double)>& f, double lo, double hi, double x_tol);

// ---- standard normal --------------------------------------------------------

struct NormalEval {
    double pdf;
    double cdf;
};

NormalEval std_normal(double x);
double std_normal_cdf(double x);
double std_normal_pdf(double x);

}  // namespace doabound
