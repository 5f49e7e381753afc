#include "doabound/quantized_moments.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <unordered_map>

namespace doabound {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;
constexpr double kRhoMax = 1.0 - 1e-12;      // correlation clamp
constexpr double kTailCut = 8.5;             // +-8.5 sigma truncation, tail < 1e-16
constexpr double kKeyScale = 1e14;           // cache key rounding

double clamp_rho(double r) { return std::clamp(r, -kRhoMax, kRhoMax); }

// ---- orthant memo cache -----------------------------------------------------

struct OrthantKey {
    std::array<std::int64_t, 6> q;
    std::uint8_t prec;
    bool operator==(const OrthantKey& o) const { return q == o.q && prec == o.prec; }
};

struct OrthantKeyHash {
    std::size_t operator()(const OrthantKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : k.q) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        h ^= k.prec;
        h *= 1099511628211ull;
        return static_cast<std::size_t>(h);
    }
};

struct OrthantCache {
    static constexpr int kShards = 16;
    struct Shard {
        std::mutex mu;
        std::unordered_map<OrthantKey, double, OrthantKeyHash> map;
    };
    Shard shards[kShards];

    Shard& shard_for(const OrthantKey& k) {
        return shards[OrthantKeyHash{}(k) % kShards];
    }
};

OrthantCache& orthant_cache() {
    static OrthantCache cache;
    return cache;
}

// All 24 permutations of {0,1,2,3}.
constexpr int kPerms[24][4] = {
    {0, 1, 2, 3}, {0, 1, 3, 2}, {0, 2, 1, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {0, 3, 2, 1},
    {1, 0, 2, 3}, {1, 0, 3, 2}, {1, 2, 0, 3}, {1, 2, 3, 0}, {1, 3, 0, 2}, {1, 3, 2, 0},
    {2, 0, 1, 3}, {2, 0, 3, 1}, {2, 1, 0, 3}, {2, 1, 3, 0}, {2, 3, 0, 1}, {2, 3, 1, 0},
    {3, 0, 1, 2}, {3, 0, 2, 1}, {3, 1, 0, 2}, {3, 1, 2, 0}, {3, 2, 0, 1}, {3, 2, 1, 0}};

// Lower-triangle pair order shared with PairIndex(4).
constexpr int kPairRow[6] = {1, 2, 3, 2, 3, 3};
constexpr int kPairCol[6] = {0, 0, 0, 1, 1, 2};

// The orthant probability is invariant under simultaneous row/column
// permutations, so hash and evaluate on the lexicographically smallest
// rounded 6-tuple. Computing on the rounded values keeps results identical
// no matter which caller populates the cache first.
void canonicalize(const std::array<double, 6>& corr, std::array<std::int64_t, 6>& key,
                  std::array<double, 6>& canon) {
    double m[4][4] = {};
    for (int e = 0; e < 6; ++e) {
        m[kPairRow[e]][kPairCol[e]] = corr[e];
        m[kPairCol[e]][kPairRow[e]] = corr[e];
    }
    bool first = true;
    for (const auto& p : kPerms) {
        std::array<std::int64_t, 6> cand;
        for (int e = 0; e < 6; ++e)
            cand[e] = std::llround(m[p[kPairRow[e]]][p[kPairCol[e]]] * kKeyScale);
        if (first || cand < key) {
            key = cand;
            first = false;
        }
    }
    for (int e = 0; e < 6; ++e) canon[e] = static_cast<double>(key[e]) / kKeyScale;
}

void validate_psd(const std::array<double, 6>& corr) {
    SymMatrix s = SymMatrix::identity(4);
    for (int e = 0; e < 6; ++e) s.set(kPairRow[e], kPairCol[e], corr[e]);
    try {
        spd_factor(s);
    } catch (const NotPositiveDefinite&) {
        throw InvalidCorrelation("orthant4: correlation matrix not PSD within the jitter ladder");
    }
}

QuadratureSpec path_tol_for(QuadPrecision prec) {
    if (prec == QuadPrecision::full) return {1e-9, 1e-13, 44};
    return {2e-7, 1e-12, 44};
}

// Unordered index pairs of {0,1,2,3}, each with its complementary pair, and
// the position of every correlation inside the 6-tuple layout.
struct PairTerm {
    int ij;        // correlation index of the differentiated pair (i, j)
    int kl;        // correlation index of the complementary pair (k, l)
    int ki, kj;    // correlation indices (k, i) and (k, j)
    int li, lj;    // correlation indices (l, i) and (l, j)
};

// 6-tuple layout: 0:(1,0) 1:(2,0) 2:(3,0) 3:(2,1) 4:(3,1) 5:(3,2)
constexpr PairTerm kPairTerms[6] = {
    // (i,j) = (1,0), (k,l) = (2,3)
    {0, 5, 3, 1, 4, 2},
    // (i,j) = (2,0), (k,l) = (1,3)
    {1, 4, 3, 0, 5, 2},
    // (i,j) = (3,0), (k,l) = (1,2)
    {2, 3, 4, 0, 5, 1},
    // (i,j) = (2,1), (k,l) = (0,3)
    {3, 2, 1, 0, 5, 4},
    // (i,j) = (3,1), (k,l) = (0,2)
    {4, 1, 2, 0, 5, 3},
    // (i,j) = (3,2), (k,l) = (0,1)
    {5, 0, 2, 1, 4, 3},
};

// Positive orthant probability by differentiating along the correlation path
// R(t) = (1 - t) I + t R. For zero thresholds the derivative with respect to
// one correlation is the bivariate normal density at the origin times the
// conditional bivariate orthant of the remaining two components, which is
// closed form (1/4 + arcsin / 2pi). The result is 1/16 plus a single smooth
// one-dimensional integral over t.
double orthant4_raw(const std::array<double, 6>& c, QuadPrecision prec) {
    auto integrand = [&c](double t) -> double {
        double sum = 0.0;
        for (const PairTerm& pt : kPairTerms) {
            const double rho = c[pt.ij];
            if (rho == 0.0) continue;
            const double r = t * rho;
            const double d = std::max(1.0 - r * r, 4e-13);
            // Conditional correlation of (k, l) given (i, j) at R(t).
            const double vki = t * c[pt.ki], vkj = t * c[pt.kj];
            const double vli = t * c[pt.li], vlj = t * c[pt.lj];
            const double qkl = (vki * vli + vkj * vlj - r * (vki * vlj + vkj * vli)) / d;
            const double qkk = (vki * vki + vkj * vkj - 2.0 * r * vki * vkj) / d;
            const double qll = (vli * vli + vlj * vlj - 2.0 * r * vli * vlj) / d;
            const double cov = t * c[pt.kl] - qkl;
            const double var = std::max((1.0 - qkk) * (1.0 - qll), 1e-24);
            const double cc = std::clamp(cov / std::sqrt(var), -1.0, 1.0);
            sum += rho / (kTwoPi * std::sqrt(d)) * (0.25 + std::asin(cc) / kTwoPi);
        }
        return sum;
    };
    const double p = 1.0 / 16.0 + quad_adaptive(integrand, 0.0, 1.0, path_tol_for(prec));
    return std::clamp(p, 0.0, 1.0);
}

// Sequential-conditioning evaluator, retained as an independent cross-check
// of orthant4_raw: outer quadrature over the first coordinate, trivariate
// conditional orthant as a one-dimensional integral of a shifted bivariate
// normal CDF. Costs milliseconds per call, so tests use it, the hot path
// does not.
double orthant4_conditioning_raw(const std::array<double, 6>& c) {
    const double b1 = c[0], b2 = c[1], b3 = c[2];
    const double r21 = c[3], r31 = c[4], r32 = c[5];

    const double s1 = std::sqrt(std::max(1.0 - b1 * b1, 1e-24));
    const double s2 = std::sqrt(std::max(1.0 - b2 * b2, 1e-24));
    const double s3 = std::sqrt(std::max(1.0 - b3 * b3, 1e-24));

    // Conditional correlations of (1,2,3) given variable 0.
    const double c21 = std::clamp((r21 - b1 * b2) / (s1 * s2), -1.0, 1.0);
    const double c31 = std::clamp((r31 - b1 * b3) / (s1 * s3), -1.0, 1.0);
    const double c32 = std::clamp((r32 - b2 * b3) / (s2 * s3), -1.0, 1.0);

    // Second conditioning on the standardized variable 1.
    const double t2 = std::sqrt(std::max(1.0 - c21 * c21, 1e-24));
    const double t3 = std::sqrt(std::max(1.0 - c31 * c31, 1e-24));
    const double r_inner = std::clamp((c32 - c21 * c31) / (t2 * t3), -1.0, 1.0);

    const QuadratureSpec inner_spec{8e-10, 1e-13, 40};
    const QuadratureSpec outer_spec{6e-10, 1e-13, 40};

    auto trivariate = [&](double t) -> double {
        const double a1 = -b1 * t / s1;
        const double a2 = -b2 * t / s2;
        const double a3 = -b3 * t / s3;
        if (a1 >= kTailCut) return 0.0;
        auto inner = [&](double s) -> double {
            const double h2 = (a2 - c21 * s) / t2;
            const double h3 = (a3 - c31 * s) / t3;
            return std_normal_pdf(s) * detail::bvn_upper(h2, h3, r_inner);
        };
        return quad_adaptive(inner, std::max(a1, -kTailCut), kTailCut, inner_spec);
    };

    auto outer = [&](double t) -> double { return std_normal_pdf(t) * trivariate(t); };
    const double p = quad_adaptive(outer, 0.0, kTailCut, outer_spec);
    return std::clamp(p, 0.0, 1.0);
}

double orthant4_cached(const std::array<double, 6>& corr, QuadPrecision prec) {
    std::array<double, 6> clamped;
    for (int e = 0; e < 6; ++e) clamped[e] = clamp_rho(corr[e]);

    std::array<std::int64_t, 6> key;
    std::array<double, 6> canon;
    canonicalize(clamped, key, canon);

    OrthantCache& cache = orthant_cache();
    const OrthantKey okey{key, static_cast<std::uint8_t>(prec)};
    auto& shard = cache.shard_for(okey);
    {
        std::lock_guard<std::mutex> lock(shard.mu);
        auto it = shard.map.find(okey);
        if (it != shard.map.end()) return it->second;
    }

    validate_psd(canon);
    const double value = orthant4_raw(canon, prec);
    {
        std::lock_guard<std::mutex> lock(shard.mu);
        shard.map.emplace(okey, value);
    }
    return value;
}

}  // namespace

// ---- public surface ---------------------------------------------------------

PairIndex::PairIndex(int m) : m_(m) {
    if (m < 1) throw std::invalid_argument("PairIndex: M must be >= 1");
    pairs_.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (int j = 0; j < m; ++j)
        for (int i = j + 1; i < m; ++i) pairs_.emplace_back(i, j);
}

int PairIndex::index(int i, int j) const {
    if (i == j || i < 0 || j < 0 || i >= m_ || j >= m_)
        throw std::invalid_argument("PairIndex: bad pair");
    if (i < j) std::swap(i, j);
    // column j holds (m_-1-j) entries; entries for columns < j come first
    int before = j * (m_ - 1) - j * (j - 1) / 2;
    return before + (i - j - 1);
}

QuantizedCovariance arcsine_map(const CovariancePair& cov, double gamma) {
    const int m = cov.sigma_y.dim();
    const double denom = gamma * gamma + 1.0;
    for (int i = 0; i < m; ++i) {
        if (std::fabs(cov.sigma_y(i, i) - denom) > 1e-9 * denom)
            throw std::invalid_argument("arcsine_map: sigma_y diagonal must equal gamma^2 + 1");
    }

    QuantizedCovariance qc{SymMatrix(m), SymMatrix(m), SymMatrix(m)};
    for (int i = 0; i < m; ++i) {
        qc.sigma_z.set(i, i, 1.0);
        qc.d_sigma_z.set(i, i, 0.0);
        qc.rho.set(i, i, 1.0);
        for (int j = 0; j < i; ++j) {
            const double rho = clamp_rho(cov.sigma_y(i, j) / denom);
            qc.rho.set(i, j, rho);
            qc.sigma_z.set(i, j, (2.0 / kPi) * std::asin(rho));
            qc.d_sigma_z.set(i, j, 2.0 * cov.d_sigma_y(i, j) /
                                       (kPi * denom * std::sqrt(1.0 - rho * rho)));
        }
    }
    return qc;
}

double orthant2(double rho) {
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("orthant2: |rho| must be <= 1");
    return 0.25 + std::asin(rho) / kTwoPi;
}

double orthant4(const SymMatrix& corr) {
    if (corr.dim() != 4) throw std::invalid_argument("orthant4: expected a 4x4 matrix");
    std::array<double, 6> c;
    for (int e = 0; e < 6; ++e) {
        const double v = corr(kPairRow[e], kPairCol[e]);
        if (!(std::fabs(v) <= 1.0 + 1e-9))
            throw InvalidCorrelation("orthant4: off-diagonal entry outside [-1, 1]");
        c[e] = v;
    }
    for (int i = 0; i < 4; ++i)
        if (std::fabs(corr(i, i) - 1.0) > 1e-12)
            throw InvalidCorrelation("orthant4: diagonal must be 1");
    return orthant4_cached(c, QuadPrecision::full);
}

double quartic_moment(int i, int j, int k, int l, const QuantizedCovariance& qc) {
    return quartic_moment(i, j, k, l, qc, QuadPrecision::full);
}

double quartic_moment(int i, int j, int k, int l, const QuantizedCovariance& qc,
                      QuadPrecision prec) {
    const int m = qc.sigma_z.dim();
    const int id[4] = {i, j, k, l};
    for (int a : id)
        if (a < 0 || a >= m) throw std::invalid_argument("quartic_moment: index out of range");

    int sorted[4] = {i, j, k, l};
    std::sort(sorted, sorted + 4);
    const bool e01 = sorted[0] == sorted[1];
    const bool e12 = sorted[1] == sorted[2];
    const bool e23 = sorted[2] == sorted[3];
    const int distinct = 4 - (e01 ? 1 : 0) - (e12 ? 1 : 0) - (e23 ? 1 : 0);

    if (distinct == 1) return 1.0;
    if (distinct == 2) {
        // {2,2}: indices pair up completely. {3,1}: the cubed sign collapses,
        // leaving the covariance of the two distinct values.
        if (e01 && e23) return 1.0;
        const int a = sorted[0];
        const int b = sorted[3];
        return qc.sigma_z(a, b);
    }
    if (distinct == 3) {
        // One index appears twice; its square is 1, leaving the two singletons.
        int single[2];
        int n = 0;
        for (int a = 0; a < 4;) {
            int b = a;
            while (b < 4 && sorted[b] == sorted[a]) ++b;
            if (b - a == 1) single[n++] = sorted[a];
            a = b;
        }
        return qc.sigma_z(single[0], single[1]);
    }

    // All distinct: signed sum over the 8 orthants with q_1 = +1, doubled.
    std::array<double, 6> base;
    for (int e = 0; e < 6; ++e) base[e] = qc.rho(id[kPairRow[e]], id[kPairCol[e]]);

    double sum = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
        const std::array<int, 4> q = {1, (mask & 1) ? -1 : 1, (mask & 2) ? -1 : 1,
                                      (mask & 4) ? -1 : 1};
        const double prod = static_cast<double>(q[1] * q[2] * q[3]);
        sum += prod * detail::orthant4_signed(base, q, prec);
    }
    return 2.0 * sum;
}

StatisticMoments statistic_moments(const QuantizedCovariance& qc) {
    return statistic_moments(qc, QuadPrecision::full);
}

StatisticMoments statistic_moments(const QuantizedCovariance& qc, QuadPrecision prec) {
    const int m = qc.sigma_z.dim();
    const PairIndex pi(m);
    const int count = pi.count();

    StatisticMoments sm;
    sm.mu.resize(count);
    sm.d_mu.resize(count);
    sm.r = SymMatrix(count);

    for (int l = 0; l < count; ++l) {
        const auto [i, j] = pi.pair(l);
        sm.mu[l] = qc.sigma_z(i, j);
        sm.d_mu[l] = qc.d_sigma_z(i, j);
    }
    for (int l = 0; l < count; ++l) {
        const auto [i, j] = pi.pair(l);
        sm.r.set(l, l, 1.0 - sm.mu[l] * sm.mu[l]);  // E[(z_i z_j)^2] = 1
        for (int mIdx = 0; mIdx < l; ++mIdx) {
            const auto [p, q] = pi.pair(mIdx);
            const double second = quartic_moment(i, j, p, q, qc, prec);
            sm.r.set(l, mIdx, second - sm.mu[l] * sm.mu[mIdx]);
        }
    }
    return sm;
}

namespace detail {

double bvn_upper(double dh, double dk, double r) {
    // Gauss-Legendre half rules (6, 12 and 20 points).
    static const double x1[3] = {-0.9324695142031521, -0.6612093864662645,
                                 -0.2386191860831969};
    static const double w1[3] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910};
    static const double x2[6] = {-0.9815606342467192, -0.9041172563704749,
                                 -0.7699026741943047, -0.5873179542866175,
                                 -0.3678314989981802, -0.1252334085114689};
    static const double w2[6] = {0.04717533638651183, 0.1069393259953184, 0.1600783285433462,
                                 0.2031674267230659,  0.2334925365383548, 0.2491470458134028};
    static const double x3[10] = {-0.9931285991850949,  -0.9639719272779138,
                                  -0.9122344282513259,  -0.8391169718222188,
                                  -0.7463319064601508,  -0.6360536807265150,
                                  -0.5108670019508271,  -0.3737060887154195,
                                  -0.2277858511416451,  -0.07652652113349734};
    static const double w3[10] = {0.01761400713915212, 0.04060142980038694,
                                  0.06267204833410907, 0.08327674157670475,
                                  0.1019301198172404,  0.1181945319615184,
                                  0.1316886384491766,  0.1420961093183820,
                                  0.1491729864726037,  0.1527533871307258};

    if (!(std::fabs(r) <= 1.0)) throw std::invalid_argument("bvn_upper: |r| must be <= 1");

    const double* xg;
    const double* wg;
    int ng;
    const double ar = std::fabs(r);
    if (ar < 0.3) {
        xg = x1, wg = w1, ng = 3;
    } else if (ar < 0.75) {
        xg = x2, wg = w2, ng = 6;
    } else {
        xg = x3, wg = w3, ng = 10;
    }

    double h = dh, k = dk;
    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        if (ar > 0.0) {
            const double hs = 0.5 * (h * h + k * k);
            const double asr = std::asin(r);
            for (int i = 0; i < ng; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(0.5 * asr * (is * xg[i] + 1.0));
                    bvn += wg[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn *= asr / (2.0 * kTwoPi);
        }
        bvn += std_normal_cdf(-h) * std_normal_cdf(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (ar < 1.0) {
            const double as0 = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as0);
            const double bs = (h - k) * (h - k);
            const double cc = (4.0 - hk) / 8.0;
            const double dd = (12.0 - hk) / 16.0;
            double asr = -0.5 * (bs / as0 + hk);
            if (asr > -100.0)
                bvn = a * std::exp(asr) *
                      (1.0 - cc * (bs - as0) * (1.0 - dd * bs / 5.0) / 3.0 +
                       cc * dd * as0 * as0 / 5.0);
            if (-hk < 100.0) {
                const double b = std::sqrt(bs);
                bvn -= std::exp(-0.5 * hk) * std::sqrt(kTwoPi) * std_normal_cdf(-b / a) * b *
                       (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0);
            }
            a *= 0.5;
            for (int i = 0; i < ng; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    double xs = a * (is * xg[i] + 1.0);
                    xs *= xs;
                    const double rs = std::sqrt(1.0 - xs);
                    const double asr2 = -0.5 * (bs / xs + hk);
                    if (asr2 > -100.0) {
                        bvn += a * wg[i] * std::exp(asr2) *
                               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                                (1.0 + cc * xs * (1.0 + dd * xs)));
                    }
                }
            }
            bvn = -bvn / kTwoPi;
        }
        if (r > 0.0) {
            bvn += std_normal_cdf(-std::max(h, k));
        } else {
            bvn = -bvn;
            if (k > h) bvn += std_normal_cdf(k) - std_normal_cdf(h);
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

double orthant4_corr6(const std::array<double, 6>& corr, QuadPrecision prec) {
    return orthant4_cached(corr, prec);
}

double orthant4_conditioning(const std::array<double, 6>& corr) {
    std::array<double, 6> clamped;
    for (int e = 0; e < 6; ++e) clamped[e] = clamp_rho(corr[e]);
    validate_psd(clamped);
    return orthant4_conditioning_raw(clamped);
}

double orthant4_signed(const std::array<double, 6>& corr, const std::array<int, 4>& signs,
                       QuadPrecision prec) {
    std::array<double, 6> flipped;
    for (int e = 0; e < 6; ++e)
        flipped[e] = corr[e] * signs[kPairRow[e]] * signs[kPairCol[e]];
    return orthant4_cached(flipped, prec);
}

void orthant_cache_clear() {
    OrthantCache& cache = orthant_cache();
    for (auto& shard : cache.shards) {
        std::lock_guard<std::mutex> lock(shard.mu);
        shard.map.clear();
    }
}

std::size_t orthant_cache_size() {
    OrthantCache& cache = orthant_cache();
    std::size_t n = 0;
    for (auto& shard : cache.shards) {
        std::lock_guard<std::mutex> lock(shard.mu);
        n += shard.map.size();
    }
    return n;
}

}  // namespace detail

}  // namespace doabound
