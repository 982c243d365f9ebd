#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aniso/error.hpp"
#include "aniso/geometry.hpp"

namespace aniso {

/// The six constants p(Theta) = {a1..a6}.
struct CoverParameters {
    double a1 = 1.0, a2 = 1.0, a3 = 1.0, a4 = 1.0, a5 = 1.0, a6 = 1.0;

    void validate() const {
        for (double a : {a1, a2, a3, a4, a5, a6})
            if (!(a > 0.0) || !std::isfinite(a))
                throw InvalidCover("cover parameters must be positive and finite");
        if (a1 > a2) throw InvalidCover("a1 > a2");
        if (a3 > 1.0 || a5 < 1.0) throw InvalidCover("need a3 <= 1 <= a5");
        if (a6 > a4) throw InvalidCover("a6 > a4");
    }

    ExponentParams exponents() const { return {a4, a6}; }
};

enum class CoverKind { isotropic, diagonal, pointwise_variable, custom };

inline std::string to_string(CoverKind k) {
    switch (k) {
        case CoverKind::isotropic: return "isotropic";
        case CoverKind::diagonal: return "diagonal";
        case CoverKind::pointwise_variable: return "pointwise-variable";
        case CoverKind::custom: return "custom";
    }
    return "?";
}

/// A continuous multilevel ellipsoid cover given by the matrix family
/// (x, t) -> M_{x,t}; theta(x, t) = x + M_{x,t}(B).
class CoverSpec {
public:
    using Family = std::function<Matrix(const Point&, double)>;

    /// M_{x,t} = (2^{-t}/v_n)^{1/n} I, so |theta(x,t)| = 2^{-t}.
    static CoverSpec isotropic(int n) {
        check_dimension(n);
        return diagonal(std::vector<double>(static_cast<size_t>(n), 1.0 / n), CoverKind::isotropic);
    }

    /// M_{x,t} = c diag(2^{-b_i t}) with sum b_i = 1 and c^n v_n = 1.
    static CoverSpec diagonal(std::vector<double> b, CoverKind kind = CoverKind::diagonal) {
        const int n = static_cast<int>(b.size());
        check_dimension(n);
        double sum = 0.0;
        for (double bi : b) {
            if (!(bi > 0.0)) throw InvalidCover("diagonal exponents must be positive");
            sum += bi;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw InvalidCover("diagonal exponents must sum to 1");
        const double c = std::pow(1.0 / unit_ball_volume(n), 1.0 / n);
        CoverSpec spec;
        spec.kind_ = kind;
        spec.n_ = n;
        spec.b_ = b;
        spec.translation_invariant_ = true;
        spec.family_ = [b, c, n](const Point&, double t) {
            Matrix m = Matrix::Zero(n, n);
            for (int i = 0; i < n; ++i) m(i, i) = c * std::exp2(-b[static_cast<size_t>(i)] * t);
            return m;
        };
        const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
        spec.params_ = {1.0, 1.0, 1.0, *hi, 1.0, *lo};
        return spec;
    }

    /// Planar family R(phi(x)) diag(c 2^{-b1(x) t}, c 2^{-b2(x) t}) R(phi(x))^T with
    /// b1 + b2 = 1 and b_i(x) in [b_min, b_max]. Its (C2) constants are only
    /// known empirically; a3 = a5 = 1 are placeholders until estimated.
    static CoverSpec pointwise_variable(double b_min, double b_max) {
        if (!(b_min > 0.0) || !(b_min <= b_max) || std::abs(b_min + b_max - 1.0) > 1e-12)
            throw InvalidCover("pointwise-variable exponents need 0 < b_min <= b_max, b_min + b_max = 1");
        const double c = 1.0 / std::sqrt(std::numbers::pi);
        const double amp = 0.5 * (b_max - b_min);
        CoverSpec spec;
        spec.kind_ = CoverKind::pointwise_variable;
        spec.n_ = 2;
        spec.b_ = {b_min, b_max};
        spec.translation_invariant_ = false;
        spec.constants_declared_ = false;
        spec.family_ = [c, amp](const Point& x, double t) {
            const double b1 = 0.5 + amp * std::sin(0.7 * x(0) + 0.4 * x(1));
            const double b2 = 1.0 - b1;
            const double phi = 0.35 * std::sin(0.5 * x(0)) + 0.25 * std::cos(0.3 * x(1));
            const double cs = std::cos(phi), sn = std::sin(phi);
            const double d1 = c * std::exp2(-b1 * t), d2 = c * std::exp2(-b2 * t);
            Matrix m(2, 2);
            m(0, 0) = cs * cs * d1 + sn * sn * d2;
            m(0, 1) = cs * sn * (d1 - d2);
            m(1, 0) = m(0, 1);
            m(1, 1) = sn * sn * d1 + cs * cs * d2;
            return m;
        };
        spec.params_ = {1.0, 1.0, 1.0, b_max, 1.0, b_min};
        return spec;
    }

    /// Arbitrary family with declared parameters.
    static CoverSpec custom(int n, Family family, CoverParameters params,
                            bool translation_invariant = false) {
        check_dimension(n);
        CoverSpec spec;
        spec.kind_ = CoverKind::custom;
        spec.n_ = n;
        spec.family_ = std::move(family);
        spec.params_ = params;
        spec.translation_invariant_ = translation_invariant;
        return spec;
    }

    CoverKind kind() const { return kind_; }
    int dim() const { return n_; }
    const std::vector<double>& exponents_b() const { return b_; }
    const CoverParameters& params() const { return params_; }
    ExponentParams exponents() const { return params_.exponents(); }
    double scale() const { return scale_; }

    /// True when M_{x,t} does not depend on x.
    bool translation_invariant() const { return translation_invariant_; }

    /// False when a3/a5 are placeholders rather than declared values.
    bool constants_declared() const { return constants_declared_; }

    CoverSpec with_params(CoverParameters p) const {
        p.validate();
        CoverSpec s = *this;
        s.params_ = p;
        s.constants_declared_ = true;
        return s;
    }

    /// Same cover with every matrix multiplied by `factor`.
    CoverSpec scaled(double factor) const {
        CoverSpec s = *this;
        s.scale_ *= factor;
        return s;
    }

    Matrix matrix(const Point& x, double t) const {
        if (x.size() != n_) throw ContractError("point dimension does not match cover");
        return scale_ * family_(x, t);
    }

    Ellipsoid theta(const Point& x, double t) const { return Ellipsoid(x, matrix(x, t), t); }

private:
    CoverSpec() = default;

    CoverKind kind_ = CoverKind::custom;
    int n_ = 1;
    std::vector<double> b_;
    Family family_;
    CoverParameters params_;
    double scale_ = 1.0;
    bool translation_invariant_ = false;
    bool constants_declared_ = true;
};

inline Ellipsoid theta(const CoverSpec& spec, const Point& x, double t) { return spec.theta(x, t); }

struct PointLevel {
    Point x;
    double t = 0.0;
};

struct PairSample {
    Point x, y;
    double t = 0.0;
    double s = 0.0;
};

/// Uniform x in [-box, box]^n and t in [t_lo, t_hi].
inline std::vector<PointLevel> sample_point_levels(const CoverSpec& spec, size_t count,
                                                   std::mt19937_64& rng, double t_lo,
                                                   double t_hi, double box = 2.0) {
    std::uniform_real_distribution<double> ux(-box, box), ut(t_lo, t_hi);
    std::vector<PointLevel> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Point x(spec.dim());
        for (int k = 0; k < spec.dim(); ++k) x(k) = ux(rng);
        out.push_back({x, ut(rng)});
    }
    return out;
}

inline Point sample_unit_ball(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Point d(n);
    for (int k = 0; k < n; ++k) d(k) = g(rng);
    d /= d.norm();
    return d * std::pow(u(rng), 1.0 / n);
}

/// Pairs with y drawn inside theta(x, t) (so theta(x,t) meets theta(y,t+s))
/// and s drawn from `s_grid`.
inline std::vector<PairSample> sample_pairs(const CoverSpec& spec, size_t count,
                                            std::mt19937_64& rng, double t_lo, double t_hi,
                                            const std::vector<double>& s_grid,
                                            double box = 2.0) {
    if (s_grid.empty()) throw ContractError("empty s grid");
    std::uniform_real_distribution<double> ux(-box, box), ut(t_lo, t_hi);
    std::uniform_int_distribution<size_t> us(0, s_grid.size() - 1);
    std::vector<PairSample> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        Point x(spec.dim());
        for (int k = 0; k < spec.dim(); ++k) x(k) = ux(rng);
        const double t = ut(rng);
        const double s = s_grid[us(rng)];
        Point y = x + spec.matrix(x, t) * (0.95 * sample_unit_ball(spec.dim(), rng));
        out.push_back({x, y, t, s});
    }
    return out;
}

inline std::vector<double> default_s_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 16; ++i) g.push_back(0.5 * i);
    return g;
}

struct C1Report {
    double a1_hat = 0.0;
    double a2_hat = 0.0;
    std::vector<std::string> violations;
};

/// Empirical inf/sup of |theta(x,t)| 2^t.
inline C1Report validate_c1(const CoverSpec& spec, const std::vector<PointLevel>& samples,
                            double tol = 1e-9) {
    if (samples.empty()) throw ContractError("validate_c1 needs samples");
    C1Report r;
    r.a1_hat = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        const double v = spec.theta(s.x, s.t).volume() * std::exp2(s.t);
        r.a1_hat = std::min(r.a1_hat, v);
        r.a2_hat = std::max(r.a2_hat, v);
    }
    const auto& p = spec.params();
    if (r.a1_hat < p.a1 * (1.0 - tol))
        r.violations.push_back("a1: measured " + std::to_string(r.a1_hat) + " below declared " +
                               std::to_string(p.a1));
    if (r.a2_hat > p.a2 * (1.0 + tol))
        r.violations.push_back("a2: measured " + std::to_string(r.a2_hat) + " above declared " +
                               std::to_string(p.a2));
    return r;
}

struct C2Report {
    double a3_hat = 0.0, a4_hat = 0.0, a5_hat = 0.0, a6_hat = 0.0;
    size_t used = 0;
    size_t skipped = 0;
    std::vector<std::string> violations;
};

namespace detail {
inline std::pair<double, double> least_squares_line(const std::vector<double>& xs,
                                                    const std::vector<double>& ys) {
    const double nn = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= nn;
    my /= nn;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}
}  // namespace detail

/// Fits (a3, a4, a5, a6) from sampled pairs. Exponents come from a
/// least-squares line through the per-s worst-case envelope of the two
/// log2 operator norms; constants are the worst case given those exponents.
inline C2Report validate_c2(const CoverSpec& spec, const std::vector<PairSample>& pairs,
                            double exponent_tol = 1e-6, double constant_tol = 1e-6) {
    std::map<double, std::pair<double, double>> envelope;  // s -> (max upper, min lower)
    struct Entry { double s, up, low; };
    std::vector<Entry> entries;
    C2Report r;
    for (const auto& ps : pairs) {
        if (ps.s < 0.0) throw ContractError("validate_c2 needs s >= 0");
        const Ellipsoid ex = spec.theta(ps.x, ps.t);
        const Ellipsoid ey = spec.theta(ps.y, ps.t + ps.s);
        if (!intersects(ex, ey)) {
            ++r.skipped;
            continue;
        }
        const double up = std::log2(operator_norm(ex.inverse() * ey.matrix()));
        const double low = -std::log2(operator_norm(ey.inverse() * ex.matrix()));
        entries.push_back({ps.s, up, low});
        auto it = envelope.find(ps.s);
        if (it == envelope.end())
            envelope.emplace(ps.s, std::make_pair(up, low));
        else {
            it->second.first = std::max(it->second.first, up);
            it->second.second = std::min(it->second.second, low);
        }
    }
    r.used = entries.size();
    if (envelope.size() < 2) throw EstimationError("validate_c2 needs admissible samples at >= 2 distinct s");
    std::vector<double> xs, ups, lows;
    for (const auto& [s, v] : envelope) {
        xs.push_back(s);
        ups.push_back(v.first);
        lows.push_back(v.second);
    }
    r.a6_hat = -detail::least_squares_line(xs, ups).first;
    r.a4_hat = -detail::least_squares_line(xs, lows).first;
    double log_a5 = -std::numeric_limits<double>::infinity();
    double log_a3 = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
        log_a5 = std::max(log_a5, e.up + r.a6_hat * e.s);
        log_a3 = std::min(log_a3, e.low + r.a4_hat * e.s);
    }
    r.a5_hat = std::exp2(log_a5);
    r.a3_hat = std::exp2(log_a3);

    const auto& p = spec.params();
    if (r.a4_hat > p.a4 + exponent_tol)
        r.violations.push_back("a4: measured " + std::to_string(r.a4_hat) + " above declared " +
                               std::to_string(p.a4));
    if (r.a6_hat < p.a6 - exponent_tol)
        r.violations.push_back("a6: measured " + std::to_string(r.a6_hat) + " below declared " +
                               std::to_string(p.a6));
    if (spec.constants_declared()) {
        if (r.a5_hat > p.a5 * (1.0 + constant_tol))
            r.violations.push_back("a5: measured " + std::to_string(r.a5_hat) +
                                   " above declared " + std::to_string(p.a5));
        if (r.a3_hat < p.a3 * (1.0 - constant_tol))
            r.violations.push_back("a3: measured " + std::to_string(r.a3_hat) +
                                   " below declared " + std::to_string(p.a3));
    }
    if (!std::isfinite(r.a3_hat) || !std::isfinite(r.a5_hat) || !(r.a3_hat > 0.0))
        r.violations.push_back("(C2) envelope constants are not finite");
    return r;
}

/// theta(x, t) is inside theta(x, t - s) for every sample and every s on a
/// grid over [s_lo, s_hi].
inline bool nesting_holds(const CoverSpec& spec, const std::vector<PointLevel>& samples,
                          double s_lo, double s_hi, int s_steps = 16) {
    for (const auto& pl : samples) {
        const Matrix inner = spec.matrix(pl.x, pl.t);
        for (int k = 0; k <= s_steps; ++k) {
            const double s = s_lo + (s_hi - s_lo) * k / s_steps;
            const Matrix outer_inv = spec.matrix(pl.x, pl.t - s).inverse();
            if (operator_norm(outer_inv * inner) > 1.0 + 1e-12) return false;
        }
    }
    return true;
}

/// Smallest J >= log2(a5)/a6 (to 1e-3) at which sampled nesting holds for
/// s in [J, J + s_span].
inline double nesting_shift(const CoverSpec& spec, const std::vector<PointLevel>& samples,
                            double s_span = 8.0, double j_cap = 1024.0) {
    const auto& p = spec.params();
    const double floor_j = std::max(0.0, std::log2(p.a5) / p.a6);
    if (nesting_holds(spec, samples, floor_j, floor_j + s_span)) return floor_j;
    double lo = floor_j, hi = std::max(1.0, 2.0 * floor_j);
    while (!nesting_holds(spec, samples, hi, hi + s_span)) {
        lo = hi;
        hi *= 2.0;
        if (hi > j_cap) throw CoverDefect("nesting fails up to J = " + std::to_string(j_cap));
    }
    while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        (nesting_holds(spec, samples, mid, mid + s_span) ? hi : lo) = mid;
    }
    return hi;
}

struct ZeroUniformReport {
    double c1_hat = 0.0;
    double c2_hat = 0.0;
};

/// Empirical range of ||M_{x,0}^{-1} M_{y,0}|| over the sampled pairs (t, s ignored).
inline ZeroUniformReport quasi_zero_uniform_check(const CoverSpec& spec,
                                                  const std::vector<PairSample>& pairs) {
    if (pairs.empty()) throw ContractError("quasi_zero_uniform_check needs samples");
    ZeroUniformReport r{std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& ps : pairs) {
        const double v =
            operator_norm(spec.matrix(ps.x, 0.0).inverse() * spec.matrix(ps.y, 0.0));
        r.c1_hat = std::min(r.c1_hat, v);
        r.c2_hat = std::max(r.c2_hat, v);
    }
    return r;
}

struct MatrixBoundsReport {
    double c_norm = 0.0;     // sup ||M_{x,t}|| 2^{lambda(t)}
    double c_inverse = 0.0;  // sup ||M_{x,t}^{-1}|| 2^{-lambda~(t)}
};

inline MatrixBoundsReport check_matrix_bounds(const CoverSpec& spec,
                                              const std::vector<PointLevel>& samples) {
    const ExponentParams ep = spec.exponents();
    MatrixBoundsReport r;
    for (const auto& pl : samples) {
        const Matrix m = spec.matrix(pl.x, pl.t);
        r.c_norm = std::max(r.c_norm, operator_norm(m) * std::exp2(lambda_fn(pl.t, ep)));
        r.c_inverse = std::max(r.c_inverse, operator_norm(m.inverse()) *
                                                std::exp2(-lambda_tilde_fn(pl.t, ep)));
    }
    return r;
}

struct DiamWidthReport {
    double c_diam = 0.0;   // sup diam 2^{lambda(t)}
    double c_width = 0.0;  // sup 2^{-lambda~(t)} / width
    double c = 0.0;        // max of the two: both chains hold with this C
};

inline DiamWidthReport check_diam_width_bounds(const CoverSpec& spec,
                                               const std::vector<PointLevel>& samples) {
    const ExponentParams ep = spec.exponents();
    DiamWidthReport r;
    for (const auto& pl : samples) {
        const Ellipsoid e = spec.theta(pl.x, pl.t);
        r.c_diam = std::max(r.c_diam, e.diam() * std::exp2(lambda_fn(pl.t, ep)));
        r.c_width = std::max(r.c_width, std::exp2(-lambda_tilde_fn(pl.t, ep)) / e.width());
    }
    r.c = std::max(r.c_diam, r.c_width);
    return r;
}

}  // namespace aniso
