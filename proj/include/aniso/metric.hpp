#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "aniso/cover.hpp"
#include "aniso/error.hpp"
#include "aniso/geometry.hpp"

namespace aniso {

struct QuasidistanceEstimate {
    double value = 0.0;
    double level_t_star = std::numeric_limits<double>::infinity();
    Point witness_center;
    std::string diagnostic;
};

struct RhoOptions {
    int centers = 65;        // candidate centers on [x, y], endpoints included
    double t_tol = 1e-8;
    double t_floor = -400.0;  // below this the pair is declared unreachable
    double t_ceiling = 400.0;
};

namespace detail {

inline bool both_inside(const CoverSpec& spec, const Point& z, double t, const Point& x, const Point& y) {
    const Matrix inv = spec.matrix(z, t).inverse();
    return (inv * (x - z)).norm() <= 1.0 + 1e-12 && (inv * (y - z)).norm() <= 1.0 + 1e-12;
}

/// sup{t : x, y in theta(z, t)} by bracketing and bisection; NaN if no level reaches.
inline double deepest_level(const CoverSpec& spec, const Point& z, const Point& x, const Point& y,
                            const RhoOptions& opt) {
    double lo = 0.0, hi = 0.0;
    if (both_inside(spec, z, 0.0, x, y)) {
        double step = 1.0;
        hi = step;
        while (both_inside(spec, z, hi, x, y)) {
            lo = hi;
            step *= 2.0;
            hi += step;
            if (hi > opt.t_ceiling) return hi;
        }
    } else {
        double step = 1.0;
        lo = -step;
        while (!both_inside(spec, z, lo, x, y)) {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if (lo < opt.t_floor) return std::numeric_limits<double>::quiet_NaN();
        }
    }
    while (hi - lo > opt.t_tol) {
        const double mid = 0.5 * (lo + hi);
        (both_inside(spec, z, mid, x, y) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace detail

/// rho(x, y) = inf{|theta| : x, y in theta}, searched over centers on [x, y].
/// For translation-invariant covers the midpoint is optimal: if x, y lie in
/// z + K with K symmetric and convex then so does (x + y)/2 + K.
inline QuasidistanceEstimate rho(const CoverSpec& spec, const Point& x_in, const Point& y_in,
                                 const RhoOptions& opt = {}) {
    if (x_in.size() != spec.dim() || y_in.size() != spec.dim())
        throw ContractError("rho: point dimension does not match cover");
    // Canonical argument order makes the result bitwise symmetric.
    const bool swap = std::lexicographical_compare(y_in.data(), y_in.data() + y_in.size(), x_in.data(),
                                                   x_in.data() + x_in.size());
    const Point& x = swap ? y_in : x_in;
    const Point& y = swap ? x_in : y_in;
    QuasidistanceEstimate best;
    if ((x - y).norm() <= 1e-12) {
        best.value = 0.0;
        best.witness_center = x;
        return best;
    }
    best.value = std::numeric_limits<double>::infinity();
    std::vector<Point> centers;
    if (spec.translation_invariant()) {
        centers.push_back(0.5 * (x + y));
    } else {
        const int nc = std::max(opt.centers, 2);
        for (int i = 0; i < nc; ++i) {
            const double s = static_cast<double>(i) / (nc - 1);
            centers.push_back(i == nc - 1 ? Point(y) : Point(x + s * (y - x)));
        }
        centers.push_back(0.5 * (x + y));
    }
    for (const auto& z : centers) {
        const double t = detail::deepest_level(spec, z, x, y, opt);
        if (std::isnan(t)) continue;
        const double v = spec.theta(z, t).volume();
        if (v < best.value) {
            best.value = v;
            best.level_t_star = t;
            best.witness_center = z;
        }
    }
    if (!std::isfinite(best.value)) {
        best.diagnostic = "no level of the cover contains both points";
        best.witness_center = x;
    }
    return best;
}

/// rho with a per-pair cache; pairs are keyed by coordinates rounded to 1e-12
/// and stored in canonical order so that rho(x, y) and rho(y, x) share a slot.
class RhoCache {
public:
    explicit RhoCache(CoverSpec spec, RhoOptions opt = {}) : spec_(std::move(spec)), opt_(opt) {}

    const CoverSpec& spec() const { return spec_; }

    QuasidistanceEstimate operator()(const Point& x, const Point& y) const {
        Key kx = key(x), ky = key(y);
        if (ky < kx) std::swap(kx, ky);
        const auto k = std::make_pair(kx, ky);
        {
            std::lock_guard lock(mu_);
            auto it = cache_.find(k);
            if (it != cache_.end()) return it->second;
        }
        const auto v = rho(spec_, x, y, opt_);
        std::lock_guard lock(mu_);
        cache_[k] = v;
        return v;
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return cache_.size();
    }

private:
    using Key = std::array<long long, kMaxDim>;

    static Key key(const Point& p) {
        Key k{};
        for (Eigen::Index i = 0; i < p.size(); ++i) k[static_cast<size_t>(i)] = std::llround(p(i) * 1e12);
        return k;
    }

    CoverSpec spec_;
    RhoOptions opt_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<Key, Key>, QuasidistanceEstimate> cache_;
};

struct Triple {
    Point x, y, z;
};

struct TriangleReport {
    double k_hat = 1.0;
    size_t used = 0;
    size_t ignored = 0;
};

/// max rho(x,y) / (rho(x,z) + rho(z,y)) over the triples, clamped below at 1.
inline TriangleReport triangle_constant(const CoverSpec& spec, const std::vector<Triple>& triples,
                                        const RhoOptions& opt = {}) {
    TriangleReport r;
    for (const auto& tr : triples) {
        const double den = rho(spec, tr.x, tr.z, opt).value + rho(spec, tr.z, tr.y, opt).value;
        const double num = rho(spec, tr.x, tr.y, opt).value;
        if (!(den > 0.0) || !std::isfinite(den) || !std::isfinite(num)) {
            ++r.ignored;
            continue;
        }
        ++r.used;
        r.k_hat = std::max(r.k_hat, num / den);
    }
    return r;
}

/// z, x both in theta(y, t).
struct InsideSample {
    Point x, z;
    double t = 0.0;
};

/// z outside theta(x, s).
struct OutsideSample {
    Point x, z;
    double s = 0.0;
};

struct CorollaryReport {
    double c0 = 1.0;
    size_t checked = 0;
    size_t violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();  // log2(rho / bound)
    double mean_margin = 0.0;
};

/// Smallest c0 > 1 making the two-sided distance bound hold on the samples,
/// then the induced lower bound on rho(x, z) checked on every outside sample.
/// The ellipsoid realizing rho(x, z) also contains x and z, so each one joins
/// the inside samples used to fit c0.
inline CorollaryReport check_corollary_23(const CoverSpec& spec, const std::vector<InsideSample>& inside,
                                          const std::vector<OutsideSample>& outside,
                                          const RhoOptions& opt = {}) {
    const ExponentParams ep = spec.exponents();
    CorollaryReport r;
    std::vector<double> values;
    values.reserve(outside.size());
    double c0 = 1.0;
    for (const auto& s : inside)
        c0 = std::max(c0, (s.z - s.x).norm() * std::exp2(lambda_fn(s.t, ep)));
    for (const auto& s : outside) {
        if (spec.theta(s.x, s.s).contains(s.z)) throw ContractError("outside sample lies in theta(x, s)");
        c0 = std::max(c0, std::exp2(-lambda_tilde_fn(s.s, ep)) / (s.z - s.x).norm());
        const auto est = rho(spec, s.x, s.z, opt);
        values.push_back(est.value);
        if (std::isfinite(est.level_t_star))
            c0 = std::max(c0, (s.z - s.x).norm() * std::exp2(lambda_fn(est.level_t_star, ep)));
    }
    r.c0 = std::nextafter(c0, std::numeric_limits<double>::infinity());
    const double a1 = spec.params().a1;
    double sum = 0.0;
    for (size_t i = 0; i < outside.size(); ++i) {
        const auto& s = outside[i];
        const double bound =
            a1 * std::exp2(-lambda_inverse(2.0 * std::log2(r.c0) + lambda_tilde_fn(s.s, ep), ep));
        const double margin = std::log2(values[i] / bound);
        ++r.checked;
        // Bisection stops within t_tol of the optimum, so allow that much slack.
        if (margin < -4.0 * opt.t_tol) ++r.violations;
        r.min_margin = std::min(r.min_margin, margin);
        sum += margin;
    }
    if (r.checked) r.mean_margin = sum / static_cast<double>(r.checked);
    return r;
}

struct DistanceCalibration {
    double c0 = 1.0;     // smallest C0 >= 1 with |x - x0| <= C0 rho^{a4} when rho >= 1
    size_t used = 0;
    size_t checked = 0;  // held-out points with |x - x0| >= C0
    size_t violations = 0;
};

/// Calibrates |x - x0| <= C0 rho(x0, x)^{a4} on `calibration`, then checks
/// rho(x0, x) >= (|x - x0| / C0)^{1/a4} on `check` wherever |x - x0| >= C0.
inline DistanceCalibration calibrate_distance_constant(const CoverSpec& spec, const Point& x0,
                                                       const std::vector<Point>& calibration,
                                                       const std::vector<Point>& check,
                                                       double slack = 1e-6, const RhoOptions& opt = {}) {
    const double a4 = spec.params().a4;
    DistanceCalibration r;
    for (const auto& x : calibration) {
        const double v = rho(spec, x0, x, opt).value;
        if (!(v >= 1.0) || !std::isfinite(v)) continue;
        ++r.used;
        r.c0 = std::max(r.c0, (x - x0).norm() / std::pow(v, a4));
    }
    r.c0 *= 1.0 + slack;
    for (const auto& x : check) {
        const double d = (x - x0).norm();
        if (d < r.c0) continue;
        ++r.checked;
        if (rho(spec, x0, x, opt).value < std::pow(d / r.c0, 1.0 / a4) * (1.0 - 1e-9)) ++r.violations;
    }
    return r;
}

}  // namespace aniso
