#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "aniso/error.hpp"
#include "aniso/geometry.hpp"
#include "aniso/multiindex.hpp"

namespace aniso {

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussRule {
    std::vector<double> x, w;
};

inline GaussRule gauss_legendre_01(int order) {
    if (order < 1) throw ContractError("Gauss order must be positive");
    GaussRule r;
    r.x.resize(static_cast<size_t>(order));
    r.w.resize(static_cast<size_t>(order));
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (order == 1) p0 = 1.0, p1 = z;
            dp = order * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= order; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = order * (z * p1 - p0) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        const auto lo = static_cast<size_t>(i), hi = static_cast<size_t>(order - 1 - i);
        r.x[lo] = 0.5 * (1.0 - z);
        r.x[hi] = 0.5 * (1.0 + z);
        r.w[lo] = r.w[hi] = 0.5 * w;
    }
    return r;
}

/// Quadrature configuration plus precomputed node tables.
class QuadContext {
public:
    explicit QuadContext(int n, int radial_order = 0, int angular_order = 0)
        : n_(n) {
        check_dimension(n);
        radial_order_ = radial_order > 0 ? radial_order : (n == 1 ? 32 : 48);
        angular_order_ = angular_order > 0 ? angular_order : (n == 1 ? 2 : 128);
        build();
    }

    int dim() const { return n_; }
    int radial_order() const { return radial_order_; }
    int angular_order() const { return angular_order_; }

    double truncation_cap = 1e3;
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int sup_grid_points = 10000;

    const GaussRule& radial() const { return *radial_; }
    const std::vector<Point>& directions() const { return *dirs_; }
    const std::vector<double>& direction_weights() const { return *dir_w_; }

    /// Same settings with both orders doubled.
    QuadContext refined() const {
        QuadContext c(n_, 2 * radial_order_, n_ == 1 ? 2 : 2 * angular_order_);
        c.truncation_cap = truncation_cap;
        c.abs_tol = abs_tol;
        c.rel_tol = rel_tol;
        c.sup_grid_points = sup_grid_points;
        return c;
    }

private:
    void build() {
        radial_ = std::make_shared<GaussRule>(gauss_legendre_01(radial_order_));
        auto dirs = std::make_shared<std::vector<Point>>();
        auto w = std::make_shared<std::vector<double>>();
        if (n_ == 1) {
            dirs->push_back(Point::Constant(1, 1.0));
            dirs->push_back(Point::Constant(1, -1.0));
            w->assign(2, 1.0);
        } else if (n_ == 2) {
            const double h = 2.0 * std::numbers::pi / angular_order_;
            for (int k = 0; k < angular_order_; ++k) {
                Point d(2);
                d << std::cos(h * k), std::sin(h * k);
                dirs->push_back(d);
                w->push_back(h);
            }
        } else {
            const int nz = std::max(2, angular_order_ / 2);
            const GaussRule gz = gauss_legendre_01(nz);
            const double h = 2.0 * std::numbers::pi / angular_order_;
            for (int i = 0; i < nz; ++i) {
                const double z = 2.0 * gz.x[static_cast<size_t>(i)] - 1.0;
                const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
                for (int k = 0; k < angular_order_; ++k) {
                    Point d(3);
                    d << rho * std::cos(h * k), rho * std::sin(h * k), z;
                    dirs->push_back(d);
                    w->push_back(2.0 * gz.w[static_cast<size_t>(i)] * h);
                }
            }
        }
        dirs_ = dirs;
        dir_w_ = w;
    }

    int n_;
    int radial_order_ = 0;
    int angular_order_ = 0;
    std::shared_ptr<const GaussRule> radial_;
    std::shared_ptr<const std::vector<Point>> dirs_;
    std::shared_ptr<const std::vector<double>> dir_w_;
};

/// |f(x)| <~ (|x - center| / scale)^{-exponent} far from center.
struct DecayHint {
    double exponent = 0.0;
    Point center;
    double scale = 1.0;
};

/// A real function on R^n with the hints quadrature needs: where it vanishes,
/// how fast it decays, and which ellipsoid boundaries carry jumps.
struct SampledFunction {
    std::function<double(const Point&)> eval;
    std::optional<Ellipsoid> support;
    std::optional<DecayHint> decay;
    std::vector<Ellipsoid> breaks;

    double operator()(const Point& x) const { return eval(x); }

    static SampledFunction zero() {
        SampledFunction f;
        f.eval = [](const Point&) { return 0.0; };
        return f;
    }
};

/// Integration domain, described in the chart x = center + frame * u:
/// {|u| <= outer} minus an optional excluded ellipsoid. The domain must be
/// star-shaped about `center`. outer = +inf means the chart covers a
/// physical ball of radius `physical_radius`.
struct Region {
    Point center;
    Matrix frame;
    double outer = 1.0;
    double physical_radius = 0.0;
    std::optional<Ellipsoid> excluded;

    static Region ellipsoid(const Ellipsoid& e) { return {e.center(), e.matrix(), 1.0, 0.0, {}}; }

    /// `outer` minus `inner`; inner must contain outer's center.
    static Region shell(const Ellipsoid& outer, const Ellipsoid& inner) {
        return {outer.center(), outer.matrix(), 1.0, 0.0, inner};
    }

    /// R^n; the radius is chosen from hints unless `radius` > 0.
    static Region whole_space(const Point& center, double radius = 0.0) {
        const int n = static_cast<int>(center.size());
        return {center, Matrix::Identity(n, n), std::numeric_limits<double>::infinity(), radius, {}};
    }

    /// R^n minus an ellipsoid, charted by that ellipsoid.
    static Region complement(const Ellipsoid& e, double radius = 0.0) {
        return {e.center(), e.matrix(), std::numeric_limits<double>::infinity(), radius, e};
    }

    bool bounded() const { return std::isfinite(outer); }
};

namespace detail {

/// R such that a |x|^{-k} tail beyond R integrates below tol in R^n.
inline double tail_radius(double k, int n, double tol, double scale) {
    const double e = k - n;
    if (!(e > 0.0)) return std::numeric_limits<double>::infinity();
    return scale * std::pow(tol * e, -1.0 / e);
}

}  // namespace detail

/// Physical truncation radius for an unbounded region given f's hints and
/// the extra polynomial growth `growth` of the integrand (|x|^growth).
inline double truncation_radius(const SampledFunction& f, const Region& region,
                                const QuadContext& ctx, double growth = 0.0,
                                double power = 1.0) {
    if (region.physical_radius > 0.0) return region.physical_radius;
    double r = 0.0;
    if (f.support) {
        r = (f.support->center() - region.center).norm() + f.support->sigma_max();
        return std::min(r, ctx.truncation_cap);
    }
    if (!f.decay) throw ContractError("unbounded integral needs a support or decay hint");
    const double offset = (f.decay->center - region.center).norm();
    const double k = power * f.decay->exponent - growth;
    r = offset + detail::tail_radius(k, ctx.dim(), ctx.abs_tol, f.decay->scale);
    return std::min(r, ctx.truncation_cap);
}

namespace detail {

/// Angles in [0, 2 pi) at which `signature` changes: the radial order of
/// the break crossings between the inner and outer radius. Across such an
/// angle the ray integral has a kink or a square-root edge.
template <class Signature>
std::vector<double> cut_events(Signature&& signature, int scan) {
    std::vector<double> events;
    const double h = 2.0 * std::numbers::pi / scan;
    auto prev = signature(0.0);
    for (int k = 1; k <= scan; ++k) {
        const double th = h * k;
        auto cur = signature(th);
        if (cur == prev) continue;
        double a = th - h, b = th;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (a + b);
            (signature(mid) == prev ? a : b) = mid;
        }
        events.push_back(std::fmod(0.5 * (a + b), 2.0 * std::numbers::pi));
        prev = std::move(cur);
    }
    std::sort(events.begin(), events.end());
    return events;
}

}  // namespace detail

/// Visits every quadrature node of `region`, splitting each ray at the
/// boundaries of `breaks`, and calls visit(x, weight). In the plane the
/// angular rule is also split where a break meets a ray tangentially or
/// crosses the region boundary.
template <class Visit>
void for_each_node(const Region& region, const std::vector<Ellipsoid>& breaks,
                   const QuadContext& ctx, double physical_radius, Visit&& visit) {
    const int n = ctx.dim();
    if (region.center.size() != n) throw ContractError("region dimension mismatch");
    const double jac = std::abs(region.frame.determinant());
    const GaussRule& g = ctx.radial();
    double r_outer = region.outer;
    const bool unbounded = !region.bounded();
    if (unbounded) {
        Eigen::JacobiSVD<Matrix> svd(region.frame);
        r_outer = physical_radius / svd.singularValues()(n - 1);
    }
    auto inner_radius = [&](const Point& dir) {
        double lo = 0.0;
        if (region.excluded) {
            if (auto iv = region.excluded->ray_interval(region.center, dir)) {
                if (iv->first > 0.0) throw ContractError("excluded ellipsoid must contain the chart center");
                lo = std::max(0.0, iv->second);
            }
        }
        return lo;
    };
    // Crossings this close to the ends of a ray are boundaries shared with the
    // region itself; counting them would split the angular rule on roundoff.
    auto interior = [&](double c, double lo) {
        const double eps = 1e-9 * (std::isfinite(r_outer) ? r_outer : 1.0);
        return c > lo + eps && c < r_outer - eps;
    };
    std::vector<double> cuts;
    auto ray = [&](const Point& dir_u, double weight) {
        const Point dir = region.frame * dir_u;
        const double lo = inner_radius(dir);
        if (lo >= r_outer) return;
        cuts.clear();
        cuts.push_back(lo);
        cuts.push_back(r_outer);
        for (const auto& b : breaks) {
            if (auto iv = b.ray_interval(region.center, dir)) {
                for (double c : {iv->first, iv->second})
                    if (interior(c, lo)) cuts.push_back(c);
            }
        }
        if (unbounded) {
            for (double c = std::max(1.0, lo) * 2.0; c < r_outer; c *= 2.0) cuts.push_back(c);
            if (lo == 0.0) cuts.push_back(std::min(1.0, r_outer));
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double a = cuts[i], b = cuts[i + 1];
            if (!(b > a)) continue;
            for (size_t q = 0; q < g.x.size(); ++q) {
                const double r = a + (b - a) * g.x[q];
                const double w = weight * (b - a) * g.w[q] * std::pow(r, n - 1) * jac;
                visit(Point(region.center + r * dir), w);
            }
        }
    };

    std::vector<double> events;
    if (n == 2 && !breaks.empty()) {
        std::vector<std::pair<double, int>> order;
        auto signature = [&](double th) {
            Point du(2);
            du << std::cos(th), std::sin(th);
            const Point dir = region.frame * du;
            const double lo = inner_radius(dir);
            order.clear();
            for (size_t i = 0; i < breaks.size(); ++i)
                if (auto iv = breaks[i].ray_interval(region.center, dir)) {
                    const int id = 2 * static_cast<int>(i);
                    if (interior(iv->first, lo)) order.emplace_back(iv->first, id);
                    if (interior(iv->second, lo)) order.emplace_back(iv->second, id + 1);
                }
            std::sort(order.begin(), order.end());
            std::vector<int> sig;
            sig.reserve(order.size());
            for (const auto& o : order) sig.push_back(o.second);
            return sig;
        };
        events = detail::cut_events(signature, 4 * ctx.angular_order());
    }
    if (events.empty()) {
        const auto& dirs = ctx.directions();
        const auto& dw = ctx.direction_weights();
        for (size_t k = 0; k < dirs.size(); ++k) ray(dirs[k], dw[k]);
        return;
    }

    // Between events the ray integral is smooth except for square-root edges
    // at the ends; the smoothstep map s^2 (3 - 2 s) flattens those.
    const double two_pi = 2.0 * std::numbers::pi;
    for (size_t e = 0; e < events.size(); ++e) {
        const double a = events[e];
        const double b = e + 1 < events.size() ? events[e + 1] : events.front() + two_pi;
        if (!(b > a)) continue;
        const int order = std::max(16, static_cast<int>(std::ceil(2.0 * ctx.angular_order() * (b - a) / two_pi)) + 4);
        const GaussRule s = gauss_legendre_01(order);
        Point du(2);
        for (size_t q = 0; q < s.x.size(); ++q) {
            const double x = s.x[q];
            const double th = a + (b - a) * x * x * (3.0 - 2.0 * x);
            du << std::cos(th), std::sin(th);
            ray(du, (b - a) * 6.0 * x * (1.0 - x) * s.w[q]);
        }
    }
}

namespace detail {
inline std::vector<Ellipsoid> all_breaks(const SampledFunction& f,
                                         const std::vector<Ellipsoid>& extra = {}) {
    std::vector<Ellipsoid> b = f.breaks;
    if (f.support) b.push_back(*f.support);
    b.insert(b.end(), extra.begin(), extra.end());
    return b;
}

/// Replaces an unbounded region by f's support when f has one.
inline Region effective_region(const SampledFunction& f, const Region& region) {
    if (!region.bounded() && f.support && !region.excluded && region.physical_radius == 0.0)
        return Region::ellipsoid(*f.support);
    return region;
}
}  // namespace detail

/// Integral of f over the region.
inline double integrate(const SampledFunction& f, const Region& region, const QuadContext& ctx,
                        const std::vector<Ellipsoid>& extra_breaks = {}) {
    const Region reg = detail::effective_region(f, region);
    const double radius = reg.bounded() ? 0.0 : truncation_radius(f, reg, ctx);
    double sum = 0.0;
    for_each_node(reg, detail::all_breaks(f, extra_breaks), ctx, radius,
                  [&](const Point& x, double w) { sum += w * f(x); });
    return sum;
}

inline double integrate(const SampledFunction& f, const Ellipsoid& e, const QuadContext& ctx) {
    return integrate(f, Region::ellipsoid(e), ctx);
}

/// Deterministic grid of points filling an ellipsoid (for sup norms).
inline std::vector<Point> ellipsoid_grid(const Ellipsoid& e, int target_points) {
    const int n = e.dim();
    const int per_axis = std::max(2, static_cast<int>(std::ceil(
                                         std::pow(static_cast<double>(target_points), 1.0 / n))));
    std::vector<Point> pts;
    Point u(n);
    std::vector<int> idx(static_cast<size_t>(n), 0);
    while (true) {
        for (int i = 0; i < n; ++i)
            u(i) = -1.0 + 2.0 * idx[static_cast<size_t>(i)] / (per_axis - 1);
        if (u.norm() <= 1.0) pts.push_back(e.from_local(u));
        int i = 0;
        while (i < n && ++idx[static_cast<size_t>(i)] == per_axis) idx[static_cast<size_t>(i++)] = 0;
        if (i == n) break;
    }
    return pts;
}

/// L^q norm over the region; q = inf is a grid sup over the support hint.
inline double lq_norm(const SampledFunction& f, double q, const Region& region,
                      const QuadContext& ctx, const std::vector<Ellipsoid>& extra_breaks = {}) {
    if (!(q >= 1.0)) throw ContractError("lq_norm needs q >= 1");
    if (std::isinf(q)) {
        std::optional<Ellipsoid> dom = f.support;
        if (!dom && region.bounded() && !region.excluded)
            dom = Ellipsoid(region.center, region.frame * region.outer);
        if (!dom) throw ContractError("q = inf needs a support hint");
        double m = 0.0;
        for (const auto& x : ellipsoid_grid(*dom, ctx.sup_grid_points)) m = std::max(m, std::abs(f(x)));
        return m;
    }
    const Region reg = detail::effective_region(f, region);
    const double radius = reg.bounded() ? 0.0 : truncation_radius(f, reg, ctx, 0.0, q);
    double sum = 0.0;
    for_each_node(reg, detail::all_breaks(f, extra_breaks), ctx, radius, [&](const Point& x, double w) {
        const double v = std::abs(f(x));
        if (v != 0.0) sum += w * std::pow(v, q);
    });
    return std::pow(sum, 1.0 / q);
}

inline double lq_norm(const SampledFunction& f, double q, const Ellipsoid& e, const QuadContext& ctx) {
    return lq_norm(f, q, Region::ellipsoid(e), ctx);
}

/// int f(y) y^alpha dy.
inline double moment(const SampledFunction& f, const MultiIndex& alpha, const Region& region,
                     const QuadContext& ctx) {
    if (alpha.degree() > kMaxDegree) throw ContractError("moment degree exceeds the supported maximum");
    const Region reg = detail::effective_region(f, region);
    const double radius = reg.bounded() ? 0.0 : truncation_radius(f, reg, ctx, alpha.degree());
    double sum = 0.0;
    for_each_node(reg, detail::all_breaks(f), ctx, radius,
                  [&](const Point& x, double w) { sum += w * f(x) * monomial(x, alpha); });
    return sum;
}

struct MomentSums {
    std::vector<double> signed_moments;  // int f (x - origin)^alpha
    std::vector<double> abs_moments;     // int |f| |(x - origin)^alpha|
};

/// All moments of degree <= m about `origin`, plus their absolute companions.
inline MomentSums moments(const SampledFunction& f, int m, const Point& origin,
                          const Region& region, const QuadContext& ctx,
                          const std::vector<Ellipsoid>& extra_breaks = {}) {
    if (m > kMaxDegree) throw ContractError("moment degree exceeds the supported maximum");
    const MonomialTable table(ctx.dim(), m);
    MomentSums out{std::vector<double>(table.size(), 0.0), std::vector<double>(table.size(), 0.0)};
    std::vector<double> mono(table.size());
    const Region reg = detail::effective_region(f, region);
    const double radius = reg.bounded() ? 0.0 : truncation_radius(f, reg, ctx, m);
    for_each_node(reg, detail::all_breaks(f, extra_breaks), ctx, radius,
                  [&](const Point& x, double w) {
                      const double v = f(x);
                      if (v == 0.0) return;
                      table.eval(x - origin, mono);
                      for (size_t j = 0; j < mono.size(); ++j) {
                          out.signed_moments[j] += w * v * mono[j];
                          out.abs_moments[j] += w * std::abs(v * mono[j]);
                      }
                  });
    return out;
}

struct Prop24Report {
    bool converged = false;
    std::vector<double> radii;
    std::vector<double> totals;       // sum over alpha of int_{|x-x0|<=R} |b||x^alpha|
    std::vector<double> differences;  // successive differences of totals
};

/// Cauchy test for int |b||x^alpha| < inf, |alpha| <= m, over growing balls
/// about x0: radii double from r0 up to the context's truncation cap.
inline Prop24Report check_prop24(const SampledFunction& b, int m, const Point& x0,
                                 const QuadContext& ctx, double r0 = 1.0) {
    Prop24Report rep;
    const MonomialTable table(ctx.dim(), m);
    std::vector<double> mono(table.size());
    for (double r = r0; r <= ctx.truncation_cap * (1.0 + 1e-12); r *= 2.0) {
        double total = 0.0;
        for_each_node(Region::whole_space(x0, r), detail::all_breaks(b), ctx, r,
                      [&](const Point& x, double w) {
                          const double v = std::abs(b(x));
                          if (v == 0.0) return;
                          table.eval(x, mono);
                          for (double mv : mono) total += w * v * std::abs(mv);
                      });
        rep.radii.push_back(r);
        if (!rep.totals.empty()) rep.differences.push_back(std::abs(total - rep.totals.back()));
        rep.totals.push_back(total);
    }
    if (rep.differences.size() >= 2) {
        const double last = rep.differences.back();
        const double prev = rep.differences[rep.differences.size() - 2];
        const double scale = std::max(1.0, rep.totals.back());
        rep.converged = last <= std::max(ctx.abs_tol, 1e-6 * scale) ||
                        (last < prev && last <= 1e-3 * scale);
    }
    return rep;
}

}  // namespace aniso
