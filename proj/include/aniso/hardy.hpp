#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "aniso/cover.hpp"
#include "aniso/error.hpp"
#include "aniso/geometry.hpp"
#include "aniso/metric.hpp"
#include "aniso/multiindex.hpp"
#include "aniso/polyproj.hpp"
#include "aniso/quad.hpp"

namespace aniso {

namespace detail {

/// min{m in N : m > threshold}. Thresholds that are integers up to rounding
/// noise are snapped first so that exact integer cases round-trip.
inline int smallest_integer_above(double threshold) {
    const double r = std::round(threshold);
    if (std::abs(threshold - r) <= 1e-12 * std::max(1.0, std::abs(r))) threshold = r;
    return static_cast<int>(std::floor(threshold)) + 1;
}

}  // namespace detail

inline double n_p_threshold(const CoverParameters& a, int n, double p) {
    return (std::max(1.0, a.a4) * n + 1.0) / (a.a6 * p);
}

inline int n_p(const CoverParameters& a, int n, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw ContractError("p must lie in (0, 1]");
    return detail::smallest_integer_above(n_p_threshold(a, n, p));
}

inline double n_tilde_p_threshold(const CoverParameters& a, int n, double p) {
    return (a.a4 * n_p(a, n, p) + 1.0) / a.a6;
}

inline int n_tilde_p(const CoverParameters& a, int n, double p) {
    return detail::smallest_integer_above(n_tilde_p_threshold(a, n, p));
}

struct AdmissibleTriple {
    double p = 1.0;
    double q = 2.0;
    int m = 0;
    int n_p = 0;
    int n_tilde_p = 0;
};

/// Validates (p, q, m) against the cover constants in dimension n.
inline AdmissibleTriple admissible_triple(double p, double q, int m, const CoverParameters& a, int n) {
    if (!(p > 0.0 && p <= 1.0)) throw AdmissibilityError("p must lie in (0, 1]");
    if (!(q >= 1.0)) throw AdmissibilityError("q must be at least 1");
    if (!(p < q)) throw AdmissibilityError("need p < q");
    AdmissibleTriple t{p, q, m, n_p(a, n, p), n_tilde_p(a, n, p)};
    if (m < t.n_p)
        throw AdmissibilityError("m = " + std::to_string(m) + " is below N_p = " + std::to_string(t.n_p));
    if (m > kMaxDegree) throw AdmissibilityError("m exceeds the supported projection degree");
    return t;
}

/// 1/q with 1/inf = 0.
inline double inverse_exponent(double q) { return std::isinf(q) ? 0.0 : 1.0 / q; }

inline double d_threshold(const AdmissibleTriple& t, const CoverParameters& a, int n) {
    const double iq = inverse_exponent(t.q), ip = 1.0 / t.p;
    const double m = t.m;
    const double r = a.a4 / a.a6;
    return std::max({a.a4 * (m + n - n * iq), r * (1.0 - iq + m * a.a4), r * (ip - iq + m * (a.a4 - a.a6))});
}

struct MolecularProfile {
    AdmissibleTriple triple;
    double d = 0.0;
    double sigma = 0.0;
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double d_threshold = 0.0;
    int n = 1;
    double a4 = 1.0;
    double a6 = 1.0;
};

inline MolecularProfile molecular_profile(const AdmissibleTriple& t, double d, const CoverParameters& a, int n) {
    MolecularProfile pr;
    pr.triple = t;
    pr.d = d;
    pr.n = n;
    pr.a4 = a.a4;
    pr.a6 = a.a6;
    pr.d_threshold = d_threshold(t, a, n);
    if (!(d > pr.d_threshold))
        throw AdmissibilityError("d = " + std::to_string(d) + " does not exceed the threshold " +
                                 std::to_string(pr.d_threshold));
    const double gap = 1.0 / t.p - inverse_exponent(t.q);
    pr.sigma = gap / d;
    // d (1 - sigma) = d - gap; writing it this way keeps alpha1 = alpha2 = 1
    // exact when a4 = a6.
    const double den = d - gap;
    const double spread = t.m * (a.a4 - a.a6);
    pr.alpha1 = (-gap + d * a.a6 / a.a4 - spread) / den;
    pr.alpha2 = (-gap + d * a.a4 / a.a6 + spread) / den;
    return pr;
}

/// M from its two ingredient norms.
inline double molecular_norm_value(const MolecularProfile& pr, double lq, double weighted) {
    if (lq == 0.0) return 0.0;
    const double e = 1.0 - pr.sigma;
    return std::pow(weighted, pr.sigma) * (std::pow(lq, e * pr.alpha1) + std::pow(lq, e * pr.alpha2));
}

struct MolecularNorms {
    double lq = 0.0;        // ||b||_q
    double weighted = 0.0;  // ||b rho(x0, .)^d||_q
    double m = 0.0;         // M_{p,q,m,d}(b)
    bool approximate = false;
};

struct MomentCheck {
    std::vector<double> residuals;  // |int f y^alpha| / int |f| |y|^{|alpha|}
    double max_residual = 0.0;
};

/// Relative moment residuals in y = x - origin for all |alpha| <= m.
inline MomentCheck relative_moment_residuals(const SampledFunction& f, int m, const Point& origin,
                                             const Region& region, const QuadContext& ctx,
                                             const std::vector<Ellipsoid>& extra_breaks = {}) {
    const MonomialTable table(ctx.dim(), m);
    const auto& idx = table.indices();
    std::vector<double> mono(table.size()), sig(table.size(), 0.0), absum(static_cast<size_t>(m) + 1, 0.0);
    const Region reg = detail::effective_region(f, region);
    const double radius = reg.bounded() ? 0.0 : truncation_radius(f, reg, ctx, m);
    for_each_node(reg, detail::all_breaks(f, extra_breaks), ctx, radius, [&](const Point& x, double w) {
        const double v = f(x);
        if (v == 0.0) return;
        const Point y = x - origin;
        table.eval(y, mono);
        for (size_t j = 0; j < mono.size(); ++j) sig[j] += w * v * mono[j];
        const double r = y.norm();
        double rk = 1.0;
        for (auto& s : absum) {
            s += w * std::abs(v) * rk;
            rk *= r;
        }
    });
    MomentCheck out;
    out.residuals.resize(table.size(), 0.0);
    for (size_t j = 0; j < sig.size(); ++j) {
        const double den = absum[static_cast<size_t>(idx[j].degree())];
        out.residuals[j] = den > 0.0 ? std::abs(sig[j]) / den : 0.0;
        out.max_residual = std::max(out.max_residual, out.residuals[j]);
    }
    return out;
}

struct Molecule {
    SampledFunction f;
    Point x0;
    MolecularProfile profile;
    MolecularNorms norms;
    MomentCheck moments;
    double scale = 1.0;  // f = original / scale
};

struct MoleculeOptions {
    double moment_tol = 1e-6;
    RhoOptions rho{};
    // Relative change allowed between the weighted norm on balls of radius R/2 and R.
    double weighted_cauchy_tol = 1e-3;
};

namespace detail {

/// ||b rho(x0, .)^d||_q by quadrature, with rho evaluated at every node.
inline double weighted_norm_on(const SampledFunction& b, const Point& x0, double d, double q,
                               const CoverSpec& spec, const Region& region, double radius,
                               const QuadContext& ctx, const RhoOptions& ro) {
    double sum = 0.0;
    for_each_node(region, all_breaks(b), ctx, radius, [&](const Point& x, double w) {
        const double v = std::abs(b(x));
        if (v == 0.0) return;
        const double r = rho(spec, x0, x, ro).value;
        if (!std::isfinite(r)) throw NotAMolecule("rho(x0, x) is not finite at a quadrature node");
        sum += w * std::pow(v * std::pow(r, d), q);
    });
    return std::pow(sum, 1.0 / q);
}

}  // namespace detail

/// Validates (M1) and (M2) for b about x0 and computes the three norms.
/// Compactly supported b needs a support hint; otherwise b needs a decay hint
/// fast enough for b rho^d to lie in L^q.
inline Molecule molecular_norm(const SampledFunction& b, const Point& x0, const MolecularProfile& pr,
                               const CoverSpec& spec, const QuadContext& ctx, const MoleculeOptions& opt = {}) {
    if (x0.size() != spec.dim() || ctx.dim() != spec.dim()) throw ContractError("molecule dimension mismatch");
    const double q = pr.triple.q;
    const int m = pr.triple.m;
    Molecule mol;
    mol.f = b;
    mol.x0 = x0;
    mol.profile = pr;
    const Region whole = Region::whole_space(x0);
    mol.moments = relative_moment_residuals(b, m, Point::Zero(spec.dim()), whole, ctx);
    if (mol.moments.max_residual > opt.moment_tol)
        throw NotAMolecule("moment residual " + std::to_string(mol.moments.max_residual) + " exceeds tolerance");

    if (!b.support) {
        if (!b.decay) throw NotAMolecule("molecule needs a support or decay hint");
        const auto rep = check_prop24(b, m, x0, ctx);
        if (!rep.converged) throw NotAMolecule("moments of |b| do not converge");
        if (std::isinf(q)) throw ContractError("q = inf molecules need compact support");
        // rho(x0, x) <~ |x|^{1/a6} far away, so b rho^d decays like |x|^{d/a6 - k}.
        const double k = b.decay->exponent - pr.d / pr.a6;
        if (!(k * q > spec.dim())) throw NotAMolecule("b rho(x0, .)^d is not in L^q for the declared decay");
    }

    mol.norms.lq = lq_norm(b, q, whole, ctx);
    if (std::isinf(q)) {
        double s = 0.0;
        for (const auto& x : ellipsoid_grid(*b.support, ctx.sup_grid_points)) {
            const double v = std::abs(b(x));
            if (v != 0.0) s = std::max(s, v * std::pow(rho(spec, x0, x, opt.rho).value, pr.d));
        }
        mol.norms.weighted = s;
        mol.norms.approximate = true;
    } else if (b.support) {
        mol.norms.weighted = detail::weighted_norm_on(b, x0, pr.d, q, spec, Region::ellipsoid(*b.support), 0.0,
                                                      ctx, opt.rho);
    } else {
        SampledFunction hint = b;
        hint.decay->exponent = b.decay->exponent - pr.d / pr.a6;
        const double radius = truncation_radius(hint, whole, ctx, 0.0, q);
        const double full = detail::weighted_norm_on(b, x0, pr.d, q, spec, whole, radius, ctx, opt.rho);
        const double half = detail::weighted_norm_on(b, x0, pr.d, q, spec, whole, 0.5 * radius, ctx, opt.rho);
        if (std::abs(full - half) > opt.weighted_cauchy_tol * full)
            throw NotAMolecule("weighted norm does not settle on growing balls");
        mol.norms.weighted = full;
    }
    mol.norms.m = molecular_norm_value(pr, mol.norms.lq, mol.norms.weighted);
    return mol;
}

/// The molecule c * b; norms follow by homogeneity.
inline Molecule scale_molecule(const Molecule& mol, double c) {
    if (!(c > 0.0)) throw ContractError("scale factor must be positive");
    Molecule out = mol;
    auto f = std::make_shared<const SampledFunction>(mol.f);
    out.f.eval = [f, c](const Point& x) { return c * (*f)(x); };
    out.norms.lq *= c;
    out.norms.weighted *= c;
    out.norms.m = molecular_norm_value(mol.profile, out.norms.lq, out.norms.weighted);
    out.scale = mol.scale / c;
    return out;
}

/// s > 0 with M(b / s) = 1, to relative accuracy 1e-8 or better.
inline double normalization_scale(const MolecularProfile& pr, const MolecularNorms& nm) {
    if (!(nm.lq > 0.0) || !(nm.weighted > 0.0)) throw DegenerateMolecule("cannot normalize a zero molecule");
    // g(u) = log M(b e^{-u}) is strictly decreasing: every exponent of e^{-u} is positive.
    auto g = [&](double u) {
        const double c = std::exp(-u);
        return std::log(molecular_norm_value(pr, nm.lq * c, nm.weighted * c));
    };
    double lo = std::log(nm.lq), hi = lo;
    double step = 1.0;
    while (g(lo) < 0.0) {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while (g(hi) > 0.0) {
        hi += step;
        step *= 2.0;
    }
    if (lo == hi) return std::exp(lo);
    std::uintmax_t iters = 200;
    const auto [a, b] =
        boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(45), iters);
    return std::exp(0.5 * (a + b));
}

/// b / s with M(b / s) = 1.
inline Molecule normalize(const Molecule& mol) {
    return scale_molecule(mol, 1.0 / normalization_scale(mol.profile, mol.norms));
}

struct AtomReport {
    bool support_ok = true;
    bool norm_ok = true;
    bool moments_ok = true;
    double max_outside = 0.0;   // max |a| sampled outside the host
    double norm = 0.0;          // ||a||_q
    double norm_bound = 0.0;    // |host|^{1/q - 1/p}
    double max_moment_residual = 0.0;

    bool passed() const { return support_ok && norm_ok && moments_ok; }
    double norm_margin() const { return norm_bound > 0.0 ? norm / norm_bound : 0.0; }
};

struct AtomOptions {
    double norm_slack = 1e-6;
    double moment_tol = 1e-6;
};

/// Checks the three atom conditions; moments are taken about the host center.
inline AtomReport validate_atom(const SampledFunction& a, const Ellipsoid& host, const AdmissibleTriple& t,
                                const QuadContext& ctx, const AtomOptions& opt = {}) {
    AtomReport r;
    const int n = host.dim();
    for (const auto& dir : ctx.directions())
        for (double g : {1.0 + 1e-9, 1.01, 1.5, 2.0, 4.0})
            r.max_outside = std::max(r.max_outside, std::abs(a(host.from_local(Point(g * dir)))));
    if (n == 1)
        for (double g : {-1.0, 1.0})
            for (double s : {1.0 + 1e-9, 1.001, 1.01, 1.1, 1.5, 2.0, 4.0})
                r.max_outside = std::max(r.max_outside, std::abs(a(host.from_local(Point::Constant(1, g * s)))));
    r.support_ok = r.max_outside == 0.0;

    SampledFunction inside = a;
    inside.support = host;
    r.norm = lq_norm(inside, t.q, Region::ellipsoid(host), ctx, a.support ? std::vector{*a.support}
                                                                           : std::vector<Ellipsoid>{});
    r.norm_bound = std::pow(host.volume(), inverse_exponent(t.q) - 1.0 / t.p);
    r.norm_ok = r.norm <= r.norm_bound * (1.0 + opt.norm_slack);

    const auto mc = relative_moment_residuals(inside, t.m, host.center(), Region::ellipsoid(host), ctx,
                                              a.support ? std::vector{*a.support} : std::vector<Ellipsoid>{});
    r.max_moment_residual = mc.max_residual;
    r.moments_ok = mc.max_residual <= opt.moment_tol;
    return r;
}

/// a(c + M u) (|host| / |B|)^{1/p}: the atom carried to the unit ball, where
/// it is again an atom for the same triple.
inline SampledFunction pullback_to_unit_ball(const SampledFunction& a, const Ellipsoid& host, double p) {
    const double factor = std::pow(host.volume() / unit_ball_volume(host.dim()), 1.0 / p);
    auto f = std::make_shared<const SampledFunction>(a);
    SampledFunction out;
    out.eval = [f, host, factor](const Point& u) { return factor * (*f)(host.from_local(u)); };
    out.support = Ellipsoid::unit_ball(host.dim());
    for (const auto& b : a.breaks)
        out.breaks.emplace_back(host.to_local(b.center()), host.inverse() * b.matrix());
    if (a.support) out.breaks.emplace_back(host.to_local(a.support->center()), host.inverse() * a.support->matrix());
    return out;
}

/// max over t in t_grid of |int g(y) psi_{x,t}(y) dy| with
/// psi_{x,t}(y) = |det M_{x,t}^{-1}| psi(M_{x,t}^{-1}(x - y)).
inline double radial_maximal(const SampledFunction& g, const SampledFunction& psi, const Point& x,
                             const CoverSpec& spec, const std::vector<double>& t_grid, const QuadContext& ctx) {
    double best = 0.0;
    for (double t : t_grid) {
        const Matrix mt = spec.matrix(x, t);
        const Matrix inv = mt.inverse();
        const double jac = std::abs(inv.determinant());
        SampledFunction prod;
        prod.eval = [&](const Point& y) {
            const double gv = g(y);
            return gv == 0.0 ? 0.0 : gv * jac * psi(Point(inv * (x - y)));
        };
        prod.breaks = detail::all_breaks(g);
        if (psi.support) {
            // y = x - M u with u in c + A(B) is the ellipsoid (x - M c) + M A(B).
            const Ellipsoid s(Point(x - mt * psi.support->center()), Matrix(mt * psi.support->matrix()));
            prod.support = s;
            for (const auto& b : psi.breaks) prod.breaks.emplace_back(Point(x - mt * b.center()), Matrix(mt * b.matrix()));
        } else {
            prod.support = g.support;
            prod.decay = g.decay;
        }
        best = std::max(best, std::abs(integrate(prod, Region::whole_space(x), ctx)));
    }
    return best;
}

/// A exp(-1 / (1 - |u|^2)) cos(k . u) with u = S^{-1}(x - c), zero for |u| >= 1.
inline SampledFunction smooth_bump(const Point& center, const Matrix& shape, double amplitude = 1.0,
                                   const Point& frequency = Point()) {
    const Ellipsoid e(center, shape);
    const Point k = frequency.size() ? frequency : Point(Point::Zero(center.size()));
    SampledFunction f;
    f.eval = [e, k, amplitude](const Point& x) {
        const Point u = e.to_local(x);
        const double r2 = u.squaredNorm();
        if (r2 >= 1.0) return 0.0;
        return amplitude * std::exp(-1.0 / (1.0 - r2)) * std::cos(k.dot(u));
    };
    f.support = e;
    return f;
}

/// b = g - P chi_{E_K} with P the degree-m projection of g on E_K; E_K must
/// contain the support of g. All moments of b up to degree m vanish.
inline SampledFunction compact_molecule(const SampledFunction& g, const Ellipsoid& ek, int m, const QuadContext& ctx) {
    if (!g.support) throw ContractError("compact_molecule needs a support hint on g");
    const auto p = std::make_shared<const EllipsoidPolynomial>(project_ellipsoid(g, ek, m, ctx.refined()));
    auto gp = std::make_shared<const SampledFunction>(g);
    SampledFunction b;
    b.eval = [gp, p](const Point& x) { return (*gp)(x) - (*p)(x); };
    b.support = ek;
    b.breaks = g.breaks;
    b.breaks.push_back(*g.support);
    return b;
}

/// b = h - P chi_{E_K} with h = A (1 + |S^{-1}(x - c)|^2)^{-k/2} and P the
/// polynomial on E_K carrying the whole-space moments of h.
inline SampledFunction decaying_molecule(const Point& center, const Matrix& shape, double k, double amplitude,
                                         const Ellipsoid& ek, int m, const QuadContext& ctx) {
    const int n = static_cast<int>(center.size());
    if (!(k > n + m)) throw ContractError("decay exponent too small for the requested moments");
    const Ellipsoid s(center, shape);
    SampledFunction h;
    h.eval = [s, k, amplitude](const Point& x) {
        return amplitude * std::pow(1.0 + s.to_local(x).squaredNorm(), -0.5 * k);
    };
    h.decay = DecayHint{k, center, s.sigma_max() * std::pow(amplitude, 1.0 / k)};
    // Whole-space moments of h in the chart of E_K.
    const QuadContext fine = ctx.refined();
    const MonomialTable table(n, m);
    std::vector<double> mono(table.size()), mu(table.size(), 0.0);
    const Region whole = Region::whole_space(ek.center());
    const double radius = truncation_radius(h, whole, fine, m);
    for_each_node(whole, {ek, Ellipsoid(center, shape)}, fine, radius, [&](const Point& x, double w) {
        table.eval(ek.to_local(x), mono);
        const double v = h(x);
        for (size_t j = 0; j < mu.size(); ++j) mu[j] += w * v * mono[j];
    });
    const auto p = std::make_shared<const EllipsoidPolynomial>(project_from_local_moments(ek, m, mu));
    SampledFunction b;
    b.eval = [h, p](const Point& x) { return h(x) - (*p)(x); };
    b.decay = h.decay;
    b.breaks = {ek};
    return b;
}

}  // namespace aniso
