#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aniso/cover.hpp"
#include "aniso/error.hpp"
#include "aniso/hardy.hpp"
#include "aniso/polyproj.hpp"
#include "aniso/quad.hpp"

namespace aniso {

/// gamma = ||b||_q^{1/(1/q - 1/p)} and the integer r with 2^{-r-1} < gamma <= 2^{-r}.
inline std::pair<double, int> gamma_and_r(double lq_norm_value, const AdmissibleTriple& t) {
    if (!(lq_norm_value > 0.0)) throw DegenerateMolecule("the zero function has no level structure");
    const double expo = 1.0 / (inverse_exponent(t.q) - 1.0 / t.p);
    const double gamma = std::pow(lq_norm_value, expo);
    int r = static_cast<int>(std::floor(-std::log2(gamma)));
    // Guard the bracket against rounding in log2.
    while (!(gamma <= std::exp2(-r))) --r;
    while (!(std::exp2(-r - 1) < gamma)) ++r;
    return {gamma, r};
}

inline std::pair<double, int> gamma_and_r(const Molecule& b) {
    return gamma_and_r(b.norms.lq, b.profile.triple);
}

/// Smallest positive integer ell >= the sampled nesting shift for which
/// theta(x, t) lies in theta(x, t - s) for all sampled (x, t) and s in [ell, ell + 8].
inline int choose_ell(const CoverSpec& spec, std::uint64_t seed = 20240917, size_t samples = 256) {
    std::mt19937_64 rng(seed);
    const auto pts = sample_point_levels(spec, samples, rng, -8.0, 8.0);
    const double shift = nesting_shift(spec, pts);
    const int ell = std::max(1, static_cast<int>(std::ceil(shift - 1e-9)));
    if (!nesting_holds(spec, pts, ell, ell + 8.0, 32))
        throw CoverDefect("nesting fails at the chosen shift ell = " + std::to_string(ell));
    return ell;
}

struct DecomposeOptions {
    int j_max = 40;
    double lambda_floor = 1e-12;   // lambda_j^p below this times the running sum counts as negligible
    int quiet_levels = 3;          // consecutive negligible levels required to stop
    double tail_tol = 1e-12;       // int_{E_j^c} |b| relative to ||b||_1
    double reconstruction_tol = 1e-3;
    bool require_reconstruction = true;
    AtomOptions atom{};
    MoleculeOptions molecule{};
    std::uint64_t nesting_seed = 20240917;
};

struct Level {
    int j = 0;
    double t = 0.0;                   // E_j = theta(x0, t), t = r - j ell
    Ellipsoid e = Ellipsoid::unit_ball(1);
    std::vector<double> moments;       // moments in x - x0 matched by P_{m,j}
    std::shared_ptr<const EllipsoidPolynomial> p;
    double p_l1 = 0.0;                 // ||P_{m,j}||_1
    double p_l1_bound = 0.0;           // (1/|B|) sum_alpha |local moment_alpha| ||Q_alpha||_{L1(B)}
    double tail_l1 = 0.0;              // int_{E_j^c} |b|
    double lambda = 0.0;               // coefficient of the term hosted on E_j (0 when skipped)
};

struct RegionMoments {
    std::vector<double> signed_moments;  // int b (x - x0)^gamma
    double mass = 0.0;                   // int |b|
    std::vector<double> radial;          // int |b| |x - x0|^k for k = 0..m
};

struct DecompositionState {
    Point x0;
    MolecularProfile profile;
    double gamma = 0.0;
    int r = 0;
    int ell = 1;
    int j_max = 0;
    std::vector<Level> levels;  // E_0 .. E_J
    std::vector<RegionMoments> shells;  // b over E_{j+1} \ E_j
    std::vector<int> defect_levels;     // per degree, the term carrying the numerical moment defect of b
    bool certificate = false;        // the truncation rule was met before the cap
    bool p_l1_stalled = false;       // ||P_j||_1 non-decreasing over 5 levels with t_j < 0
};

namespace detail {

/// Signed moments in x - x0 and the L1 masses of b over a region.
inline RegionMoments region_moments(const SampledFunction& b, int m, const Point& x0, const Region& region,
                                    const QuadContext& ctx) {
    const MonomialTable table(ctx.dim(), m);
    std::vector<double> mono(table.size());
    RegionMoments out{std::vector<double>(table.size(), 0.0), 0.0, std::vector<double>(static_cast<size_t>(m) + 1, 0.0)};
    double radius = 0.0;
    if (!region.bounded()) {
        if (b.support) {
            radius = (b.support->center() - region.center).norm() + b.support->sigma_max();
        } else {
            radius = truncation_radius(b, region, ctx, m);
        }
        // Nothing of b reaches the complement.
        if (region.excluded && b.support) {
            const Ellipsoid& ex = *region.excluded;
            const Point off = ex.inverse() * (b.support->center() - ex.center());
            if (off.norm() + operator_norm(Matrix(ex.inverse() * b.support->matrix())) < 1.0 - 1e-12) return out;
        }
    }
    for_each_node(region, all_breaks(b), ctx, radius, [&](const Point& x, double w) {
        const double v = b(x);
        if (v == 0.0) return;
        const Point y = x - x0;
        table.eval(y, mono);
        for (size_t i = 0; i < mono.size(); ++i) out.signed_moments[i] += w * v * mono[i];
        out.mass += w * std::abs(v);
        const double ry = y.norm();
        double pw = w * std::abs(v);
        for (double& rk : out.radial) {
            rk += pw;
            pw *= ry;
        }
    });
    return out;
}

/// ||Q_alpha||_{L1(B)} for every alpha, cached per (m, n).
inline const std::vector<double>& dual_l1_norms(int m, int n) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::vector<double>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{m, n}];
    if (slot.empty()) {
        const auto db = dual_basis(m, n);
        const QuadContext ctx(n);
        for (size_t a = 0; a < db->indices.size(); ++a) {
            const Polynomial qa = db->q(a);
            SampledFunction f;
            f.eval = [qa](const Point& u) { return qa(u); };
            slot.push_back(lq_norm(f, 1.0, Ellipsoid::unit_ball(n), ctx));
        }
    }
    return slot;
}

/// W_j = b chi_{E_j} - P_j.
inline double w_value(const SampledFunction& b, const Level& lv, const Point& x) {
    const double bv = lv.e.contains(x) ? b(x) : 0.0;
    return bv - (*lv.p)(x);
}

/// The term hosted on E_k: W_0 for k = 0, W_k - W_{k-1} otherwise.
inline SampledFunction term_function(const SampledFunction& b, const std::vector<Level>& levels, size_t k,
                                     double scale) {
    auto bp = std::make_shared<const SampledFunction>(b);
    SampledFunction f;
    const Level cur = levels[k];
    if (k == 0) {
        f.eval = [bp, cur, scale](const Point& x) { return scale * w_value(*bp, cur, x); };
    } else {
        const Level prev = levels[k - 1];
        // On E_{k-1} the b parts cancel exactly; leaving them in would cost
        // all significant digits once P_k - P_{k-1} is small next to b.
        f.eval = [bp, cur, prev, scale](const Point& x) {
            if (!cur.e.contains(x)) return 0.0;
            const double bv = prev.e.contains(x) ? 0.0 : (*bp)(x);
            return scale * (bv - (*cur.p)(x) + (*prev.p)(x));
        };
        f.breaks.push_back(prev.e);
    }
    f.support = cur.e;
    f.breaks.insert(f.breaks.end(), b.breaks.begin(), b.breaks.end());
    if (b.support) f.breaks.push_back(*b.support);
    return f;
}

}  // namespace detail

/// Levels E_j = theta(x0, r - j ell), projections P_{m,j} and the tight
/// coefficients, grown until the truncation rule holds or j_max is reached.
/// Outer levels take the moments of b chi_{E_j} as minus the moments of b
/// beyond E_j, so levels covering the support of b get P_{m,j} = 0 exactly.
inline DecompositionState build_levels(const Molecule& mol, int r, int ell, const CoverSpec& spec, int j_max,
                                       const QuadContext& ctx, const DecomposeOptions& opt = {}) {
    if (j_max < 0) throw ContractError("j_max must be non-negative");
    const SampledFunction& b = mol.f;
    const int m = mol.profile.triple.m;
    const double p = mol.profile.triple.p, q = mol.profile.triple.q;
    const double gap = 1.0 / p - inverse_exponent(q);
    const int n = spec.dim();
    DecompositionState st;
    st.x0 = mol.x0;
    st.profile = mol.profile;
    st.r = r;
    st.ell = ell;
    st.j_max = j_max;
    st.gamma = std::pow(mol.norms.lq, 1.0 / -gap);
    const double b_l1 = lq_norm(b, 1.0, Region::whole_space(mol.x0), ctx);
    const double tail_tol = opt.tail_tol * std::max(b_l1, std::numeric_limits<double>::min());

    auto make_level = [&](int j) {
        Level lv;
        lv.j = j;
        lv.t = r - static_cast<double>(j) * ell;
        lv.e = spec.theta(mol.x0, lv.t);
        if (!st.levels.empty()) {
            const Ellipsoid& inner = st.levels.back().e;
            if (operator_norm(Matrix(lv.e.inverse() * inner.matrix())) > 1.0 + 1e-12)
                throw DecompositionDefect("levels", "E_" + std::to_string(j - 1) + " is not contained in E_" +
                                                        std::to_string(j));
        }
        lv.tail_l1 = detail::region_moments(b, m, mol.x0, Region::complement(lv.e), ctx).mass;
        return lv;
    };
    auto add_shell = [&]() {
        const size_t j = st.shells.size();
        st.shells.push_back(
            detail::region_moments(b, m, mol.x0, Region::shell(st.levels[j + 1].e, st.levels[j].e), ctx));
    };

    st.levels.push_back(make_level(0));
    // Grow geometrically until the tail of b is negligible, then a few quiet levels.
    int j_geo = 0;
    while (j_geo < j_max && st.levels.back().tail_l1 > tail_tol) {
        st.levels.push_back(make_level(++j_geo));
        add_shell();
    }
    int target = std::min(j_max, j_geo + opt.quiet_levels);

    const auto& q_l1 = detail::dual_l1_norms(m, n);
    const double ball = unit_ball_volume(n);
    for (;;) {
        while (static_cast<int>(st.levels.size()) <= target) {
            st.levels.push_back(make_level(static_cast<int>(st.levels.size())));
            add_shell();
        }
        const int big_j = target;
        // Moments of b chi_{E_j}. Below the defect level they are accumulated
        // outward from E_0; from it on they are minus the moments beyond E_j.
        // The two routes differ by the numerical total moment of b, which
        // lands on a single term per degree: the piece of b where that degree
        // has the most weight, so the defect stays small relative to the term.
        const RegionMoments core = detail::region_moments(b, m, mol.x0, Region::ellipsoid(st.levels[0].e), ctx);
        st.defect_levels.assign(static_cast<size_t>(m) + 1, 0);
        for (size_t d = 0; d <= static_cast<size_t>(m); ++d) {
            double heaviest = core.radial[d];
            for (int k = 1; k <= big_j; ++k) {
                const double wk = st.shells[static_cast<size_t>(k - 1)].radial[d];
                if (wk > heaviest) {
                    heaviest = wk;
                    st.defect_levels[d] = k;
                }
            }
        }
        const std::vector<double> beyond =
            detail::region_moments(b, m, mol.x0, Region::complement(st.levels[static_cast<size_t>(big_j)].e), ctx)
                .signed_moments;
        std::vector<std::vector<double>> outward(static_cast<size_t>(big_j) + 1), inward(outward.size());
        outward[0] = core.signed_moments;
        for (size_t j = 1; j < outward.size(); ++j) {
            outward[j] = outward[j - 1];
            for (size_t i = 0; i < outward[j].size(); ++i) outward[j][i] += st.shells[j - 1].signed_moments[i];
        }
        inward.back() = beyond;
        for (int j = big_j - 1; j >= 0; --j) {
            const auto ju = static_cast<size_t>(j);
            inward[ju] = inward[ju + 1];
            for (size_t i = 0; i < inward[ju].size(); ++i) inward[ju][i] += st.shells[ju].signed_moments[i];
        }
        const auto& alphas = multi_indices(n, m);
        std::vector<std::vector<double>> inner(outward.size(), std::vector<double>(alphas.size()));
        for (size_t j = 0; j < inner.size(); ++j)
            for (size_t i = 0; i < alphas.size(); ++i) {
                const int lvl = st.defect_levels[static_cast<size_t>(alphas[i].degree())];
                inner[j][i] = static_cast<int>(j) < lvl ? outward[j][i] : -inward[j][i];
            }
        for (int j = big_j; j >= 0; --j) {
            Level& lv = st.levels[static_cast<size_t>(j)];
            lv.moments = inner[static_cast<size_t>(j)];
            const Eigen::MatrixXd tr = monomial_transform(lv.e.inverse(), m);
            const Eigen::VectorXd mu =
                tr * Eigen::Map<const Eigen::VectorXd>(lv.moments.data(), static_cast<Eigen::Index>(lv.moments.size()));
            std::vector<double> local(mu.data(), mu.data() + mu.size());
            lv.p = std::make_shared<const EllipsoidPolynomial>(project_from_local_moments(lv.e, m, local));
            lv.p_l1 = lq_norm(lv.p->as_function(), 1.0, lv.e, ctx);
            lv.p_l1_bound = 0.0;
            for (size_t i = 0; i < local.size(); ++i) lv.p_l1_bound += std::abs(local[i]) * q_l1[i];
            lv.p_l1_bound /= ball;
            if (lv.p_l1 > lv.p_l1_bound * (1.0 + 1e-8) + 1e-300)
                throw DecompositionDefect("levels", "projection norm exceeds its moment bound at j = " +
                                                        std::to_string(j));
        }
        // Tight coefficients.
        double sum_p = 0.0;
        int quiet = 0;
        for (int k = 0; k <= big_j; ++k) {
            const auto f = detail::term_function(b, st.levels, static_cast<size_t>(k), 1.0);
            const Ellipsoid& host = st.levels[static_cast<size_t>(k)].e;
            const double norm = lq_norm(f, q, Region::ellipsoid(host), ctx);
            const double lam = norm == 0.0 ? 0.0 : norm * std::pow(host.volume(), gap);
            st.levels[static_cast<size_t>(k)].lambda = lam;
            const double lp = std::pow(lam, p);
            quiet = (k > 0 && lp <= opt.lambda_floor * sum_p) ? quiet + 1 : 0;
            sum_p += lp;
        }
        st.certificate = quiet >= opt.quiet_levels && st.levels[static_cast<size_t>(big_j)].tail_l1 <= tail_tol;
        if (st.certificate || target >= j_max) break;
        target = std::min(j_max, target + opt.quiet_levels);
    }
    st.levels.resize(static_cast<size_t>(target) + 1);
    st.shells.resize(static_cast<size_t>(target));

    int run = 0;
    for (size_t j = 1; j < st.levels.size(); ++j) {
        const auto& a = st.levels[j - 1];
        const auto& c = st.levels[j];
        if (a.t < 0.0 && c.p_l1 > 0.0 && c.p_l1 >= a.p_l1) {
            if (++run >= 4) st.p_l1_stalled = true;  // five consecutive non-decreasing values
        } else {
            run = 0;
        }
    }
    return st;
}

struct AtomTerm {
    int level = 0;         // host E_level; level 0 carries W_0
    double t = 0.0;
    double lambda = 0.0;   // in the scale of the input function
    Ellipsoid host = Ellipsoid::unit_ball(1);
    SampledFunction atom;
    AtomReport report;
};

struct RegimeSlope {
    double measured = std::numeric_limits<double>::quiet_NaN();
    double theoretical = 0.0;  // -ell R for the regime
    size_t points = 0;
    bool applicable = false;   // at least two nonzero coefficients
    bool passed = true;        // measured <= 0.9 theoretical, vacuous when not applicable
};

struct DecompositionResult {
    std::vector<AtomTerm> terms;
    std::vector<Level> levels;
    double sum_lambda_p = 0.0;
    double reconstruction_l1_error = 0.0;
    double b_l1 = 0.0;
    double gamma = 0.0;
    int r = 0;
    int ell = 1;
    int j_max = 0;
    bool certificate = false;
    bool p_l1_stalled = false;
    double scale = 1.0;           // b = scale * (normalized molecule)
    double molecular_norm = 0.0;  // M(b) before normalization
    RegimeSlope w1;               // r - j ell < 0
    RegimeSlope w2;               // r - j ell >= 0
    bool empty() const { return terms.empty(); }
    double reconstruction_relative() const { return b_l1 > 0.0 ? reconstruction_l1_error / b_l1 : 0.0; }
};

/// Least-squares slope of log2 lambda against j for the difference terms in one regime.
inline RegimeSlope regime_slope(const std::vector<Level>& levels, int r, int ell, double rate, bool inner) {
    RegimeSlope s;
    s.theoretical = -ell * rate;
    std::vector<double> xs, ys;
    for (size_t k = 1; k < levels.size(); ++k) {
        const int j = static_cast<int>(k) - 1;  // lambda_j multiplies W_{j+1} - W_j
        const bool is_inner = r - j * ell >= 0;
        if (is_inner != inner || !(levels[k].lambda > 0.0)) continue;
        xs.push_back(j);
        ys.push_back(std::log2(levels[k].lambda));
    }
    s.points = xs.size();
    if (xs.size() < 2) return s;
    s.applicable = true;
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    s.measured = sxy / sxx;
    s.passed = s.measured <= 0.9 * s.theoretical;
    return s;
}

/// Decay exponents of the two regimes.
inline std::pair<double, double> regime_rates(const MolecularProfile& pr) {
    const double gap = 1.0 / pr.triple.p - inverse_exponent(pr.triple.q);
    const int m = pr.triple.m;
    return {m * (pr.a6 - pr.a4) + pr.d * pr.a6 / pr.a4 - gap, m * (pr.a4 - pr.a6) + pr.d * pr.a4 / pr.a6 - gap};
}

/// Atoms from the levels; `scale` multiplies every coefficient.
inline DecompositionResult emit_atoms(const DecompositionState& st, const Molecule& mol, const QuadContext& ctx,
                                      double scale = 1.0, const DecomposeOptions& opt = {}) {
    DecompositionResult res;
    res.levels = st.levels;
    res.gamma = st.gamma;
    res.r = st.r;
    res.ell = st.ell;
    res.j_max = st.j_max;
    res.certificate = st.certificate;
    res.p_l1_stalled = st.p_l1_stalled;
    res.scale = scale;
    const auto& tr = st.profile.triple;
    for (size_t k = 0; k < st.levels.size(); ++k) {
        const Level& lv = st.levels[k];
        res.levels[k].lambda = lv.lambda * scale;
        if (!(lv.lambda > 0.0)) continue;
        AtomTerm term;
        term.level = static_cast<int>(k);
        term.t = lv.t;
        term.host = lv.e;
        term.lambda = lv.lambda * scale;
        term.atom = detail::term_function(mol.f, st.levels, k, 1.0 / lv.lambda);
        term.report = validate_atom(term.atom, lv.e, tr, ctx, opt.atom);
        if (!term.report.passed())
            throw DecompositionDefect("atoms", "atom on level " + std::to_string(k) + " fails validation (norm ratio " +
                                                   std::to_string(term.report.norm_margin()) + ", moment residual " +
                                                   std::to_string(term.report.max_moment_residual) + ")");
        res.sum_lambda_p += std::pow(term.lambda, tr.p);
        res.terms.push_back(std::move(term));
    }

    // ||b - sum lambda_j a_j||_1 over a ball about x0 holding every host and
    // the essential support of b.
    const SampledFunction& b = mol.f;
    double radius = st.levels.back().e.sigma_max();
    if (b.support) {
        radius = std::max(radius, (b.support->center() - mol.x0).norm() + b.support->sigma_max());
    } else {
        radius = std::max(radius, truncation_radius(b, Region::whole_space(mol.x0), ctx));
    }
    std::vector<Ellipsoid> breaks = detail::all_breaks(b);
    for (const auto& lv : st.levels) breaks.push_back(lv.e);
    double err = 0.0, mass = 0.0;
    for_each_node(Region::whole_space(mol.x0, radius), breaks, ctx, radius, [&](const Point& x, double w) {
        const double bv = b(x) * scale;
        double sum = 0.0;
        for (const auto& term : res.terms) sum += term.lambda * term.atom(x);
        err += w * std::abs(bv - sum);
        mass += w * std::abs(bv);
    });
    res.reconstruction_l1_error = err;
    res.b_l1 = mass;

    const auto [r1, r2] = regime_rates(st.profile);
    res.w1 = regime_slope(res.levels, st.r, st.ell, r1, false);
    res.w2 = regime_slope(res.levels, st.r, st.ell, r2, true);
    if (opt.require_reconstruction && res.reconstruction_l1_error > opt.reconstruction_tol * res.b_l1)
        throw DecompositionDefect("reconstruction", "L1 reconstruction error " + std::to_string(res.reconstruction_relative()) +
                                                        " of ||b||_1 after " + std::to_string(st.levels.size()) +
                                                        " levels");
    return res;
}

/// The full pipeline: norm, normalization, levels, atoms. Coefficients are
/// returned in the scale of b.
inline DecompositionResult decompose(const SampledFunction& b, const Point& x0, const MolecularProfile& pr,
                                     const CoverSpec& spec, const QuadContext& ctx, const DecomposeOptions& opt = {}) {
    const Molecule mol = molecular_norm(b, x0, pr, spec, ctx, opt.molecule);
    DecompositionResult res;
    res.j_max = opt.j_max;
    if (mol.norms.lq == 0.0) return res;
    res.molecular_norm = mol.norms.m;
    const double s = normalization_scale(pr, mol.norms);
    const Molecule unit = scale_molecule(mol, 1.0 / s);
    const auto [gamma, r] = gamma_and_r(unit);
    const int ell = choose_ell(spec, opt.nesting_seed);
    const auto st = build_levels(unit, r, ell, spec, opt.j_max, ctx, opt);
    res = emit_atoms(st, unit, ctx, s, opt);
    res.molecular_norm = mol.norms.m;
    return res;
}

}  // namespace aniso
