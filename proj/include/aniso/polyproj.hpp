#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aniso/error.hpp"
#include "aniso/geometry.hpp"
#include "aniso/multiindex.hpp"
#include "aniso/quad.hpp"

namespace aniso {

/// int_B x^alpha dx over the Euclidean unit ball of R^n (zero when some
/// component of alpha is odd).
inline double ball_monomial_moment(const MultiIndex& alpha, int n) {
    check_dimension(n);
    double log_num = 0.0;
    double beta_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (alpha[i] % 2 != 0) return 0.0;
        const double beta = 0.5 * (alpha[i] + 1);
        log_num += std::lgamma(beta);
        beta_sum += beta;
    }
    const double sphere = 2.0 * std::exp(log_num - std::lgamma(beta_sum));
    return sphere / (alpha.degree() + n);
}

/// Polynomial of degree <= m in n variables, monomial coefficients in
/// multi_indices(n, m) order.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(int n, int m) : n_(n), m_(m), coef_(num_monomials(n, m), 0.0) {}
    Polynomial(int n, int m, std::vector<double> coef) : n_(n), m_(m), coef_(std::move(coef)) {
        if (coef_.size() != num_monomials(n, m)) throw ContractError("coefficient count mismatch");
    }

    int dim() const { return n_; }
    int degree() const { return m_; }
    const std::vector<double>& coefficients() const { return coef_; }
    std::vector<double>& coefficients() { return coef_; }

    double operator()(const Point& x) const {
        const auto& idx = indices();
        double s = 0.0;
        for (size_t j = 0; j < coef_.size(); ++j)
            if (coef_[j] != 0.0) s += coef_[j] * monomial(x, idx[j]);
        return s;
    }

    double max_abs_coefficient() const {
        double m = 0.0;
        for (double c : coef_) m = std::max(m, std::abs(c));
        return m;
    }

private:
    const std::vector<MultiIndex>& indices() const {
        if (idx_.empty()) idx_ = multi_indices(n_, m_);
        return idx_;
    }

    int n_ = 1;
    int m_ = 0;
    std::vector<double> coef_;
    mutable std::vector<MultiIndex> idx_;
};

/// Polynomials Q_alpha of degree <= m with int_B Q_alpha x^beta = |B| delta.
struct DualBasis {
    int m = 0;
    int n = 1;
    std::vector<MultiIndex> indices;
    Eigen::MatrixXd gram;    // G_{alpha beta} = int_B x^{alpha+beta}
    Eigen::MatrixXd coeffs;  // column alpha holds the monomial coefficients of Q_alpha
    double duality_residual = 0.0;
    double c0 = 0.0;         // |B| max_B sum_alpha |Q_alpha|
    double c1 = 0.0;         // c0 / |B|

    Polynomial q(size_t alpha) const {
        std::vector<double> c(static_cast<size_t>(coeffs.rows()));
        for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
            c[static_cast<size_t>(i)] = coeffs(i, static_cast<Eigen::Index>(alpha));
        return Polynomial(n, m, std::move(c));
    }

    /// Monomial coefficients of sum_alpha w_alpha Q_alpha.
    Polynomial combine(const std::vector<double>& w) const {
        Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        Eigen::VectorXd c = coeffs * wv;
        return Polynomial(n, m, std::vector<double>(c.data(), c.data() + c.size()));
    }
};

namespace detail {

inline DualBasis build_dual_basis(int m, int n) {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    DualBasis db;
    db.m = m;
    db.n = n;
    db.indices = multi_indices(n, m);
    const auto sz = static_cast<Eigen::Index>(db.indices.size());
    const double vol = unit_ball_volume(n);
    db.gram.resize(sz, sz);
    for (Eigen::Index a = 0; a < sz; ++a)
        for (Eigen::Index b = 0; b < sz; ++b) {
            MultiIndex s;
            for (int i = 0; i < kMaxDim; ++i)
                s.e[static_cast<size_t>(i)] = db.indices[static_cast<size_t>(a)][i] + db.indices[static_cast<size_t>(b)][i];
            db.gram(a, b) = ball_monomial_moment(s, n);
        }
    const LMat g = db.gram.cast<long double>();
    Eigen::LDLT<LMat> ldlt(g);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw SolverError("Gram matrix is not numerically positive definite");
    const LMat rhs = LMat::Identity(sz, sz) * static_cast<long double>(vol);
    LMat sol = ldlt.solve(rhs);
    // One step of iterative refinement.
    sol += ldlt.solve(rhs - g * sol);
    db.coeffs = sol.cast<double>();

    // int_B Q_alpha x^beta = sum_gamma C(gamma, alpha) G(gamma, beta)
    const Eigen::MatrixXd dual = db.coeffs.transpose() * db.gram;
    db.duality_residual = (dual - Eigen::MatrixXd::Identity(sz, sz) * vol).cwiseAbs().maxCoeff();
    if (!(db.duality_residual < 1e-6 * vol))
        throw SolverError("dual basis residual too large: " + std::to_string(db.duality_residual));

    // max over B of sum |Q_alpha|, sampled on a polar grid including the boundary.
    const MonomialTable table(n, m);
    std::vector<double> mono(table.size());
    double best = 0.0;
    auto probe = [&](const Point& u) {
        table.eval(u, mono);
        Eigen::Map<const Eigen::VectorXd> mv(mono.data(), sz);
        const Eigen::VectorXd qv = db.coeffs.transpose() * mv;
        best = std::max(best, qv.cwiseAbs().sum());
    };
    if (n == 1) {
        for (int i = 0; i <= 4000; ++i) probe(Point::Constant(1, -1.0 + i / 2000.0));
    } else {
        QuadContext dirs(n, 1, n == 2 ? 256 : 64);
        for (const auto& d : dirs.directions())
            for (int k = 0; k <= 200; ++k) probe(Point(d * (k / 200.0)));
    }
    db.c0 = vol * best;
    db.c1 = best;
    return db;
}

}  // namespace detail

/// Cached per (m, n); immutable once built.
inline std::shared_ptr<const DualBasis> dual_basis(int m, int n) {
    check_dimension(n);
    if (m < 0 || m > kMaxDegree) throw ContractError("projection degree must be in [0, 10]");
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const DualBasis>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{m, n}];
    if (!slot) slot = std::make_shared<const DualBasis>(detail::build_dual_basis(m, n));
    return slot;
}

/// Pi_{B,m}(g) = sum_alpha (1/|B|) (int_B g z^alpha) Q_alpha.
inline Polynomial project_unit_ball(const SampledFunction& g, int m, const QuadContext& ctx) {
    const int n = ctx.dim();
    const auto db = dual_basis(m, n);
    const MomentSums ms = moments(g, m, Point::Zero(n), Region::ellipsoid(Ellipsoid::unit_ball(n)), ctx);
    std::vector<double> w(ms.signed_moments.size());
    const double vol = unit_ball_volume(n);
    for (size_t j = 0; j < w.size(); ++j) w[j] = ms.signed_moments[j] / vol;
    return db->combine(w);
}

/// A polynomial living on an ellipsoid E, stored in E's chart coordinates
/// u = M^{-1}(x - c) and extended by zero outside E.
class EllipsoidPolynomial {
public:
    EllipsoidPolynomial(Ellipsoid host, Polynomial local)
        : host_(std::move(host)), local_(std::move(local)) {}

    const Ellipsoid& host() const { return host_; }
    const Polynomial& local() const { return local_; }

    double operator()(const Point& x) const {
        const Point u = host_.to_local(x);
        if (u.norm() > 1.0) return 0.0;
        return local_(u);
    }

    SampledFunction as_function() const {
        SampledFunction f;
        auto self = std::make_shared<const EllipsoidPolynomial>(*this);
        f.eval = [self](const Point& x) { return (*self)(x); };
        f.support = host_;
        return f;
    }

private:
    Ellipsoid host_;
    Polynomial local_;
};

/// int_E f(x) (M^{-1}(x - c))^alpha dx for every |alpha| <= m.
inline MomentSums local_moments(const SampledFunction& f, const Ellipsoid& e, int m,
                                const QuadContext& ctx) {
    const MonomialTable table(ctx.dim(), m);
    MomentSums out{std::vector<double>(table.size(), 0.0), std::vector<double>(table.size(), 0.0)};
    std::vector<double> mono(table.size());
    std::vector<Ellipsoid> breaks = f.breaks;
    if (f.support) breaks.push_back(*f.support);
    for_each_node(Region::ellipsoid(e), breaks, ctx, 0.0, [&](const Point& x, double w) {
        const double v = f(x);
        if (v == 0.0) return;
        table.eval(e.to_local(x), mono);
        for (size_t j = 0; j < mono.size(); ++j) {
            out.signed_moments[j] += w * v * mono[j];
            out.abs_moments[j] += w * std::abs(v * mono[j]);
        }
    });
    return out;
}

/// The polynomial on E whose local moments are `local_moments_values`.
inline EllipsoidPolynomial project_from_local_moments(const Ellipsoid& e, int m,
                                                      const std::vector<double>& local_moments_values) {
    const auto db = dual_basis(m, e.dim());
    if (local_moments_values.size() != db->indices.size())
        throw ContractError("moment vector size mismatch");
    std::vector<double> w(local_moments_values.size());
    for (size_t j = 0; j < w.size(); ++j) w[j] = local_moments_values[j] / e.volume();
    return EllipsoidPolynomial(e, db->combine(w));
}

/// Matrix T with (A y)^alpha = sum_gamma T(alpha, gamma) y^gamma for |alpha| <= m,
/// rows and columns in multi_indices(n, m) order. Degrees are preserved, so T
/// is block diagonal by degree.
inline Eigen::MatrixXd monomial_transform(const Matrix& a, int m) {
    const int n = static_cast<int>(a.rows());
    const auto idx = multi_indices(n, m);
    std::map<std::array<int, kMaxDim>, size_t> where;
    for (size_t i = 0; i < idx.size(); ++i) where[idx[i].e] = i;
    const auto sz = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(sz, sz);
    for (size_t row = 0; row < idx.size(); ++row) {
        std::vector<double> poly(idx.size(), 0.0);
        poly[where.at(MultiIndex{}.e)] = 1.0;
        for (int i = 0; i < n; ++i) {
            for (int rep = 0; rep < idx[row][i]; ++rep) {
                // Multiply by the linear form sum_k a(i, k) y_k.
                std::vector<double> next(idx.size(), 0.0);
                for (size_t g = 0; g < idx.size(); ++g) {
                    if (poly[g] == 0.0) continue;
                    for (int k = 0; k < n; ++k) {
                        if (a(i, k) == 0.0) continue;
                        auto e = idx[g].e;
                        ++e[static_cast<size_t>(k)];
                        next[where.at(e)] += poly[g] * a(i, k);
                    }
                }
                poly.swap(next);
            }
        }
        for (size_t g = 0; g < idx.size(); ++g)
            t(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(g)) = poly[g];
    }
    return t;
}

/// P_{m,k}: the conjugate of Pi_{B,m} by the affine chart of E_k, applied to b_k.
inline EllipsoidPolynomial project_ellipsoid(const SampledFunction& b, const Ellipsoid& e, int m,
                                             const QuadContext& ctx) {
    return project_from_local_moments(e, m, local_moments(b, e, m, ctx).signed_moments);
}

}  // namespace aniso
