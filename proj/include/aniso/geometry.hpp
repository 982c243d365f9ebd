#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "aniso/error.hpp"

namespace aniso {

inline constexpr int kMaxDim = 3;

// Fixed-capacity storage: n <= 3 everywhere, so points and matrices never
// touch the heap inside quadrature loops.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Volume of the Euclidean unit ball in R^n.
inline double unit_ball_volume(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi / 3.0;
        default: throw ContractError("dimension must be 1, 2 or 3");
    }
}

inline void check_dimension(int n) {
    if (n < 1 || n > kMaxDim) throw ContractError("dimension must be 1, 2 or 3");
}

/// Spectral norm.
inline double operator_norm(const Matrix& a) {
    if (a.rows() == 1) return std::abs(a(0, 0));
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

/// The closed ellipsoid center + M(B).
class Ellipsoid {
public:
    Ellipsoid(Point center, Matrix matrix, std::optional<double> level = std::nullopt)
        : center_(std::move(center)), matrix_(std::move(matrix)), level_(level) {
        const int n = static_cast<int>(center_.size());
        check_dimension(n);
        if (matrix_.rows() != n || matrix_.cols() != n)
            throw ContractError("ellipsoid matrix shape does not match center");
        det_ = matrix_.determinant();
        if (!(std::abs(det_) > 0.0) || !std::isfinite(det_))
            throw InvalidCover("singular ellipsoid matrix");
        Eigen::JacobiSVD<Matrix> svd(matrix_);
        sigma_max_ = svd.singularValues()(0);
        sigma_min_ = svd.singularValues()(n - 1);
        inverse_ = matrix_.inverse();
    }

    /// Unit ball of R^n centered at the origin.
    static Ellipsoid unit_ball(int n) {
        check_dimension(n);
        return Ellipsoid(Point::Zero(n), Matrix::Identity(n, n));
    }

    int dim() const { return static_cast<int>(center_.size()); }
    const Point& center() const { return center_; }
    const Matrix& matrix() const { return matrix_; }
    const Matrix& inverse() const { return inverse_; }
    std::optional<double> level() const { return level_; }
    double abs_det() const { return std::abs(det_); }

    double volume() const { return unit_ball_volume(dim()) * std::abs(det_); }
    double diam() const { return 2.0 * sigma_max_; }
    double width() const { return 2.0 * sigma_min_; }
    double sigma_max() const { return sigma_max_; }
    double sigma_min() const { return sigma_min_; }

    /// Chart coordinates M^{-1}(y - center).
    Point to_local(const Point& y) const { return inverse_ * (y - center_); }
    Point from_local(const Point& u) const { return center_ + matrix_ * u; }

    /// |M^{-1}(y - center)|; the ellipsoid is the sublevel set {gauge <= 1}.
    double gauge(const Point& y) const { return to_local(y).norm(); }
    /// Closed set; boundary points produced by the chart map may carry
    /// rounding of order 1e-16, hence the relative slack.
    bool contains(const Point& y) const { return gauge(y) <= 1.0 + 1e-12; }

    /// Parameter interval {r : origin + r*dir in this ellipsoid}, if nonempty.
    std::optional<std::pair<double, double>> ray_interval(const Point& origin,
                                                          const Point& dir) const {
        const Point a = inverse_ * dir;
        const Point w = inverse_ * (origin - center_);
        const double aa = a.squaredNorm();
        const double bb = a.dot(w);
        const double cc = w.squaredNorm() - 1.0;
        const double disc = bb * bb - aa * cc;
        if (disc < 0.0 || aa == 0.0) return std::nullopt;
        const double s = std::sqrt(disc);
        // Stable root pair.
        const double qv = -(bb + std::copysign(s, bb));
        double r1, r2;
        if (qv == 0.0) {
            r1 = r2 = 0.0;
        } else {
            r1 = qv / aa;
            r2 = cc / qv;
        }
        if (r1 > r2) std::swap(r1, r2);
        return std::make_pair(r1, r2);
    }

private:
    Point center_;
    Matrix matrix_;
    Matrix inverse_;
    std::optional<double> level_;
    double det_ = 0.0;
    double sigma_max_ = 0.0;
    double sigma_min_ = 0.0;
};

inline bool contains(const Ellipsoid& e, const Point& y) { return e.contains(y); }
inline double volume(const Ellipsoid& e) { return e.volume(); }
inline double diam(const Ellipsoid& e) { return e.diam(); }
inline double width(const Ellipsoid& e) { return e.width(); }

/// Whether two closed ellipsoids share a point. Reduces to the trust-region
/// problem min_{|u|<=1} |A u + w| with A = M2^{-1} M1, w = M2^{-1}(c1 - c2).
inline bool intersects(const Ellipsoid& e1, const Ellipsoid& e2) {
    if (e1.contains(e2.center()) || e2.contains(e1.center())) return true;
    const Matrix a = e2.inverse() * e1.matrix();
    const Point w = e2.inverse() * (e1.center() - e2.center());
    const int n = e1.dim();
    const Matrix ata = a.transpose() * a;
    const Point atw = a.transpose() * w;
    auto solve = [&](double mu) -> Point {
        Matrix h = ata + mu * Matrix::Identity(n, n);
        return -(h.ldlt().solve(atw));
    };
    Point u = solve(0.0);
    if (u.norm() > 1.0) {
        double lo = 0.0, hi = 1.0;
        while (solve(hi).norm() > 1.0) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (solve(mid).norm() > 1.0 ? lo : hi) = mid;
        }
        u = solve(hi);
        u /= std::max(1.0, u.norm());
    }
    return (a * u + w).norm() <= 1.0 + 1e-12;
}

/// Exponent pair (a4, a6) driving the piecewise-linear scale functions.
struct ExponentParams {
    double a4 = 1.0;
    double a6 = 1.0;

    ExponentParams() = default;
    ExponentParams(double a4_, double a6_) : a4(a4_), a6(a6_) {
        if (!(a6 > 0.0) || !(a4 >= a6))
            throw ContractError("exponent parameters need 0 < a6 <= a4");
    }
};

/// a6*t for t >= 0, a4*t for t < 0.
inline double lambda_fn(double t, const ExponentParams& p) {
    return t >= 0.0 ? p.a6 * t : p.a4 * t;
}

/// a4*t for t >= 0, a6*t for t < 0.
inline double lambda_tilde_fn(double t, const ExponentParams& p) {
    return t >= 0.0 ? p.a4 * t : p.a6 * t;
}

inline double lambda_inverse(double y, const ExponentParams& p) {
    return y >= 0.0 ? y / p.a6 : y / p.a4;
}

}  // namespace aniso
