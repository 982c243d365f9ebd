#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aniso/geometry.hpp"

namespace aniso {

/// Exponent vector alpha; entries past the dimension are zero.
struct MultiIndex {
    std::array<int, kMaxDim> e{0, 0, 0};

    int degree() const { return e[0] + e[1] + e[2]; }
    int operator[](int i) const { return e[static_cast<size_t>(i)]; }
    bool operator==(const MultiIndex&) const = default;

    std::string str(int n) const {
        std::string s = "(";
        for (int i = 0; i < n; ++i) s += (i ? "," : "") + std::to_string(e[static_cast<size_t>(i)]);
        return s + ")";
    }
};

inline constexpr int kMaxDegree = 10;

/// All alpha in N^n with |alpha| <= m, graded by degree and, within a
/// degree, lexicographically decreasing in the first component.
inline std::vector<MultiIndex> multi_indices(int n, int m) {
    check_dimension(n);
    std::vector<MultiIndex> out;
    for (int deg = 0; deg <= m; ++deg) {
        if (n == 1) {
            out.push_back({{deg, 0, 0}});
        } else if (n == 2) {
            for (int a = deg; a >= 0; --a) out.push_back({{a, deg - a, 0}});
        } else {
            for (int a = deg; a >= 0; --a)
                for (int b = deg - a; b >= 0; --b) out.push_back({{a, b, deg - a - b}});
        }
    }
    return out;
}

inline size_t num_monomials(int n, int m) {
    // binomial(n + m, n)
    size_t r = 1;
    for (int i = 1; i <= n; ++i) r = r * static_cast<size_t>(m + i) / static_cast<size_t>(i);
    return r;
}

inline double monomial(const Point& x, const MultiIndex& a) {
    double v = 1.0;
    for (int i = 0; i < x.size(); ++i)
        for (int k = 0; k < a[i]; ++k) v *= x(i);
    return v;
}

/// Evaluates every monomial of degree <= m at x, in multi_indices(n, m) order.
class MonomialTable {
public:
    MonomialTable(int n, int m) : n_(n), m_(m), idx_(multi_indices(n, m)) {}

    int dim() const { return n_; }
    int degree() const { return m_; }
    size_t size() const { return idx_.size(); }
    const std::vector<MultiIndex>& indices() const { return idx_; }

    void eval(const Point& x, std::span<double> out) const {
        std::array<std::array<double, kMaxDegree + 1>, kMaxDim> pw{};
        for (int i = 0; i < n_; ++i) {
            pw[static_cast<size_t>(i)][0] = 1.0;
            for (int k = 1; k <= m_; ++k)
                pw[static_cast<size_t>(i)][static_cast<size_t>(k)] =
                    pw[static_cast<size_t>(i)][static_cast<size_t>(k - 1)] * x(i);
        }
        for (size_t j = 0; j < idx_.size(); ++j) {
            double v = 1.0;
            for (int i = 0; i < n_; ++i)
                v *= pw[static_cast<size_t>(i)][static_cast<size_t>(idx_[j][i])];
            out[j] = v;
        }
    }

private:
    int n_, m_;
    std::vector<MultiIndex> idx_;
};

}  // namespace aniso
