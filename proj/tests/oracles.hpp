#pragma once

// Independent reference computations and fixtures shared by the tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "thb/adaptive.hpp"
#include "thb/hierarchy.hpp"
#include "thb/knot_vector.hpp"
#include "thb/tensor_basis.hpp"
#include "thb/thb_basis.hpp"

namespace oracle {

/// Textbook Cox-de Boor recursion on a full knot sequence, half-open spans;
/// x equal to the last knot is treated as the left limit.
inline double cox_de_boor(const std::vector<double>& t, int p, int j, double x) {
    const double last = t.back();
    if (p == 0) {
        if (x == last) return (t[j] < last && t[j + 1] == last) ? 1.0 : 0.0;
        return (t[j] <= x && x < t[j + 1]) ? 1.0 : 0.0;
    }
    double v = 0.0;
    const double d1 = t[j + p] - t[j];
    const double d2 = t[j + p + 1] - t[j + 1];
    if (d1 > 0.0) v += (x - t[j]) / d1 * cox_de_boor(t, p - 1, j, x);
    if (d2 > 0.0) v += (t[j + p + 1] - x) / d2 * cox_de_boor(t, p - 1, j + 1, x);
    return v;
}

inline double spline(const thb::KnotVector& kv, int j, double x) {
    return cox_de_boor(kv.knots(), kv.degree(), j, x);
}

inline double tensor_spline(const thb::TensorBasis& tb, const thb::MultiIndex& j, const thb::Point& x) {
    double v = 1.0;
    for (int i = 0; i < tb.dim(); ++i) v *= spline(tb.direction(i), j[i], x[static_cast<std::size_t>(i)]);
    return v;
}

/// Uniform 1D fixture: p, coarse elements, Omega_2 = [a, 1] given as a coarse cell range.
inline thb::DomainHierarchy one_d(int p, int coarse, int first_refined, int levels = 2) {
    thb::DomainHierarchy h(thb::uniform_tensor_basis(thb::MultiIndex{p}, thb::MultiIndex{coarse}), levels);
    thb::cover_box(h, 0, thb::IndexBox{thb::MultiIndex{first_refined}, thb::MultiIndex{coarse - 1}});
    return h;
}

/// The quadratic 1D two-level fixture: 8 coarse elements, Omega_2 = [1/2, 1].
inline thb::DomainHierarchy f1() { return one_d(2, 8, 4); }

/// 2x2 coarse (times 2^round), Omega_2 = [1/2,1]^2.
inline thb::DomainHierarchy corner_fixture(int p, int n_coarse) {
    thb::DomainHierarchy h(thb::uniform_tensor_basis({p, p}, {n_coarse, n_coarse}), 2);
    thb::cover_box(h, 0, thb::IndexBox{thb::MultiIndex{n_coarse / 2, n_coarse / 2}, thb::MultiIndex{n_coarse - 1, n_coarse - 1}});
    return h;
}

/// Randomized conforming 2D hierarchy: rounds of random marks pushed through conform_mesh.
inline thb::DomainHierarchy random_conforming(int p, unsigned seed, int coarse = 6, int rounds = 3, int marks = 3) {
    std::mt19937 rng(seed);
    thb::DomainHierarchy h(thb::uniform_tensor_basis({p, p}, {coarse, coarse}), 1);
    for (int r = 0; r < rounds; ++r) {
        const auto cells = thb::all_active_elements(h);
        std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
        thb::MarkSet m;
        for (int i = 0; i < marks; ++i) {
            const auto& c = cells[pick(rng)];
            if (c.level + 1 < 4) m.cells.push_back(c);
        }
        h = thb::conform_mesh(h, m);
    }
    return h;
}

inline std::vector<thb::Point> random_points(int dim, int n, unsigned seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<thb::Point> pts(static_cast<std::size_t>(n));
    for (auto& x : pts)
        for (int i = 0; i < dim; ++i) x[static_cast<std::size_t>(i)] = u(rng);
    return pts;
}

/// Numerical rank of the point-sampled restrictions of a set of functions,
/// on an oversampled uniform grid inside each cell.
template <class F>
int sampled_rank(const std::vector<thb::Box>& cells, int nfun, F&& value, int per_dir, double tol = 1e-10) {
    std::vector<thb::Point> pts;
    for (const auto& b : cells) {
        const int n = b.dim;
        thb::for_each_in_box({thb::MultiIndex(n, 0), thb::MultiIndex(n, per_dir - 1)}, [&](const thb::MultiIndex& a) {
            thb::Point x{};
            for (int i = 0; i < n; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                x[ii] = b.lo[ii] + b.width(i) * (a[i] + 0.5) / per_dir;
            }
            pts.push_back(x);
        });
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), nfun);
    for (std::size_t r = 0; r < pts.size(); ++r)
        for (int c = 0; c < nfun; ++c) m(static_cast<Eigen::Index>(r), c) = value(c, pts[r]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > tol * s[0]) ++rank;
    return rank;
}


/// THB function value from its finest-level expansion and Cox-de Boor splines.
inline double thb_value(const thb::ThbBasis& basis, int j, const thb::Point& x) {
    const auto& h = basis.hierarchy();
    const thb::TensorBasis& tb = h.basis(h.num_levels() - 1);
    double v = 0.0;
    for (const auto& [id, c] : basis.function(j).finest().entries()) {
        const thb::MultiIndex m = tb.basis_multi(id);
        bool inside = true;
        for (int i = 0; i < tb.dim() && inside; ++i) {
            const auto& t = tb.direction(i).knots();
            const double xi = x[static_cast<std::size_t>(i)];
            inside = t[static_cast<std::size_t>(m[i])] <= xi && xi <= t[static_cast<std::size_t>(m[i] + tb.degree(i) + 1)];
        }
        if (inside) v += c * tensor_spline(tb, m, x);
    }
    return v;
}

/// Functions that are nonzero somewhere on an oversampled grid inside the box.
inline std::vector<int> nonzero_on(const thb::ThbBasis& basis, const thb::Box& b, int per_dir = 5) {
    std::vector<int> out;
    const auto& h = basis.hierarchy();
    const thb::TensorBasis& tb = h.basis(h.num_levels() - 1);
    for (int j = 0; j < basis.size(); ++j) {
        bool near = false;
        for (const auto& e : basis.function(j).finest().entries()) {
            const thb::MultiIndex m = tb.basis_multi(e.first);
            bool hit = true;
            for (int i = 0; i < b.dim && hit; ++i) {
                const auto& t = tb.direction(i).knots();
                const auto ii = static_cast<std::size_t>(i);
                hit = t[static_cast<std::size_t>(m[i])] < b.hi[ii] && b.lo[ii] < t[static_cast<std::size_t>(m[i] + tb.degree(i) + 1)];
            }
            if (hit) {
                near = true;
                break;
            }
        }
        if (!near) continue;
        bool nz = false;
        thb::for_each_in_box({thb::MultiIndex(b.dim, 0), thb::MultiIndex(b.dim, per_dir - 1)}, [&](const thb::MultiIndex& a) {
            thb::Point x{};
            for (int i = 0; i < b.dim; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                x[ii] = b.lo[ii] + b.width(i) * (a[i] + 0.5) / per_dir;
            }
            if (std::abs(thb_value(basis, j, x)) > 1e-13) nz = true;
        });
        if (nz) out.push_back(j);
    }
    return out;
}


/// Finest-level B-spline coefficients of sum_j c_j T_j.
inline Eigen::VectorXd finest_coefficients(const thb::ThbBasis& basis, const Eigen::VectorXd& c) {
    const auto& h = basis.hierarchy();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(h.basis(h.num_levels() - 1).num_basis());
    for (int j = 0; j < basis.size(); ++j)
        for (const auto& [id, v] : basis.function(j).finest().entries()) out[id] += c[j] * v;
    return out;
}

/// Cox-de Boor evaluation of a tensor spline from its coefficients, over the
/// splines of the knot span holding x (upper_bound on the knots).
inline double spline_sum(const thb::TensorBasis& tb, const Eigen::VectorXd& coeffs, const thb::Point& x) {
    const int n = tb.dim();
    thb::MultiIndex lo(n, 0), hi(n, 0);
    for (int i = 0; i < n; ++i) {
        const auto& t = tb.direction(i).knots();
        const int p = tb.degree(i);
        const double xi = x[static_cast<std::size_t>(i)];
        int span = static_cast<int>(std::upper_bound(t.begin(), t.end(), xi) - t.begin()) - 1;
        span = std::min(span, static_cast<int>(t.size()) - p - 2);
        lo[i] = span - p;
        hi[i] = span;
    }
    double v = 0.0;
    thb::for_each_in_box({lo, hi}, [&](const thb::MultiIndex& m) {
        const double c = coeffs[tb.basis_linear(m)];
        if (c != 0.0) v += c * tensor_spline(tb, m, x);
    });
    return v;
}

} // namespace oracle
