#pragma once

// Element-local polynomial machinery: tensor Bernstein bases on boxes,
// tensor Gauss rules and reference mass matrices.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "thb/hierarchy.hpp"
#include "thb/knot_vector.hpp"
#include "thb/quadrature.hpp"
#include "thb/tensor_basis.hpp"

namespace thb {

using Point = std::array<double, kMaxDim>;

/// Axis-aligned box [lo, hi] in physical coordinates.
struct Box {
    int dim = 1;
    Point lo{};
    Point hi{};

    double width(int i) const noexcept { return hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]; }
    double volume() const noexcept {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= width(i);
        return v;
    }
    double max_width() const noexcept {
        double w = 0.0;
        for (int i = 0; i < dim; ++i) w = std::max(w, width(i));
        return w;
    }
};

inline Box cell_box(const TensorBasis& tb, const MultiIndex& k) {
    const auto [a, b] = tb.element_bounds(k);
    return {tb.dim(), a, b};
}
inline Box cell_box(const DomainHierarchy& h, const Cell& c) { return cell_box(h.basis(c.level), c.index); }

/// Union bounding box of a range of level-l cells given as an index box.
inline Box index_box_extent(const TensorBasis& tb, const IndexBox& box) {
    Box out{tb.dim(), {}, {}};
    for (int i = 0; i < tb.dim(); ++i) {
        out.lo[static_cast<std::size_t>(i)] = tb.direction(i).element_lower(box.lo[i]);
        out.hi[static_cast<std::size_t>(i)] = tb.direction(i).element_upper(box.hi[i]);
    }
    return out;
}

/// Derivatives of order `order` (w.r.t. t) of the p+1 Bernstein polynomials at t in [0,1].
inline std::vector<double> bernstein_derivatives(int p, double t, int order) {
    std::vector<double> out(static_cast<std::size_t>(p + 1), 0.0);
    if (order > p) return out;
    const int q = p - order;
    std::vector<double> low(static_cast<std::size_t>(q + 1));
    for (int i = 0; i <= q; ++i) low[static_cast<std::size_t>(i)] = bernstein(q, i, t);
    double scale = 1.0;
    for (int r = 0; r < order; ++r) scale *= p - r;
    double binom = 1.0;
    for (int r = 0; r <= order; ++r) {
        const double sgn = ((order - r) % 2 == 0) ? 1.0 : -1.0;
        for (int i = 0; i <= p; ++i) {
            const int m = i - r;
            if (m >= 0 && m <= q) out[static_cast<std::size_t>(i)] += sgn * binom * low[static_cast<std::size_t>(m)];
        }
        binom = binom * (order - r) / (r + 1);
    }
    for (auto& v : out) v *= scale;
    return out;
}

/// Number of tensor Bernstein polynomials for the degrees.
inline int bernstein_size(const MultiIndex& degrees) {
    int n = 1;
    for (int i = 0; i < degrees.size(); ++i) n *= degrees[i] + 1;
    return n;
}

/// Values (or mixed derivatives in physical coordinates) of all tensor
/// Bernstein polynomials on `box` at x, direction 0 fastest.
inline Eigen::VectorXd tensor_bernstein(const MultiIndex& degrees, const Box& box, const Point& x,
                                        const MultiIndex& orders) {
    const int n = degrees.size();
    std::array<std::vector<double>, kMaxDim> v;
    for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double w = box.width(i);
        const double t = (x[ii] - box.lo[ii]) / w;
        v[ii] = bernstein_derivatives(degrees[i], t, orders[i]);
        const double s = std::pow(1.0 / w, orders[i]);
        for (auto& y : v[ii]) y *= s;
    }
    Eigen::VectorXd out(bernstein_size(degrees));
    int r = 0;
    for_each_in_box({MultiIndex(n, 0), degrees}, [&](const MultiIndex& a) {
        double y = 1.0;
        for (int i = 0; i < n; ++i) y *= v[static_cast<std::size_t>(i)][static_cast<std::size_t>(a[i])];
        out[r++] = y;
    });
    return out;
}

/// Tensor Gauss rule mapped onto a box; weights include the Jacobian.
struct BoxQuadrature {
    std::vector<Point> points;
    std::vector<double> weights;
};

inline BoxQuadrature box_quadrature(const Box& box, const MultiIndex& points_per_direction) {
    const int n = box.dim;
    std::array<QuadratureRule, kMaxDim> rules;
    for (int i = 0; i < n; ++i) rules[static_cast<std::size_t>(i)] = gauss_legendre(points_per_direction[i]);
    MultiIndex hi = points_per_direction;
    for (int i = 0; i < n; ++i) hi[i] -= 1;
    BoxQuadrature out;
    for_each_in_box({MultiIndex(n, 0), hi}, [&](const MultiIndex& a) {
        Point x{};
        double w = 1.0;
        for (int i = 0; i < n; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const auto& r = rules[ii];
            const double half = 0.5 * box.width(i);
            x[ii] = box.lo[ii] + half * (r.nodes[static_cast<std::size_t>(a[i])] + 1.0);
            w *= half * r.weights[static_cast<std::size_t>(a[i])];
        }
        out.points.push_back(x);
        out.weights.push_back(w);
    });
    return out;
}

/// Bernstein mass matrix on the unit box, by Gauss quadrature with p+1 points.
inline Eigen::MatrixXd reference_bernstein_mass(const MultiIndex& degrees) {
    const int n = degrees.size();
    Box unit{n, {}, {}};
    for (int i = 0; i < n; ++i) unit.hi[static_cast<std::size_t>(i)] = 1.0;
    MultiIndex q = degrees;
    for (int i = 0; i < n; ++i) q[i] += 1;
    const BoxQuadrature rule = box_quadrature(unit, q);
    const int m = bernstein_size(degrees);
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t r = 0; r < rule.points.size(); ++r) {
        const Eigen::VectorXd b = tensor_bernstein(degrees, unit, rule.points[r], MultiIndex(n, 0));
        mass.noalias() += rule.weights[r] * b * b.transpose();
    }
    return mass;
}

/// Value or derivative of a polynomial given by tensor Bernstein coefficients on a box.
inline double eval_bernstein_poly(const Eigen::VectorXd& coeffs, const MultiIndex& degrees, const Box& box,
                                  const Point& x, const MultiIndex& orders) {
    return coeffs.dot(tensor_bernstein(degrees, box, x, orders));
}

/// Applies square per-direction matrices to a tensor coefficient vector
/// (direction 0 fastest): out = (M_{n-1} x ... x M_0) c.
inline Eigen::VectorXd apply_tensor(const std::array<const Eigen::MatrixXd*, kMaxDim>& mats, int dim,
                                    Eigen::VectorXd c) {
    std::int64_t stride = 1;
    for (int d = 0; d < dim; ++d) {
        const Eigen::MatrixXd& m = *mats[static_cast<std::size_t>(d)];
        const std::int64_t len = m.rows();
        const std::int64_t total = c.size();
        Eigen::VectorXd out = Eigen::VectorXd::Zero(total);
        for (std::int64_t base = 0; base < total; ++base) {
            if ((base / stride) % len != 0) continue;
            for (std::int64_t a = 0; a < len; ++a) {
                double s = 0.0;
                for (std::int64_t b = 0; b < len; ++b) s += m(a, b) * c[base + b * stride];
                out[base + a * stride] = s;
            }
        }
        c = std::move(out);
        stride *= len;
    }
    return c;
}

/// Active cell containing x (finest level first; right-closed at the upper end).
inline Cell locate_active_cell(const DomainHierarchy& h, const Point& x) {
    for (int l = h.num_levels() - 1; l >= 0; --l) {
        const TensorBasis& tb = h.basis(l);
        MultiIndex k(tb.dim());
        for (int i = 0; i < tb.dim(); ++i) k[i] = tb.direction(i).find_element(x[static_cast<std::size_t>(i)]);
        if (h.is_active(l, k)) return {l, k};
    }
    throw InternalError("point not covered by any active element");
}

inline Point to_point(std::span<const double> x) {
    Point p{};
    for (std::size_t i = 0; i < x.size() && i < p.size(); ++i) p[i] = x[i];
    return p;
}

} // namespace thb
