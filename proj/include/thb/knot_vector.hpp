#pragma once

// Univariate open knot vectors with unique interior breaks, Cox-de Boor
// evaluation, bisection, two-scale relations and Bezier extraction.
//
// Indexing is 0-based throughout: element k is the span (breaks[k], breaks[k+1]),
// spline j is supported on elements max(0, j-p) .. min(E-1, j), and the p+1
// splines that do not vanish on element k are k .. k+p.

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thb/errors.hpp"

namespace thb {

/// Sparse column of a refinement relation: (fine spline index, coefficient).
using SparseCoeffs = std::vector<std::pair<int, double>>;

class KnotVector {
public:
    KnotVector() = default;

    /// `breaks` are the distinct knot values including both end points.
    KnotVector(int degree, std::vector<double> breaks) : degree_(degree), breaks_(std::move(breaks)) {
        if (degree_ < 0) throw InvalidInput("negative degree");
        if (breaks_.size() < 2) throw InvalidInput("a knot vector needs at least two breaks");
        for (std::size_t i = 1; i < breaks_.size(); ++i)
            if (!(breaks_[i] > breaks_[i - 1]))
                throw InvalidInput("breaks must be strictly increasing");
    }

    int degree() const noexcept { return degree_; }
    const std::vector<double>& breaks() const noexcept { return breaks_; }
    int num_elements() const noexcept { return static_cast<int>(breaks_.size()) - 1; }
    int num_basis() const noexcept { return num_elements() + degree_; }
    /// Length m of the full knot sequence.
    int num_knots() const noexcept { return num_basis() + degree_ + 1; }
    double lower() const noexcept { return breaks_.front(); }
    double upper() const noexcept { return breaks_.back(); }

    /// Knot i of the full open sequence (0-based, end knots repeated p+1 times).
    double knot(int i) const noexcept {
        const int e = i - degree_;
        if (e <= 0) return breaks_.front();
        if (e >= num_elements()) return breaks_.back();
        return breaks_[static_cast<std::size_t>(e)];
    }

    std::vector<double> knots() const {
        std::vector<double> t(static_cast<std::size_t>(num_knots()));
        for (int i = 0; i < num_knots(); ++i) t[static_cast<std::size_t>(i)] = knot(i);
        return t;
    }

    double element_lower(int k) const { return breaks_.at(static_cast<std::size_t>(k)); }
    double element_upper(int k) const { return breaks_.at(static_cast<std::size_t>(k) + 1); }

    /// Element containing x; x == upper() belongs to the last element.
    int find_element(double x) const {
        if (!(x >= lower() && x <= upper()))
            throw DomainError("evaluation point " + std::to_string(x) + " outside [" +
                              std::to_string(lower()) + ", " + std::to_string(upper()) + "]");
        if (x == upper()) return num_elements() - 1;
        auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
        return static_cast<int>(it - breaks_.begin()) - 1;
    }

    int support_first_element(int j) const { return std::max(0, j - degree_); }
    int support_last_element(int j) const { return std::min(num_elements() - 1, j); }

    /// Same partition mapped by x -> s*x.
    KnotVector scaled(double s) const {
        std::vector<double> b = breaks_;
        for (double& v : b) v *= s;
        return KnotVector(degree_, std::move(b));
    }

    bool operator==(const KnotVector&) const = default;

private:
    int degree_ = 0;
    std::vector<double> breaks_{0.0, 1.0};
};

/// Open knot vector on [0,1] with the given interior breaks.
inline KnotVector open_knot_vector(int degree, const std::vector<double>& interior_breaks) {
    std::vector<double> b;
    b.reserve(interior_breaks.size() + 2);
    b.push_back(0.0);
    for (double x : interior_breaks) {
        if (!(x > 0.0 && x < 1.0)) throw InvalidInput("interior breaks must lie strictly inside (0,1)");
        if (!(x > b.back())) throw InvalidInput("interior breaks must be strictly increasing");
        b.push_back(x);
    }
    b.push_back(1.0);
    return KnotVector(degree, std::move(b));
}

/// Uniform open knot vector on [0,1] with `elements` spans.
inline KnotVector uniform_knot_vector(int degree, int elements) {
    if (elements < 1) throw InvalidInput("need at least one element");
    std::vector<double> interior;
    for (int i = 1; i < elements; ++i) interior.push_back(static_cast<double>(i) / elements);
    return open_knot_vector(degree, interior);
}

struct BasisValues {
    int first_index = 0;         ///< index of the first nonzero spline (== element index)
    std::vector<double> values;  ///< p+1 values for splines first_index .. first_index+p
};

/// All derivatives 0..max_order of the p+1 splines nonzero on element k at x.
/// Row r holds the r-th derivatives; rows above p are zero.
inline Eigen::MatrixXd basis_derivatives_on_element(const KnotVector& kv, int k, double x, int max_order) {
    const int p = kv.degree();
    const int span = k + p;
    Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(max_order + 1, p + 1);
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - kv.knot(span + 1 - j);
        right[j] = kv.knot(span + j) - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

    const int n = std::min(max_order, p);
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int kk = 1; kk <= n; ++kk) {
            double d = 0.0;
            const int rk = r - kk, pk = p - kk;
            if (r >= kk) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? kk - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, kk) = -a(s1, kk - 1) / ndu(pk + 1, r);
                d += a(s2, kk) * ndu(r, pk);
            }
            ders(kk, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int kk = 1; kk <= n; ++kk) {
        ders.row(kk) *= factor;
        factor *= (p - kk);
    }
    return ders;
}

/// Values of the p+1 splines that are nonzero on the element containing x.
inline BasisValues eval_basis(const KnotVector& kv, double x) {
    const int k = kv.find_element(x);
    const Eigen::MatrixXd d = basis_derivatives_on_element(kv, k, x, 0);
    BasisValues out{k, std::vector<double>(static_cast<std::size_t>(kv.degree() + 1))};
    for (int j = 0; j <= kv.degree(); ++j) out.values[static_cast<std::size_t>(j)] = d(0, j);
    return out;
}

/// order-th derivatives of the locally supported splines; zero for order > p.
inline BasisValues eval_basis_deriv(const KnotVector& kv, double x, int order) {
    if (order < 0) throw InvalidInput("negative derivative order");
    const int k = kv.find_element(x);
    BasisValues out{k, std::vector<double>(static_cast<std::size_t>(kv.degree() + 1), 0.0)};
    if (order > kv.degree()) return out;
    const Eigen::MatrixXd d = basis_derivatives_on_element(kv, k, x, order);
    for (int j = 0; j <= kv.degree(); ++j) out.values[static_cast<std::size_t>(j)] = d(order, j);
    return out;
}

/// Value of the single spline j at x (zero outside its support).
inline double eval_single(const KnotVector& kv, int j, double x, int order = 0) {
    const BasisValues b = eval_basis_deriv(kv, x, order);
    const int local = j - b.first_index;
    if (local < 0 || local > kv.degree()) return 0.0;
    return b.values[static_cast<std::size_t>(local)];
}

/// Split every span at its midpoint.
inline KnotVector bisect(const KnotVector& kv) {
    std::vector<double> b;
    const auto& old = kv.breaks();
    b.reserve(2 * old.size() - 1);
    for (std::size_t i = 0; i + 1 < old.size(); ++i) {
        b.push_back(old[i]);
        b.push_back(0.5 * (old[i] + old[i + 1]));
    }
    b.push_back(old.back());
    return KnotVector(kv.degree(), std::move(b));
}

namespace detail {

/// Boehm insertion of x into `knots`; rows of `coeffs` are spline coefficients
/// (one column per represented function).
inline void insert_knot(std::vector<double>& knots, Eigen::MatrixXd& coeffs, int p, double x) {
    const int m = static_cast<int>(knots.size());
    int s = -1;
    for (int i = 0; i + 1 < m; ++i)
        if (knots[i] <= x && x < knots[i + 1]) s = i;
    const int r = static_cast<int>(std::count(knots.begin(), knots.end(), x));
    const int n = static_cast<int>(coeffs.rows());
    // Blended rows are s-p+1 .. s-r; all of them need both neighbours.
    if (s < 0 || s - p < 0 || s - r > n - 1 || s - r + p >= m || r > p)
        throw InternalError("knot insertion outside the valid span range");
    Eigen::MatrixXd out(n + 1, coeffs.cols());
    for (int i = 0; i <= n; ++i) {
        if (i <= s - p) {
            out.row(i) = coeffs.row(i);
        } else if (i > s - r) {
            out.row(i) = coeffs.row(i - 1);
        } else {
            const double alpha = (x - knots[i]) / (knots[i + p] - knots[i]);
            out.row(i) = alpha * coeffs.row(i) + (1.0 - alpha) * coeffs.row(i - 1);
        }
    }
    knots.insert(knots.begin() + s + 1, x);
    coeffs = std::move(out);
}

} // namespace detail

/// Dense refinement matrix R with B_{j,kv} = sum_q R(q,j) B_{q,bisect(kv)}.
inline Eigen::MatrixXd refinement_matrix(const KnotVector& kv) {
    std::vector<double> t = kv.knots();
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Identity(kv.num_basis(), kv.num_basis());
    const auto& b = kv.breaks();
    for (std::size_t i = 0; i + 1 < b.size(); ++i)
        detail::insert_knot(t, coeffs, kv.degree(), 0.5 * (b[i] + b[i + 1]));
    return coeffs;
}

/// Two-scale coefficients of spline j over the splines of bisect(kv).
inline SparseCoeffs two_scale_coeffs(const KnotVector& kv, int j) {
    if (j < 0 || j >= kv.num_basis()) throw InvalidInput("spline index out of range");
    const Eigen::MatrixXd r = refinement_matrix(kv);
    SparseCoeffs out;
    for (int q = 0; q < r.rows(); ++q)
        if (r(q, j) != 0.0) out.emplace_back(q, r(q, j));
    return out;
}

/// All columns of the refinement matrix in sparse form.
inline std::vector<SparseCoeffs> two_scale_all(const KnotVector& kv) {
    const Eigen::MatrixXd r = refinement_matrix(kv);
    std::vector<SparseCoeffs> cols(static_cast<std::size_t>(r.cols()));
    for (int j = 0; j < r.cols(); ++j)
        for (int q = 0; q < r.rows(); ++q)
            if (r(q, j) != 0.0) cols[static_cast<std::size_t>(j)].emplace_back(q, r(q, j));
    return cols;
}

/// Element-local change of basis between the p+1 splines k..k+p and the
/// Bernstein polynomials of element k.
struct BezierExtraction {
    /// extraction(i, j): i-th Bernstein coefficient of spline k+j.
    /// Applied to local spline coefficients it yields Bernstein coefficients.
    Eigen::MatrixXd extraction;
    /// Inverse map: Bernstein coefficients -> local spline coefficients.
    Eigen::MatrixXd inverse;
};

inline BezierExtraction bezier_extraction(const KnotVector& kv, int k) {
    if (k < 0 || k >= kv.num_elements()) throw InvalidInput("element index out of range");
    const int p = kv.degree();
    std::vector<double> tau;
    for (int i = k; i <= k + 2 * p + 1; ++i) tau.push_back(kv.knot(i));
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Identity(p + 1, p + 1);
    const double a = kv.element_lower(k), b = kv.element_upper(k);
    for (double x : {a, b}) {
        const auto mult = std::count(tau.begin(), tau.end(), x);
        for (auto r = mult; r < p + 1; ++r) detail::insert_knot(tau, coeffs, p, x);
    }
    int s = -1;
    for (int i = 0; i + 1 < static_cast<int>(tau.size()); ++i)
        if (tau[i] == a && tau[i + 1] == b) s = i;
    if (s < p) throw InternalError("Bezier extraction: element span not found after insertion");
    BezierExtraction out;
    out.extraction = coeffs.middleRows(s - p, p + 1);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(out.extraction);
    if (!lu.isInvertible()) throw InternalError("Bezier extraction operator is singular");
    out.inverse = lu.inverse();
    return out;
}

/// Bernstein polynomial i of degree p on the reference interval [0,1].
inline double bernstein(int p, int i, double t) {
    double binom = 1.0;
    for (int r = 1; r <= i; ++r) binom = binom * (p - i + r) / r;
    double v = binom;
    for (int r = 0; r < i; ++r) v *= t;
    for (int r = 0; r < p - i; ++r) v *= (1.0 - t);
    return v;
}

} // namespace thb
