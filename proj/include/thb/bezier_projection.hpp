#pragma once

// Bezier projection: elementwise L2 projection onto polynomials followed by
// weighted averaging of coefficients, for single-level B-splines and for THB
// splines over projection elements.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thb/element_ops.hpp"
#include "thb/errors.hpp"
#include "thb/projection_elements.hpp"
#include "thb/tensor_basis.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

using Target = std::function<double(const Point&)>;

/// Local space on a projection element.
enum class LocalSpace {
    ThbDirect,      ///< THB restrictions themselves
    PiecewisePoly,  ///< discontinuous piecewise polynomials (default)
};

inline const char* to_string(LocalSpace s) { return s == LocalSpace::ThbDirect ? "thb" : "poly"; }

struct ProjectorOptions {
    LocalSpace space = LocalSpace::PiecewisePoly;
    int quadrature = 0;          ///< Gauss points per direction; 0 means p+1
    double rank_tolerance = 1e-10;
    bool strict = true;          ///< throw on rank-deficient local systems instead of using the pseudo-inverse
};

inline MultiIndex quadrature_points(const MultiIndex& degrees, int q) {
    MultiIndex out = degrees;
    for (int i = 0; i < out.size(); ++i) out[i] = q > 0 ? q : degrees[i] + 1;
    return out;
}

/// L2 projection of f onto the tensor Bernstein polynomials of the box,
/// by QR of the weighted collocation matrix at the Gauss points.
inline Eigen::VectorXd local_poly_projection(const Target& f, const MultiIndex& degrees, const Box& box, int q = 0) {
    const BoxQuadrature rule = box_quadrature(box, quadrature_points(degrees, q));
    const int nb = bernstein_size(degrees);
    const int np = static_cast<int>(rule.points.size());
    Eigen::MatrixXd a(np, nb);
    Eigen::VectorXd rhs(np);
    for (int r = 0; r < np; ++r) {
        const double w = std::sqrt(rule.weights[static_cast<std::size_t>(r)]);
        a.row(r) = w * tensor_bernstein(degrees, box, rule.points[static_cast<std::size_t>(r)], MultiIndex(box.dim, 0)).transpose();
        rhs[r] = w * f(rule.points[static_cast<std::size_t>(r)]);
    }
    return a.colPivHouseholderQr().solve(rhs);
}

/// Reusable elementwise projector: a = P * f(points of the mapped rule).
/// The matrix only depends on the degrees and the rule, not on the box.
struct PolyProjector {
    MultiIndex degrees;
    MultiIndex points;
    Eigen::MatrixXd matrix;
    BoxQuadrature reference;  ///< rule on the unit box

    PolyProjector() = default;
    PolyProjector(const MultiIndex& p, int q) : degrees(p), points(quadrature_points(p, q)) {
        Box unit{p.size(), {}, {}};
        for (int i = 0; i < p.size(); ++i) unit.hi[static_cast<std::size_t>(i)] = 1.0;
        reference = box_quadrature(unit, points);
        const int np = static_cast<int>(reference.points.size());
        Eigen::MatrixXd a(np, bernstein_size(p));
        Eigen::VectorXd sw(np);
        for (int r = 0; r < np; ++r) {
            sw[r] = std::sqrt(reference.weights[static_cast<std::size_t>(r)]);
            a.row(r) = sw[r] * tensor_bernstein(p, unit, reference.points[static_cast<std::size_t>(r)], MultiIndex(p.size(), 0)).transpose();
        }
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        matrix = qr.solve(Eigen::MatrixXd(sw.asDiagonal()));
    }

    std::vector<Point> mapped_points(const Box& box) const {
        std::vector<Point> out;
        out.reserve(reference.points.size());
        for (const auto& t : reference.points) {
            Point x{};
            for (int i = 0; i < box.dim; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                x[ii] = box.lo[ii] + t[ii] * box.width(i);
            }
            out.push_back(x);
        }
        return out;
    }

    Eigen::VectorXd project(const Target& f, const Box& box) const {
        const auto pts = mapped_points(box);
        Eigen::VectorXd v(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t r = 0; r < pts.size(); ++r) v[static_cast<Eigen::Index>(r)] = f(pts[r]);
        return matrix * v;
    }
};

/// Bezier projection onto a single-level tensor B-spline space.
inline Eigen::VectorXd bspline_bezier_project(const Target& f, const TensorBasis& tb, int q = 0) {
    const int n = tb.dim();
    const MultiIndex p = tb.degrees();
    const PolyProjector proj(p, q);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(tb.num_basis());
    Eigen::VectorXd den = Eigen::VectorXd::Zero(tb.num_basis());
    std::vector<std::pair<std::int64_t, double>> local;
    for_each_in_box(tb.all_elements(), [&](const MultiIndex& k) {
        const Box box = cell_box(tb, k);
        std::array<BezierExtraction, kMaxDim> ex;
        std::array<const Eigen::MatrixXd*, kMaxDim> inv{};
        for (int d = 0; d < n; ++d) {
            ex[static_cast<std::size_t>(d)] = bezier_extraction(tb.direction(d), k[d]);
            inv[static_cast<std::size_t>(d)] = &ex[static_cast<std::size_t>(d)].inverse;
        }
        const Eigen::VectorXd b = apply_tensor(inv, n, proj.project(f, box));
        const double scale = box.volume() / bernstein_size(p);
        int r = 0;
        for_each_in_box(tb.splines_box(k), [&](const MultiIndex& j) {
            // integral of B_j over the element: volume times mean Bernstein coefficient
            double colsum = 1.0;
            for (int d = 0; d < n; ++d)
                colsum *= ex[static_cast<std::size_t>(d)].extraction.col(j[d] - k[d]).sum();
            const double w = scale * colsum;
            const auto id = tb.basis_linear(j);
            num[id] += w * b[r];
            den[id] += w;
            ++r;
        });
    });
    return num.cwiseQuotient(den);
}

/// Per function: (projection element id, weight) pairs sorted by id.
using SmoothingWeights = std::vector<std::vector<std::pair<int, double>>>;

/// Integral of a polynomial over a box from its Bernstein coefficients.
inline double bernstein_integral(const Eigen::VectorXd& coeffs, const Box& box) {
    return box.volume() * coeffs.sum() / static_cast<double>(coeffs.size());
}

/// Weights int_{PE} T_j / int_Omega T_j.
inline SmoothingWeights smoothing_weights(const ThbBasis& basis, const Partition& part) {
    const DomainHierarchy& h = basis.hierarchy();
    std::vector<std::vector<std::pair<int, double>>> acc(static_cast<std::size_t>(basis.size()));
    for (const auto& pe : part.elements)
        for (const auto& k : pe.members) {
            const Box box = cell_box(h.basis(pe.level()), k);
            for (int j : basis.alive_on(pe.level(), k)) {
                const double v = bernstein_integral(basis.bernstein_coefficients(j, pe.level(), k), box);
                auto& row = acc[static_cast<std::size_t>(j)];
                if (!row.empty() && row.back().first == pe.id)
                    row.back().second += v;
                else
                    row.emplace_back(pe.id, v);
            }
        }
    for (int j = 0; j < basis.size(); ++j) {
        auto& row = acc[static_cast<std::size_t>(j)];
        std::sort(row.begin(), row.end());
        double total = 0.0;
        for (const auto& [id, v] : row) total += v;
        if (!(total > 0.0)) throw InternalError("THB function " + std::to_string(j) + " has non-positive integral");
        for (auto& [id, v] : row) v /= total;
    }
    return acc;
}

/// Result of the local step on one projection element.
struct LocalProjection {
    int element = 0;
    std::vector<int> functions;  ///< THB functions alive on the projection element
    Eigen::VectorXd coeffs;      ///< local coefficients, aligned with `functions`
    Eigen::VectorXd fhat;        ///< stacked member Bernstein coefficients (piecewise-polynomial space only)
};

struct GlobalProjection {
    Eigen::VectorXd coeffs;
    SmoothingWeights weights;
    int rank_deficient = 0;  ///< local systems solved by the truncated pseudo-inverse
};

namespace detail {

/// min-norm least-squares operator of `a` with a relative rank cutoff; reports the rank.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double tol, int& rank) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(tol);
    cod.compute(a);
    rank = static_cast<int>(cod.rank());
    return cod.pseudoInverse();
}

} // namespace detail

/// THB Bezier projector with all f-independent data precomputed.
class BezierProjector {
public:
    /// `basis` must outlive the projector.
    explicit BezierProjector(const ThbBasis& basis, ProjectorOptions opts = {})
        : basis_(&basis), opts_(opts), part_(build_partition(basis)), weights_(smoothing_weights(basis, part_)),
          poly_(basis.hierarchy().degrees(), opts.quadrature) {
        const DomainHierarchy& h = basis.hierarchy();
        const MultiIndex p = h.degrees();
        const int nb = bernstein_size(p);
        Eigen::LLT<Eigen::MatrixXd> llt(reference_bernstein_mass(p));
        const Eigen::MatrixXd lt = llt.matrixU();  // M_ref = U^T U
        for (const auto& pe : part_.elements) {
            Local loc;
            loc.functions = projection_functions(basis, pe);
            const int m = static_cast<int>(loc.functions.size());
            const int rows = nb * static_cast<int>(pe.members.size());
            loc.bernstein = Eigen::MatrixXd(rows, m);
            for (std::size_t s = 0; s < pe.members.size(); ++s)
                for (int c = 0; c < m; ++c)
                    loc.bernstein.block(static_cast<Eigen::Index>(s) * nb, c, nb, 1) =
                        basis.bernstein_coefficients(loc.functions[static_cast<std::size_t>(c)], pe.level(), pe.members[s]);
            int rank = 0;
            if (opts_.space == LocalSpace::PiecewisePoly) {
                const double vol = cell_box(h.basis(pe.level()), pe.members.front()).volume();
                Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(rows, rows);
                for (std::size_t s = 0; s < pe.members.size(); ++s)
                    blk.block(static_cast<Eigen::Index>(s) * nb, static_cast<Eigen::Index>(s) * nb, nb, nb) = std::sqrt(vol) * lt;
                loc.dhat = detail::pseudo_inverse(blk * loc.bernstein, opts_.rank_tolerance, rank) * blk;
            } else {
                // collocation of the restrictions at the member quadrature points
                const int np = static_cast<int>(poly_.reference.points.size());
                loc.colloc = Eigen::MatrixXd(np * static_cast<int>(pe.members.size()), m);
                for (std::size_t s = 0; s < pe.members.size(); ++s) {
                    const Box box = cell_box(h.basis(pe.level()), pe.members[s]);
                    const auto pts = poly_.mapped_points(box);
                    const Eigen::MatrixXd a = loc.bernstein.middleRows(static_cast<Eigen::Index>(s) * nb, nb);
                    for (int r = 0; r < np; ++r) {
                        const double w = std::sqrt(poly_.reference.weights[static_cast<std::size_t>(r)] * box.volume());
                        loc.colloc.row(static_cast<Eigen::Index>(s) * np + r) =
                            w * (a.transpose() * tensor_bernstein(p, box, pts[static_cast<std::size_t>(r)], MultiIndex(p.size(), 0))).transpose();
                    }
                }
                loc.dhat = detail::pseudo_inverse(loc.colloc, opts_.rank_tolerance, rank);
            }
            if (rank < m) {
                if (opts_.strict)
                    throw InternalError("projection element generated by " + to_string(pe.generator.index) +
                                        " is overloaded (rank " + std::to_string(rank) + " < " + std::to_string(m) + ")");
                ++rank_deficient_;
            }
            locals_.push_back(std::move(loc));
        }
    }

    const ThbBasis& basis() const noexcept { return *basis_; }
    const Partition& partition() const noexcept { return part_; }
    const SmoothingWeights& weights() const noexcept { return weights_; }
    const ProjectorOptions& options() const noexcept { return opts_; }
    /// Local operator of projection element `id`: coefficients = dhat * stacked data.
    const Eigen::MatrixXd& dhat(int id) const { return locals_.at(static_cast<std::size_t>(id)).dhat; }
    const std::vector<int>& local_functions(int id) const { return locals_.at(static_cast<std::size_t>(id)).functions; }
    int rank_deficient() const noexcept { return rank_deficient_; }

    LocalProjection local(const Target& f, int id) const {
        const auto& pe = part_.elements.at(static_cast<std::size_t>(id));
        const auto& loc = locals_[static_cast<std::size_t>(id)];
        const DomainHierarchy& h = basis_->hierarchy();
        LocalProjection out;
        out.element = id;
        out.functions = loc.functions;
        if (opts_.space == LocalSpace::PiecewisePoly) {
            const int nb = static_cast<int>(poly_.matrix.rows());
            out.fhat.resize(nb * static_cast<int>(pe.members.size()));
            for (std::size_t s = 0; s < pe.members.size(); ++s)
                out.fhat.segment(static_cast<Eigen::Index>(s) * nb, nb) = poly_.project(f, cell_box(h.basis(pe.level()), pe.members[s]));
            out.coeffs = loc.dhat * out.fhat;
        } else {
            const int np = static_cast<int>(poly_.reference.points.size());
            Eigen::VectorXd rhs(np * static_cast<int>(pe.members.size()));
            for (std::size_t s = 0; s < pe.members.size(); ++s) {
                const Box box = cell_box(h.basis(pe.level()), pe.members[s]);
                const auto pts = poly_.mapped_points(box);
                for (int r = 0; r < np; ++r)
                    rhs[static_cast<Eigen::Index>(s) * np + r] =
                        std::sqrt(poly_.reference.weights[static_cast<std::size_t>(r)] * box.volume()) * f(pts[static_cast<std::size_t>(r)]);
            }
            out.coeffs = loc.dhat * rhs;
        }
        return out;
    }

    GlobalProjection project(const Target& f) const {
        GlobalProjection g;
        g.weights = weights_;
        g.rank_deficient = rank_deficient_;
        g.coeffs = Eigen::VectorXd::Zero(basis_->size());
        std::vector<std::vector<std::pair<int, double>>> local_values(static_cast<std::size_t>(basis_->size()));
        for (std::size_t id = 0; id < part_.elements.size(); ++id) {
            const LocalProjection lp = local(f, static_cast<int>(id));
            for (std::size_t r = 0; r < lp.functions.size(); ++r)
                local_values[static_cast<std::size_t>(lp.functions[r])].emplace_back(static_cast<int>(id), lp.coeffs[static_cast<Eigen::Index>(r)]);
        }
        // rows are already in ascending element id; weights likewise
        for (int j = 0; j < basis_->size(); ++j) {
            const auto& w = weights_[static_cast<std::size_t>(j)];
            const auto& v = local_values[static_cast<std::size_t>(j)];
            if (w.size() != v.size()) throw InternalError("weight and local coefficient sets differ for function " + std::to_string(j));
            double s = 0.0;
            for (std::size_t r = 0; r < w.size(); ++r) s += w[r].second * v[r].second;
            g.coeffs[j] = s;
        }
        return g;
    }

private:
    struct Local {
        std::vector<int> functions;
        Eigen::MatrixXd bernstein;  ///< stacked member Bernstein coefficients of the functions
        Eigen::MatrixXd colloc;     ///< weighted collocation (THB local space)
        Eigen::MatrixXd dhat;
    };

    const ThbBasis* basis_;
    ProjectorOptions opts_;
    Partition part_;
    SmoothingWeights weights_;
    PolyProjector poly_;
    std::vector<Local> locals_;
    int rank_deficient_ = 0;
};

inline GlobalProjection project(const Target& f, const ThbBasis& basis, ProjectorOptions opts = {}) {
    return BezierProjector(basis, opts).project(f);
}

/// Bernstein coefficients on an active cell of sum_j c_j T_j.
inline Eigen::VectorXd element_bernstein(const ThbBasis& basis, const Eigen::VectorXd& coeffs, const Cell& c) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(bernstein_size(basis.hierarchy().degrees()));
    for (int j : basis.alive_on(c))
        if (coeffs[j] != 0.0) out += coeffs[j] * basis.bernstein_coefficients(j, c.level, c.index);
    return out;
}

/// Value or derivative of sum_j c_j T_j at x.
inline double eval_spline(const ThbBasis& basis, const Eigen::VectorXd& coeffs, const Point& x, const MultiIndex& orders) {
    const DomainHierarchy& h = basis.hierarchy();
    const Cell c = locate_active_cell(h, x);
    return eval_bernstein_poly(element_bernstein(basis, coeffs, c), h.degrees(), cell_box(h, c), x, orders);
}

inline double eval_spline(const ThbBasis& basis, const Eigen::VectorXd& coeffs, const Point& x) {
    return eval_spline(basis, coeffs, x, MultiIndex(basis.hierarchy().dim(), 0));
}

/// ||Pi f||_{L2(element)} / ||f||_{L2(support extension)}; empty when the denominator vanishes.
inline std::optional<double> local_stability_probe(const Target& f, const BezierProjector& proj, const Cell& e) {
    const ThbBasis& basis = proj.basis();
    const DomainHierarchy& h = basis.hierarchy();
    const MultiIndex p = h.degrees();
    MultiIndex q = p;
    for (int i = 0; i < q.size(); ++i) q[i] += 2;
    const GlobalProjection g = proj.project(f);
    const Eigen::VectorXd be = element_bernstein(basis, g.coeffs, e);
    const Box eb = cell_box(h, e);
    const BoxQuadrature re = box_quadrature(eb, q);
    double num = 0.0;
    for (std::size_t r = 0; r < re.points.size(); ++r) {
        const double v = eval_bernstein_poly(be, p, eb, re.points[r], MultiIndex(h.dim(), 0));
        num += re.weights[r] * v * v;
    }
    double den = 0.0;
    for (int id : support_extension(basis, proj.partition(), e)) {
        const auto& pe = proj.partition().elements[static_cast<std::size_t>(id)];
        for (const auto& k : pe.members) {
            const BoxQuadrature rq = box_quadrature(cell_box(h.basis(pe.level()), k), q);
            for (std::size_t r = 0; r < rq.points.size(); ++r) {
                const double v = f(rq.points[r]);
                den += rq.weights[r] * v * v;
            }
        }
    }
    if (!(den > 0.0)) return std::nullopt;
    return std::sqrt(num / den);
}

} // namespace thb
