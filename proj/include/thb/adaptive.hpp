#pragma once

// Adaptive refinement: element error indicators, Doerfler marking and mesh
// conformation (support cover, grading, connected overlaps, cubic blocks).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thb/bezier_projection.hpp"
#include "thb/element_ops.hpp"
#include "thb/errors.hpp"
#include "thb/hierarchy.hpp"
#include "thb/projection_elements.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// Sample points of an element: the (p+2)^n equispaced interior grid plus the
/// Gauss points of the given rule.
inline std::vector<Point> error_sample_points(const MultiIndex& degrees, const Box& box, int q) {
    const int n = box.dim;
    std::vector<Point> pts;
    MultiIndex hi = degrees;
    for (int i = 0; i < n; ++i) hi[i] = degrees[i] + 1;
    for_each_in_box({MultiIndex(n, 0), hi}, [&](const MultiIndex& a) {
        Point x{};
        for (int i = 0; i < n; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            x[ii] = box.lo[ii] + box.width(i) * (a[i] + 1.0) / (degrees[i] + 3.0);
        }
        pts.push_back(x);
    });
    const BoxQuadrature rule = box_quadrature(box, quadrature_points(degrees, q));
    pts.insert(pts.end(), rule.points.begin(), rule.points.end());
    return pts;
}

/// Maximum of |f - sum c_j T_j| over the sample points of every active element,
/// in all_active_elements order.
inline std::vector<double> elem_error(const Target& f, const ThbBasis& basis, const Eigen::VectorXd& coeffs, int q = 0) {
    const DomainHierarchy& h = basis.hierarchy();
    const MultiIndex p = h.degrees();
    std::vector<double> out;
    for (const auto& c : all_active_elements(h)) {
        const Box box = cell_box(h, c);
        const Eigen::VectorXd be = element_bernstein(basis, coeffs, c);
        double m = 0.0;
        for (const auto& x : error_sample_points(p, box, q))
            m = std::max(m, std::abs(f(x) - eval_bernstein_poly(be, p, box, x, MultiIndex(h.dim(), 0))));
        out.push_back(m);
    }
    return out;
}

/// Marked active elements, ordered by decreasing error.
struct MarkSet {
    std::vector<Cell> cells;

    bool empty() const noexcept { return cells.empty(); }
};

/// Indices (into `errors`) of the smallest prefix, by decreasing error with
/// ties to the lower index, whose sum reaches theta times the total.
inline std::vector<int> doerfler_indices(const std::vector<double>& errors, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidInput("marking fraction must lie in (0,1)");
    std::vector<int> order(errors.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return errors[static_cast<std::size_t>(a)] > errors[static_cast<std::size_t>(b)];
    });
    const double total = std::accumulate(errors.begin(), errors.end(), 0.0);
    std::vector<int> out;
    if (!(total > 0.0)) return out;
    double s = 0.0;
    for (int i : order) {
        out.push_back(i);
        s += errors[static_cast<std::size_t>(i)];
        if (s >= theta * total) break;
    }
    return out;
}

/// Doerfler marking over active cells given in (level, linear index) order.
inline MarkSet mark_elements(const std::vector<double>& errors, const std::vector<Cell>& cells, double theta) {
    if (errors.size() != cells.size()) throw InvalidInput("one error value per active element expected");
    MarkSet m;
    for (int i : doerfler_indices(errors, theta)) m.cells.push_back(cells[static_cast<std::size_t>(i)]);
    return m;
}

namespace detail {

inline bool has_cubic(const DomainHierarchy& h) {
    for (int i = 0; i < h.dim(); ++i)
        if (h.degrees()[i] == 3) return true;
    return false;
}

inline IndexBox clip(const TensorBasis& tb, IndexBox box) {
    for (int i = 0; i < tb.dim(); ++i) {
        box.lo[i] = std::max(box.lo[i], 0);
        box.hi[i] = std::min(box.hi[i], tb.direction(i).num_elements() - 1);
    }
    return box;
}

} // namespace detail

/// Rounds a box of level-l cells outward to even-aligned pairs in every cubic direction.
inline IndexBox align_cubic_blocks(const DomainHierarchy& h, int level, IndexBox box) {
    const TensorBasis& tb = h.basis(level);
    for (int i = 0; i < tb.dim(); ++i) {
        if (tb.degree(i) != 3) continue;
        box.lo[i] -= box.lo[i] % 2;
        box.hi[i] += 1 - box.hi[i] % 2;
    }
    return detail::clip(tb, box);
}

/// Level-l spline whose support contains cell k and is most centred on it
/// (index-space distance of the support centre; ties to the lowest index).
inline MultiIndex most_centred_spline(const TensorBasis& tb, const MultiIndex& k) {
    MultiIndex best;
    double best_d = 0.0;
    bool first = true;
    for_each_in_box(tb.splines_box(k), [&](const MultiIndex& j) {
        const IndexBox s = tb.support_box(j);
        double d = 0.0;
        for (int i = 0; i < tb.dim(); ++i) {
            const double c = 0.5 * (s.lo[i] + s.hi[i]) - k[i];
            d += c * c;
        }
        if (first || d < best_d || (d == best_d && tb.basis_linear(j) < tb.basis_linear(best))) {
            best = j;
            best_d = d;
            first = false;
        }
    });
    return best;
}

void add_support(DomainHierarchy& h, int level, IndexBox box);

/// Covers cell k of level l by Omega_{l+1} through the most centred spline support.
inline void support_cover_cell(DomainHierarchy& h, int level, const MultiIndex& k) {
    if (h.covered(level, k)) return;
    add_support(h, level, h.basis(level).support_box(most_centred_spline(h.basis(level), k)));
}

/// Adds the level-l cells of `box` (cubic-aligned) to Omega_{l+1}; cells not yet
/// in Omega_l are first brought in by covering their parents one level down.
inline void add_support(DomainHierarchy& h, int level, IndexBox box) {
    if (detail::has_cubic(h)) box = align_cubic_blocks(h, level, box);
    else box = detail::clip(h.basis(level), box);
    if (level > 0)
        for_each_in_box(box, [&](const MultiIndex& c) {
            if (!h.in_domain(level, c)) support_cover_cell(h, level - 1, parent_of(c));
        });
    for_each_in_box(box, [&](const MultiIndex& c) { h.cover(level, c); });
}

/// Adds, for every marked level-l element, one level-l spline support to Omega_{l+1}.
inline DomainHierarchy support_cover(DomainHierarchy h, const MarkSet& marks) {
    for (const auto& c : marks.cells)
        if (c.level >= h.num_levels() || !h.is_active(c.level, c.index))
            throw InvalidInput("marked element " + to_string(c.index) + " is not active");
    // earlier supports may already cover later marks
    for (const auto& c : marks.cells) support_cover_cell(h, c.level, c.index);
    return h;
}

/// One grading pass: supports of level-k functions alive on active elements
/// of level > k+1 are added to Omega_{k+1}. Returns true if anything changed.
inline bool grade_pass(DomainHierarchy& h) {
    const ThbBasis basis = build_thb_basis(h);
    std::set<std::pair<int, std::int64_t>> todo;
    for (int l = 2; l < h.num_levels(); ++l)
        for (const auto& e : active_elements(h, l))
            for (int j : basis.alive_on(l, e)) {
                const auto& f = basis.function(j);
                if (f.level < l - 1) todo.emplace(f.level, h.basis(f.level).basis_linear(f.index));
            }
    const DomainHierarchy before = h;
    for (const auto& [k, id] : todo) add_support(h, k, h.basis(k).support_box(h.basis(k).basis_multi(id)));
    return !(h == before);
}

inline DomainHierarchy grade_mesh(DomainHierarchy h) {
    while (grade_pass(h)) {
    }
    return h;
}

namespace detail {

/// Euler characteristic V - E + F of the union of closed 2D cells (or of the
/// 1D/3D analogue) and face-adjacency component count.
struct CellSetTopology {
    int components = 0;
    long euler = 0;
};

inline CellSetTopology cell_set_topology(const std::vector<MultiIndex>& cells) {
    CellSetTopology t;
    if (cells.empty()) return t;
    const int n = cells.front().size();
    std::set<MultiIndex> set(cells.begin(), cells.end());
    // components by face adjacency
    std::set<MultiIndex> seen;
    for (const auto& c : set) {
        if (seen.count(c)) continue;
        ++t.components;
        std::vector<MultiIndex> stack{c};
        seen.insert(c);
        while (!stack.empty()) {
            const MultiIndex k = stack.back();
            stack.pop_back();
            for (int i = 0; i < n; ++i)
                for (int s : {-1, 1}) {
                    MultiIndex nb = k;
                    nb[i] += s;
                    if (set.count(nb) && !seen.count(nb)) {
                        seen.insert(nb);
                        stack.push_back(nb);
                    }
                }
        }
    }
    // Euler characteristic: cell faces of every dimension, keyed on the doubled lattice.
    std::set<MultiIndex> faces;
    for (const auto& c : set)
        for_each_in_box({MultiIndex(n, 0), MultiIndex(n, 2)}, [&](const MultiIndex& o) {
            MultiIndex f = c;
            for (int i = 0; i < n; ++i) f[i] = 2 * c[i] + o[i];
            faces.insert(f);
        });
    for (const auto& f : faces) {
        int d = 0;
        for (int i = 0; i < n; ++i) d += (f[i] % 2 != 0) ? 1 : 0;
        t.euler += (d % 2 == 0) ? 1 : -1;
    }
    return t;
}

/// Level-l splines whose overlap with the complement of Omega_{l+1} is not
/// connected or not simply connected.
inline std::vector<MultiIndex> overlap_violators(const DomainHierarchy& h, int level) {
    const TensorBasis& tb = h.basis(level);
    std::vector<MultiIndex> out;
    for (std::int64_t id = 0; id < tb.num_basis(); ++id) {
        const MultiIndex j = tb.basis_multi(id);
        std::vector<MultiIndex> cells;
        bool any_covered = false;
        for_each_in_box(tb.support_box(j), [&](const MultiIndex& k) {
            if (h.covered(level, k)) any_covered = true;
            else cells.push_back(k);
        });
        if (!any_covered || cells.empty()) continue;
        const CellSetTopology t = cell_set_topology(cells);
        if (t.components != 1 || t.euler != 1) out.push_back(j);
    }
    return out;
}

} // namespace detail

/// One pass refining the supports of all overlap violators; true if changed.
inline bool connected_support_pass(DomainHierarchy& h) {
    const DomainHierarchy before = h;
    for (int l = 0; l + 1 < h.num_levels(); ++l)
        for (const auto& j : detail::overlap_violators(before, l)) add_support(h, l, h.basis(l).support_box(j));
    return !(h == before);
}

inline DomainHierarchy connected_support(DomainHierarchy h) {
    while (connected_support_pass(h)) {
    }
    return h;
}

/// Support cover of the marks, then grading and overlap repair until nothing changes.
inline DomainHierarchy conform_mesh(DomainHierarchy h, const MarkSet& marks) {
    h = support_cover(std::move(h), marks);
    while (true) {
        DomainHierarchy next = connected_support(grade_mesh(h));
        if (next == h) break;
        h = std::move(next);
    }
    return h;
}

/// Omega_{l+1} is a union of level-l spline supports.
inline ValidationReport check_spline_support_domains(const DomainHierarchy& h) {
    ValidationReport r{"refinement domains are unions of spline supports", 5, {}};
    for (int l = 0; l + 1 < h.num_levels(); ++l) {
        const TensorBasis& tb = h.basis(l);
        for (const auto& k : h.covered_cells(l)) {
            bool ok = false;
            for_each_in_box(tb.splines_box(k), [&](const MultiIndex& j) {
                if (ok) return;
                bool inside = true;
                for_each_in_box(tb.support_box(j), [&](const MultiIndex& c) {
                    if (inside && !h.covered(l, c)) inside = false;
                });
                ok = inside;
            });
            if (!ok)
                r.violations.push_back("level-" + std::to_string(l) + " cell " + to_string(k) + " of Omega_" +
                                       std::to_string(l + 1) + " lies in no covered level-" + std::to_string(l) +
                                       " spline support");
        }
    }
    return r;
}

inline ValidationReport check_connected_overlaps(const DomainHierarchy& h) {
    ValidationReport r{"connected and simply connected overlaps", 6, {}};
    for (int l = 0; l + 1 < h.num_levels(); ++l)
        for (const auto& j : detail::overlap_violators(h, l))
            r.violations.push_back("level-" + std::to_string(l) + " spline " + to_string(j) +
                                   " has a non-simply-connected overlap");
    return r;
}

/// In cubic directions Omega_{l+1} consists of even-aligned pairs of level-l cells.
inline ValidationReport check_cubic_alignment(const DomainHierarchy& h) {
    ValidationReport r{"cubic block alignment", 7, {}};
    if (!detail::has_cubic(h)) return r;
    for (int l = 0; l + 1 < h.num_levels(); ++l)
        for (const auto& k : h.covered_cells(l)) {
            const IndexBox blk = align_cubic_blocks(h, l, {k, k});
            bool ok = true;
            for_each_in_box(blk, [&](const MultiIndex& c) {
                if (!h.covered(l, c)) ok = false;
            });
            if (!ok)
                r.violations.push_back("level-" + std::to_string(l) + " cell " + to_string(k) +
                                       " is covered without its block partner");
        }
    return r;
}

/// All mesh validators in assumption order.
inline std::vector<ValidationReport> validate_mesh(const ThbBasis& basis) {
    const DomainHierarchy& h = basis.hierarchy();
    std::vector<ValidationReport> out;
    out.push_back(check_bisection(h));
    out.push_back(check_two_level(basis));
    out.push_back(check_wide_refinement(basis));
    out.push_back(check_unique_projection_elements(basis));
    out.push_back(check_spline_support_domains(h));
    out.push_back(check_connected_overlaps(h));
    if (detail::has_cubic(h)) out.push_back(check_cubic_alignment(h));
    return out;
}

inline bool all_ok(const std::vector<ValidationReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const ValidationReport& r) { return r.ok(); });
}

struct AdaptOptions {
    double theta = 0.5;
    double tolerance = 1e-3;   ///< target maximum element error
    int max_levels = 5;        ///< number of levels allowed, coarse level included
    int max_iterations = 100;
    ProjectorOptions projector{LocalSpace::PiecewisePoly, 0, 1e-10, true};
    bool validate = true;
    bool timing = false;
};

struct IterationRecord {
    int iteration = 0;
    int levels = 0;
    int active_elements = 0;
    int dofs = 0;
    double max_error = 0.0;
    int marked = 0;
    int dropped_marks = 0;  ///< marks on the level cap
    bool valid = true;
    std::vector<std::string> failed;  ///< names of failing validators
    double seconds = 0.0;
    DomainHierarchy mesh;
};

struct RefineReport {
    std::vector<IterationRecord> iterations;
    bool converged = false;
};

struct AdaptResult {
    DomainHierarchy mesh;
    Eigen::VectorXd coeffs;
    RefineReport report;
};

/// Project, estimate, mark and conform until the target error is met, no
/// actionable marks remain, or the iteration limit is hit.
inline AdaptResult adapt(const Target& f, DomainHierarchy h, const AdaptOptions& opt) {
    if (!(opt.tolerance > 0.0)) throw InvalidInput("target error must be positive");
    if (!(opt.theta > 0.0 && opt.theta < 1.0)) throw InvalidInput("marking fraction must lie in (0,1)");
    if (opt.max_levels < h.num_levels()) throw InvalidInput("initial mesh exceeds the level cap");
    AdaptResult res;
    for (int it = 0;; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const ThbBasis basis = build_thb_basis(h);
        IterationRecord rec;
        rec.iteration = it;
        rec.levels = h.num_levels();
        rec.dofs = basis.size();
        rec.mesh = h;
        if (opt.validate) {
            for (const auto& r : validate_mesh(basis))
                if (!r.ok()) rec.failed.push_back(r.name);
            rec.valid = rec.failed.empty();
        }
        const BezierProjector proj(basis, opt.projector);
        const GlobalProjection g = proj.project(f);
        const auto cells = all_active_elements(h);
        const auto err = elem_error(f, basis, g.coeffs, opt.projector.quadrature);
        rec.active_elements = static_cast<int>(cells.size());
        rec.max_error = err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
        res.mesh = h;
        res.coeffs = g.coeffs;

        bool stop = rec.max_error <= opt.tolerance || it >= opt.max_iterations;
        res.report.converged = rec.max_error <= opt.tolerance;
        DomainHierarchy next = h;
        if (!stop) {
            MarkSet marks = mark_elements(err, cells, opt.theta);
            rec.marked = static_cast<int>(marks.cells.size());
            MarkSet keep;
            for (const auto& c : marks.cells)
                if (c.level + 1 < opt.max_levels) keep.cells.push_back(c);
            rec.dropped_marks = rec.marked - static_cast<int>(keep.cells.size());
            if (keep.empty()) stop = true;
            else next = conform_mesh(h, keep);
            if (next == h) stop = true;
        }
        if (opt.timing) rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.report.iterations.push_back(std::move(rec));
        if (stop) break;
        h = std::move(next);
    }
    return res;
}

} // namespace thb
