#pragma once

// Well-behaved elements, projection elements and the overloading rank oracle.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thb/element_ops.hpp"
#include "thb/errors.hpp"
#include "thb/hierarchy.hpp"
#include "thb/tensor_basis.hpp"
#include "thb/thb_basis.hpp"

namespace thb {

/// Distance value used for "no refinement-boundary facet along this axis".
inline constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

inline std::optional<MultiIndex> translate(const TensorBasis& tb, const MultiIndex& e, const MultiIndex& t) {
    MultiIndex k = e + t;
    if (!tb.valid_element(k)) return std::nullopt;
    return k;
}

/// The i-normal facet of cell k on `side` (-1 low, +1 high) lies in the
/// refinement boundary of Omega_l minus the outer boundary.
inline bool facet_on_refinement_boundary(const DomainHierarchy& h, int level, const MultiIndex& k, int axis,
                                         int side) {
    MultiIndex t(h.dim(), 0);
    t[axis] = side;
    const auto nb = translate(h.basis(level), k, t);
    if (!nb) return false;
    return h.in_domain(level, k) != h.in_domain(level, *nb);
}

/// Per-axis distance to the nearest refinement-boundary facet normal to that axis.
inline MultiIndex boundary_distance(const DomainHierarchy& h, int level, const MultiIndex& e) {
    const TensorBasis& tb = h.basis(level);
    MultiIndex d(h.dim(), kInfiniteDistance);
    for (int i = 0; i < h.dim(); ++i) {
        for (int dir : {-1, 1}) {
            MultiIndex k = e;
            for (int t = 0; t < d[i] && tb.valid_element(k); ++t, k[i] += dir) {
                if (facet_on_refinement_boundary(h, level, k, i, -1) ||
                    facet_on_refinement_boundary(h, level, k, i, +1)) {
                    d[i] = t;
                    break;
                }
            }
        }
    }
    return d;
}

namespace detail {

/// A face of a cell: side[i] in {-1, 0, +1}, 0 meaning the face spans axis i.
struct Face {
    MultiIndex side;
};

/// Faces of cell e lying in the refinement boundary minus the outer boundary.
inline std::vector<Face> boundary_faces(const DomainHierarchy& h, int level, const MultiIndex& e) {
    const TensorBasis& tb = h.basis(level);
    const int n = h.dim();
    const MultiIndex counts = tb.element_counts();
    std::vector<Face> out;
    for_each_in_box({MultiIndex(n, -1), MultiIndex(n, 1)}, [&](const MultiIndex& s) {
        bool any = false;
        for (int i = 0; i < n; ++i) {
            if (s[i] == 0) continue;
            any = true;
            if ((s[i] < 0 && e[i] == 0) || (s[i] > 0 && e[i] == counts[i] - 1)) return;
        }
        if (!any) return;
        MultiIndex lo = e, hi = e;
        for (int i = 0; i < n; ++i) {
            if (s[i] < 0) lo[i] -= 1;
            if (s[i] > 0) hi[i] += 1;
        }
        bool outside = false;
        for_each_in_box({lo, hi}, [&](const MultiIndex& c) {
            if (!outside && !h.in_domain(level, c)) outside = true;
        });
        if (outside) out.push_back({s});
    });
    return out;
}

/// f is contained in g when g's constraints are a subset of f's.
inline bool face_within(const Face& f, const Face& g) {
    for (int i = 0; i < f.side.size(); ++i)
        if (g.side[i] != 0 && g.side[i] != f.side[i]) return false;
    return true;
}

} // namespace detail

inline bool touches_refinement_boundary(const DomainHierarchy& h, int level, const MultiIndex& e) {
    return !detail::boundary_faces(h, level, e).empty();
}

/// Sum of inward unit normals of the minimal facet set whose intersections
/// reproduce the cell's share of the refinement boundary.
inline MultiIndex border_direction(const DomainHierarchy& h, int level, const MultiIndex& e) {
    const auto faces = detail::boundary_faces(h, level, e);
    const int n = h.dim();
    MultiIndex low(n, 0), high(n, 0);
    for (const auto& f : faces) {
        bool maximal = true;
        for (const auto& g : faces)
            if (!(g.side == f.side) && detail::face_within(f, g)) maximal = false;
        if (!maximal) continue;
        for (int i = 0; i < n; ++i) {
            if (f.side[i] < 0) low[i] = 1;
            if (f.side[i] > 0) high[i] = 1;
        }
    }
    MultiIndex dir(n, 0);
    for (int i = 0; i < n; ++i) {
        if (low[i] && high[i])
            throw MeshAssumptionError(3, "level-" + std::to_string(level) + " element " + to_string(e) +
                                             " has both " + std::to_string(i) +
                                             "-normal facets on the refinement boundary");
        dir[i] = low[i] - high[i];
    }
    return dir;
}

enum class ElementKind { Interior, Border, Plain };

inline const char* to_string(ElementKind k) {
    switch (k) {
    case ElementKind::Interior: return "interior";
    case ElementKind::Border: return "border";
    case ElementKind::Plain: return "plain";
    }
    return "?";
}

struct Classification {
    ElementKind kind = ElementKind::Plain;
    MultiIndex distance;   ///< per-axis boundary distance
    MultiIndex direction;  ///< zero unless kind == Border
};

/// Border elements: every distance is 0 or at least the degree in that axis.
inline bool distances_well_behaved(const MultiIndex& d, const MultiIndex& p) {
    for (int i = 0; i < d.size(); ++i)
        if (d[i] != 0 && d[i] < p[i]) return false;
    return true;
}

/// Only functions of the element's own level are alive on it.
inline bool only_own_level_alive(const ThbBasis& basis, int level, const MultiIndex& e) {
    for (int j : basis.alive_on(level, e))
        if (basis.function(j).level != level) return false;
    return true;
}

inline Classification classify(const ThbBasis& basis, int level, const MultiIndex& e) {
    const DomainHierarchy& h = basis.hierarchy();
    if (!h.is_active(level, e)) throw InvalidInput("classify: element " + to_string(e) + " is not active");
    Classification c;
    c.distance = boundary_distance(h, level, e);
    c.direction = MultiIndex(h.dim(), 0);
    if (touches_refinement_boundary(h, level, e) && distances_well_behaved(c.distance, h.degrees())) {
        c.kind = ElementKind::Border;
        c.direction = border_direction(h, level, e);
        return c;
    }
    c.kind = only_own_level_alive(basis, level, e) ? ElementKind::Interior : ElementKind::Plain;
    return c;
}

/// Index range [k, k + n(p-1)] along each axis, ordered increasingly and clipped to the grid.
inline IndexBox projection_box(const TensorBasis& tb, const MultiIndex& e, const MultiIndex& dir) {
    IndexBox box{e, e};
    for (int i = 0; i < tb.dim(); ++i) {
        const int ext = dir[i] * (tb.degree(i) - 1);
        box.lo[i] = std::max(0, std::min(e[i], e[i] + ext));
        box.hi[i] = std::min(tb.direction(i).num_elements() - 1, std::max(e[i], e[i] + ext));
    }
    return box;
}

/// Index box that must lie in Omega_l around a border element, clipped to the grid.
inline IndexBox wide_refinement_box(const TensorBasis& tb, const MultiIndex& e, const MultiIndex& dir) {
    IndexBox box{e, e};
    for (int i = 0; i < tb.dim(); ++i) {
        const int p = tb.degree(i);
        int lo = e[i] - p, hi = e[i] + p;
        if (dir[i] > 0) {
            lo = e[i];
            hi = e[i] + 2 * p - 1;
        } else if (dir[i] < 0) {
            lo = e[i] - 2 * p + 1;
            hi = e[i];
        }
        box.lo[i] = std::max(0, lo);
        box.hi[i] = std::min(tb.direction(i).num_elements() - 1, hi);
    }
    return box;
}

struct ProjectionElement {
    int id = 0;
    Cell generator;
    ElementKind kind = ElementKind::Interior;
    MultiIndex direction;
    IndexBox box;
    std::vector<MultiIndex> members;  ///< box order, direction 0 fastest

    int level() const noexcept { return generator.level; }
};

inline ProjectionElement make_projection_element(const ThbBasis& basis, int level, const MultiIndex& e,
                                                 const Classification& c) {
    const DomainHierarchy& h = basis.hierarchy();
    ProjectionElement pe;
    pe.generator = {level, e};
    pe.kind = c.kind;
    pe.direction = c.direction;
    if (c.kind == ElementKind::Plain)
        throw InvalidInput("element " + to_string(e) + " is neither a border nor an interior element");
    pe.box = c.kind == ElementKind::Border ? projection_box(h.basis(level), e, c.direction) : IndexBox{e, e};
    for_each_in_box(pe.box, [&](const MultiIndex& k) {
        if (!h.is_active(level, k))
            throw MeshAssumptionError(3, "projection element of level-" + std::to_string(level) + " element " +
                                             to_string(e) + " contains non-active element " + to_string(k));
        pe.members.push_back(k);
    });
    return pe;
}

inline ProjectionElement make_projection_element(const ThbBasis& basis, int level, const MultiIndex& e) {
    return make_projection_element(basis, level, e, classify(basis, level, e));
}

/// Containment of the wide-refinement box in Omega_l for every border element.
inline ValidationReport check_wide_refinement(const ThbBasis& basis) {
    ValidationReport r{"wide refinements", 3, {}};
    const DomainHierarchy& h = basis.hierarchy();
    for (int l = 1; l < h.num_levels(); ++l) {
        const TensorBasis& tb = h.basis(l);
        for (const auto& e : active_elements(h, l)) {
            if (!touches_refinement_boundary(h, l, e)) continue;
            if (!distances_well_behaved(boundary_distance(h, l, e), h.degrees())) continue;
            MultiIndex dir;
            try {
                dir = border_direction(h, l, e);
            } catch (const MeshAssumptionError& err) {
                r.violations.push_back(err.what());
                continue;
            }
            bool ok = true;
            MultiIndex bad;
            for_each_in_box(wide_refinement_box(tb, e, dir), [&](const MultiIndex& k) {
                if (ok && !h.in_domain(l, k)) {
                    ok = false;
                    bad = k;
                }
            });
            if (!ok)
                r.violations.push_back("level-" + std::to_string(l) + " border element " + to_string(e) +
                                       ": element " + to_string(bad) + " of its wide-refinement box is outside Omega_" +
                                       std::to_string(l));
        }
    }
    return r;
}

/// Projection elements with the owner of every active element.
struct Partition {
    std::vector<ProjectionElement> elements;
    /// owner[l][linear element id]: projection element id, -1 if not active.
    std::vector<std::vector<int>> owner;

    int owner_of(const DomainHierarchy& h, const Cell& c) const {
        return owner[static_cast<std::size_t>(c.level)][static_cast<std::size_t>(h.basis(c.level).element_linear(c.index))];
    }
};

namespace detail {

/// Builds the partition and records every Assumption 3/4 problem instead of throwing.
inline Partition partition_impl(const ThbBasis& basis, std::vector<std::string>& problems) {
    const DomainHierarchy& h = basis.hierarchy();
    Partition part;
    part.owner.resize(static_cast<std::size_t>(h.num_levels()));
    for (int l = 0; l < h.num_levels(); ++l) {
        const TensorBasis& tb = h.basis(l);
        part.owner[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(tb.num_elements()), -1);
        for (const auto& e : active_elements(h, l)) {
            Classification c;
            try {
                c = classify(basis, l, e);
                if (c.kind == ElementKind::Plain) continue;
                ProjectionElement pe = make_projection_element(basis, l, e, c);
                pe.id = static_cast<int>(part.elements.size());
                part.elements.push_back(std::move(pe));
            } catch (const MeshAssumptionError& err) {
                problems.push_back(err.what());
            }
        }
    }
    for (const auto& pe : part.elements) {
        const int l = pe.level();
        for (const auto& k : pe.members) {
            int& o = part.owner[static_cast<std::size_t>(l)][static_cast<std::size_t>(h.basis(l).element_linear(k))];
            if (o >= 0) {
                problems.push_back("level-" + std::to_string(l) + " element " + to_string(k) +
                                   " lies in the projection elements of " +
                                   to_string(part.elements[static_cast<std::size_t>(o)].generator.index) + " and " +
                                   to_string(pe.generator.index));
                continue;
            }
            o = pe.id;
        }
    }
    for (int l = 0; l < h.num_levels(); ++l)
        for (const auto& e : active_elements(h, l))
            if (part.owner[static_cast<std::size_t>(l)][static_cast<std::size_t>(h.basis(l).element_linear(e))] < 0)
                problems.push_back("level-" + std::to_string(l) + " element " + to_string(e) +
                                   " is not contained in any projection element");
    return part;
}

} // namespace detail

/// Disjoint cover of all active elements by projection elements, ordered by
/// (level, linear index of the generator).
inline Partition build_partition(const ThbBasis& basis) {
    std::vector<std::string> problems;
    Partition part = detail::partition_impl(basis, problems);
    if (!problems.empty()) throw MeshAssumptionError(4, problems.front());
    return part;
}

inline ValidationReport check_unique_projection_elements(const ThbBasis& basis) {
    ValidationReport r{"unique projection elements", 4, {}};
    detail::partition_impl(basis, r.violations);
    return r;
}

/// Outcome of the rank oracle.
struct RankResult {
    bool overloaded = false;
    int rank = 0;
    int count = 0;
};

namespace detail {

/// Sorted union of the functions alive on the cells.
inline std::vector<int> functions_alive_on(const ThbBasis& basis, const std::vector<Cell>& cells) {
    std::vector<int> f;
    for (const auto& c : cells)
        for (int j : basis.alive_on(c)) f.push_back(j);
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
}

inline bool alive(const ThbBasis& basis, const Cell& c, int j) {
    const auto a = basis.alive_on(c);
    return std::binary_search(a.begin(), a.end(), j);
}

} // namespace detail

/// Quadrature-weighted restriction matrix of the given functions on the cells:
/// row (cell, point) holds sqrt(w) T_j(x). Its Gram is the L2 Gram matrix of
/// the restrictions (Gauss rule with p+1 points on every cell).
inline Eigen::MatrixXd restriction_matrix(const ThbBasis& basis, const std::vector<Cell>& cells,
                                          const std::vector<int>& functions) {
    const DomainHierarchy& h = basis.hierarchy();
    const MultiIndex p = h.degrees();
    MultiIndex q = p;
    for (int i = 0; i < q.size(); ++i) q[i] += 1;
    const int m = static_cast<int>(functions.size());
    const int per_cell = bernstein_size(p);  // p+1 points per direction
    Eigen::MatrixXd v(per_cell * static_cast<int>(cells.size()), m);
    int row = 0;
    for (const auto& c : cells) {
        const Box box = cell_box(h, c);
        const BoxQuadrature rule = box_quadrature(box, q);
        Eigen::MatrixXd a(bernstein_size(p), m);
        for (int r = 0; r < m; ++r)
            a.col(r) = basis.bernstein_coefficients(functions[static_cast<std::size_t>(r)], c.level, c.index);
        for (std::size_t s = 0; s < rule.points.size(); ++s)
            v.row(row++) = std::sqrt(rule.weights[s]) *
                           (a.transpose() * tensor_bernstein(p, box, rule.points[s], MultiIndex(h.dim(), 0))).transpose();
    }
    return v;
}

inline Eigen::MatrixXd restricted_gram(const ThbBasis& basis, const std::vector<Cell>& cells,
                                       const std::vector<int>& functions) {
    const Eigen::MatrixXd v = restriction_matrix(basis, cells, functions);
    return v.transpose() * v;
}

/// Number of singular values above rel_tol times the largest one.
inline int numerical_rank(const Eigen::MatrixXd& a, double rel_tol = 1e-10) {
    if (a.size() == 0) return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double cut = rel_tol * s[0];
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > cut) ++r;
    return r;
}

inline RankResult rank_test(const ThbBasis& basis, const std::vector<Cell>& cells, const std::vector<int>& functions) {
    RankResult r;
    r.count = static_cast<int>(functions.size());
    r.rank = numerical_rank(restriction_matrix(basis, cells, functions));
    r.overloaded = r.rank < r.count;
    return r;
}

/// Restrictions of all functions alive on the region are linearly dependent.
inline RankResult is_overloaded(const ThbBasis& basis, const std::vector<Cell>& region) {
    if (region.empty()) throw InvalidInput("is_overloaded: empty region");
    for (const auto& c : region)
        if (!basis.hierarchy().is_active(c.level, c.index))
            throw InvalidInput("is_overloaded: element " + to_string(c.index) + " is not active");
    return rank_test(basis, region, detail::functions_alive_on(basis, region));
}

inline std::vector<Cell> member_cells(const ProjectionElement& pe) {
    std::vector<Cell> out;
    for (const auto& k : pe.members) out.push_back({pe.level(), k});
    return out;
}

/// Functions alive on a projection element, ascending.
inline std::vector<int> projection_functions(const ThbBasis& basis, const ProjectionElement& pe) {
    return detail::functions_alive_on(basis, member_cells(pe));
}

namespace detail {

/// Translation of k relative to the generator, in absolute values.
inline MultiIndex abs_offset(const MultiIndex& k, const MultiIndex& g) {
    MultiIndex t = k;
    for (int i = 0; i < k.size(); ++i) t[i] = std::abs(k[i] - g[i]);
    return t;
}

inline bool dominates(const MultiIndex& a, const MultiIndex& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a[i] < b[i]) return false;
    return true;
}

} // namespace detail

/// Aliveness monotonicity of truncated coarser functions inside border
/// projection elements; returns the violations found.
inline std::vector<std::string> aliveness_monotonicity_violations(const ThbBasis& basis, const Partition& part) {
    std::vector<std::string> out;
    for (const auto& pe : part.elements) {
        if (pe.kind != ElementKind::Border) continue;
        const int l = pe.level();
        const MultiIndex& g = pe.generator.index;
        for (const auto& far : pe.members)
            for (const auto& near : pe.members) {
                if (far == near || !(parent_of(far) == parent_of(near))) continue;
                if (!detail::dominates(detail::abs_offset(far, g), detail::abs_offset(near, g))) continue;
                for (int j : basis.alive_on(l, far)) {
                    if (basis.function(j).level != l - 1) continue;
                    if (!detail::alive(basis, {l, near}, j))
                        out.push_back("function " + std::to_string(j) + " alive on " + to_string(far) +
                                      " but not on " + to_string(near) + " (generator " + to_string(g) + ")");
                }
            }
    }
    return out;
}

/// Linear independence, on each member, of the functions alive there but on
/// no member nearer to the generator; returns the violations found.
inline std::vector<std::string> filtered_independence_violations(const ThbBasis& basis, const Partition& part) {
    std::vector<std::string> out;
    for (const auto& pe : part.elements) {
        if (pe.kind != ElementKind::Border) continue;
        const int l = pe.level();
        const MultiIndex& g = pe.generator.index;
        for (const auto& t1 : pe.members) {
            std::vector<int> set;
            for (int j : basis.alive_on(l, t1)) {
                bool keep = true;
                for (const auto& t : pe.members) {
                    if (t == t1 || !detail::dominates(detail::abs_offset(t1, g), detail::abs_offset(t, g))) continue;
                    if (detail::alive(basis, {l, t}, j)) {
                        keep = false;
                        break;
                    }
                }
                if (keep) set.push_back(j);
            }
            const RankResult rr = rank_test(basis, {{l, t1}}, set);
            if (rr.overloaded)
                out.push_back("member " + to_string(t1) + " of generator " + to_string(g) + ": rank " +
                              std::to_string(rr.rank) + " < " + std::to_string(rr.count));
        }
    }
    return out;
}

/// Projection elements (ids, ascending) touched by a function alive on the element.
inline std::vector<int> support_extension(const ThbBasis& basis, const Partition& part, const Cell& e) {
    const DomainHierarchy& h = basis.hierarchy();
    std::vector<int> ids;
    const auto funcs = basis.alive_on(e);
    for (const auto& c : all_active_elements(h)) {
        const auto a = basis.alive_on(c);
        for (int j : funcs)
            if (std::binary_search(a.begin(), a.end(), j)) {
                ids.push_back(part.owner_of(h, c));
                break;
            }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

/// Element size, size of its projection element and of the bounding box of its support extension.
struct MeshSizes {
    double element = 0.0;
    double projection = 0.0;
    double extension = 0.0;
};

inline MeshSizes mesh_sizes(const ThbBasis& basis, const Partition& part, const Cell& e) {
    const DomainHierarchy& h = basis.hierarchy();
    MeshSizes s;
    s.element = cell_box(h, e).max_width();
    const auto& own = part.elements[static_cast<std::size_t>(part.owner_of(h, e))];
    s.projection = index_box_extent(h.basis(own.level()), own.box).max_width();
    Box bb{h.dim(), {}, {}};
    bool first = true;
    for (int id : support_extension(basis, part, e)) {
        const auto& pe = part.elements[static_cast<std::size_t>(id)];
        const Box b = index_box_extent(h.basis(pe.level()), pe.box);
        for (int i = 0; i < h.dim(); ++i) {
            const auto ii = static_cast<std::size_t>(i);
            bb.lo[ii] = first ? b.lo[ii] : std::min(bb.lo[ii], b.lo[ii]);
            bb.hi[ii] = first ? b.hi[ii] : std::max(bb.hi[ii], b.hi[ii]);
        }
        first = false;
    }
    s.extension = bb.max_width();
    return s;
}

} // namespace thb
