#pragma once

// Hierarchical (HB) and truncated hierarchical (THB) B-spline bases.
//
// Every function keeps its coefficients in the B-spline basis of each level
// from its origin level down to the finest one. The finest-level expansion is
// the canonical representation used by eval(); the level-l expansion
// coincides with it on active level-l elements and is what the element-local
// routines use.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thb/element_ops.hpp"
#include "thb/errors.hpp"
#include "thb/hierarchy.hpp"
#include "thb/knot_vector.hpp"
#include "thb/tensor_basis.hpp"

namespace thb {

/// Sparse coefficient vector over one level's B-splines, sorted by linear index.
class SparseVector {
public:
    using Entry = std::pair<std::int64_t, double>;

    SparseVector() = default;
    explicit SparseVector(std::vector<Entry> entries) : entries_(std::move(entries)) {}

    double get(std::int64_t id) const noexcept {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                   [](const Entry& e, std::int64_t v) { return e.first < v; });
        return (it != entries_.end() && it->first == id) ? it->second : 0.0;
    }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::vector<Entry> entries_;
};

struct ThbFunction {
    int level = 0;        ///< origin level
    MultiIndex index;     ///< origin B-spline multi-index at that level
    /// per_level[m - level]: expansion in the level-m B-splines.
    std::vector<SparseVector> per_level;

    const SparseVector& at_level(int m) const { return per_level.at(static_cast<std::size_t>(m - level)); }
    const SparseVector& finest() const { return per_level.back(); }
};

enum class BasisKind { Truncated, Hierarchical };

class ThbBasis {
public:
    ThbBasis() = default;

    const DomainHierarchy& hierarchy() const noexcept { return h_; }
    BasisKind kind() const noexcept { return kind_; }
    int size() const noexcept { return static_cast<int>(functions_.size()); }
    const ThbFunction& function(int j) const { return functions_.at(static_cast<std::size_t>(j)); }
    const std::vector<ThbFunction>& functions() const noexcept { return functions_; }

    /// Functions not vanishing on the active level-l element k, ascending.
    std::span<const int> alive_on(int level, const MultiIndex& k) const {
        const auto& v = alive_[static_cast<std::size_t>(level)][static_cast<std::size_t>(h_.basis(level).element_linear(k))];
        return {v.data(), v.size()};
    }
    std::span<const int> alive_on(const Cell& c) const { return alive_on(c.level, c.index); }

    /// Index of the function originating from B-spline j of the given level, or -1.
    int find(int level, const MultiIndex& j) const {
        const auto id = h_.basis(level).basis_linear(j);
        auto it = std::lower_bound(order_.begin(), order_.end(), std::pair{level, id});
        if (it == order_.end() || *it != std::pair{level, id}) return -1;
        return static_cast<int>(it - order_.begin());
    }

    /// Bezier extraction of each level, direction and element.
    const BezierExtraction& extraction(int level, int dir, int k) const {
        return extraction_[static_cast<std::size_t>(level)][static_cast<std::size_t>(dir)][static_cast<std::size_t>(k)];
    }

    /// Local spline coefficients of function j on the level-l element k
    /// (ordered like splines_box(k), direction 0 fastest).
    Eigen::VectorXd local_coefficients(int j, int level, const MultiIndex& k) const {
        const ThbFunction& f = function(j);
        const TensorBasis& tb = h_.basis(level);
        Eigen::VectorXd c(tb.splines_box(k).count());
        if (f.level > level) {
            c.setZero();
            return c;
        }
        const SparseVector& sv = f.at_level(level);
        int r = 0;
        for_each_in_box(tb.splines_box(k), [&](const MultiIndex& q) { c[r++] = sv.get(tb.basis_linear(q)); });
        return c;
    }

    /// Bernstein coefficients of function j restricted to the level-l element k.
    Eigen::VectorXd bernstein_coefficients(int j, int level, const MultiIndex& k) const {
        Eigen::VectorXd c = local_coefficients(j, level, k);
        return apply_extraction(level, k, c);
    }

    /// Tensor product of the per-direction extraction operators applied to
    /// a local coefficient tensor.
    Eigen::VectorXd apply_extraction(int level, const MultiIndex& k, Eigen::VectorXd c) const {
        std::array<const Eigen::MatrixXd*, kMaxDim> m{};
        for (int d = 0; d < h_.dim(); ++d) m[static_cast<std::size_t>(d)] = &extraction(level, d, k[d]).extraction;
        return apply_tensor(m, h_.dim(), std::move(c));
    }

    /// Value (or mixed derivative) of function j via its finest-level expansion.
    double eval_deriv(int j, std::span<const double> x, const MultiIndex& orders) const {
        const TensorBasis& tb = h_.finest();
        check_point(tb, x);
        MultiIndex k(tb.dim());
        for (int i = 0; i < tb.dim(); ++i) k[i] = tb.direction(i).find_element(x[static_cast<std::size_t>(i)]);
        return eval_with(function(j).finest(), tb, k, x, orders);
    }
    double eval(int j, std::span<const double> x) const { return eval_deriv(j, x, MultiIndex(h_.dim(), 0)); }

    /// Value or derivative of function j at x inside the active level-l element k,
    /// through the level-l expansion.
    double eval_on_element(int j, int level, const MultiIndex& k, std::span<const double> x,
                           const MultiIndex& orders) const {
        const ThbFunction& f = function(j);
        if (f.level > level) return 0.0;
        return eval_with(f.at_level(level), h_.basis(level), k, x, orders);
    }

private:
    static double eval_with(const SparseVector& sv, const TensorBasis& tb, const MultiIndex& k,
                            std::span<const double> x, const MultiIndex& orders) {
        const int n = tb.dim();
        std::array<Eigen::MatrixXd, kMaxDim> ders;
        for (int i = 0; i < n; ++i)
            ders[static_cast<std::size_t>(i)] =
                basis_derivatives_on_element(tb.direction(i), k[i], x[static_cast<std::size_t>(i)], orders[i]);
        double s = 0.0;
        for_each_in_box(tb.splines_box(k), [&](const MultiIndex& q) {
            const double c = sv.get(tb.basis_linear(q));
            if (c == 0.0) return;
            double v = c;
            for (int i = 0; i < n; ++i) v *= ders[static_cast<std::size_t>(i)](orders[i], q[i] - k[i]);
            s += v;
        });
        return s;
    }

    friend ThbBasis build_basis(const DomainHierarchy& h, BasisKind kind);

    DomainHierarchy h_;
    BasisKind kind_ = BasisKind::Truncated;
    std::vector<ThbFunction> functions_;
    std::vector<std::pair<int, std::int64_t>> order_;
    std::vector<std::vector<std::vector<int>>> alive_;
    std::vector<std::vector<std::vector<BezierExtraction>>> extraction_;
};

namespace detail {

/// Expands level-l coefficients into level-(l+1) coefficients, dropping
/// entries flagged in `drop` (the active fine splines when truncating).
inline SparseVector refine_coefficients(const SparseVector& sv, const TensorBasis& coarse, const TensorBasis& fine,
                                        const std::vector<std::vector<SparseCoeffs>>& cols,
                                        const std::vector<char>* drop) {
    const int n = coarse.dim();
    MultiIndex lo(n, std::numeric_limits<int>::max()), hi(n, std::numeric_limits<int>::min());
    for (const auto& [id, c] : sv.entries()) {
        const MultiIndex j = coarse.basis_multi(id);
        for (int i = 0; i < n; ++i) {
            const auto& col = cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(j[i])];
            lo[i] = std::min(lo[i], col.front().first);
            hi[i] = std::max(hi[i], col.back().first);
        }
    }
    if (sv.empty()) return {};
    const IndexBox box{lo, hi};
    std::vector<double> buf(static_cast<std::size_t>(box.count()), 0.0);
    auto local = [&](const MultiIndex& q) {
        std::int64_t id = 0;
        for (int i = n - 1; i >= 0; --i) id = id * (hi[i] - lo[i] + 1) + (q[i] - lo[i]);
        return id;
    };
    for (const auto& [id, c] : sv.entries()) {
        const MultiIndex j = coarse.basis_multi(id);
        std::array<const SparseCoeffs*, kMaxDim> cc{};
        MultiIndex a(n, 0), b(n, 0);
        for (int i = 0; i < n; ++i) {
            cc[static_cast<std::size_t>(i)] = &cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(j[i])];
            b[i] = static_cast<int>(cc[static_cast<std::size_t>(i)]->size()) - 1;
        }
        for_each_in_box({a, b}, [&](const MultiIndex& t) {
            MultiIndex q(n);
            double v = c;
            for (int i = 0; i < n; ++i) {
                const auto& e = (*cc[static_cast<std::size_t>(i)])[static_cast<std::size_t>(t[i])];
                q[i] = e.first;
                v *= e.second;
            }
            buf[static_cast<std::size_t>(local(q))] += v;
        });
    }
    std::vector<SparseVector::Entry> out;
    for_each_in_box(box, [&](const MultiIndex& q) {
        const double v = buf[static_cast<std::size_t>(local(q))];
        if (v == 0.0) return;
        const auto id = fine.basis_linear(q);
        if (drop && (*drop)[static_cast<std::size_t>(id)]) return;
        out.emplace_back(id, v);
    });
    std::sort(out.begin(), out.end());
    return SparseVector(std::move(out));
}

/// Every cell of the support of sv (level l) is covered by Omega_{l+1}.
inline bool support_inside_next(const DomainHierarchy& h, int level, const SparseVector& sv) {
    const TensorBasis& tb = h.basis(level);
    for (const auto& [id, c] : sv.entries()) {
        bool ok = true;
        for_each_in_box(tb.support_box(tb.basis_multi(id)), [&](const MultiIndex& k) {
            if (ok && !h.covered(level, k)) ok = false;
        });
        if (!ok) return false;
    }
    return true;
}

} // namespace detail

/// Recursive HB/THB construction; truncation is applied at every level crossing
/// for BasisKind::Truncated.
inline ThbBasis build_basis(const DomainHierarchy& h, BasisKind kind) {
    ThbBasis out;
    out.h_ = h;
    out.kind_ = kind;
    const int L = h.num_levels();
    const int n = h.dim();

    std::vector<ThbFunction> current;
    auto add_active = [&](int level) {
        const TensorBasis& tb = h.basis(level);
        for (std::int64_t id = 0; id < tb.num_basis(); ++id) {
            const MultiIndex j = tb.basis_multi(id);
            if (level > 0 && !spline_is_active(h, level, j)) continue;
            ThbFunction f{level, j, {SparseVector({{id, 1.0}})}};
            current.push_back(std::move(f));
        }
    };
    add_active(0);
    for (int m = 1; m < L; ++m) {
        const TensorBasis& coarse = h.basis(m - 1);
        const TensorBasis& fine = h.basis(m);
        std::vector<std::vector<SparseCoeffs>> cols;
        for (int i = 0; i < n; ++i) cols.push_back(two_scale_all(coarse.direction(i)));
        std::vector<char> active(static_cast<std::size_t>(fine.num_basis()), 0);
        for (std::int64_t id = 0; id < fine.num_basis(); ++id)
            active[static_cast<std::size_t>(id)] = spline_is_active(h, m, fine.basis_multi(id)) ? 1 : 0;

        std::vector<ThbFunction> next;
        next.reserve(current.size());
        for (auto& f : current) {
            if (detail::support_inside_next(h, m - 1, f.per_level.back())) continue;
            f.per_level.push_back(detail::refine_coefficients(f.per_level.back(), coarse, fine, cols,
                                                              kind == BasisKind::Truncated ? &active : nullptr));
            next.push_back(std::move(f));
        }
        current = std::move(next);
        add_active(m);
    }
    out.functions_ = std::move(current);
    for (const auto& f : out.functions_) out.order_.emplace_back(f.level, h.basis(f.level).basis_linear(f.index));

    out.alive_.resize(static_cast<std::size_t>(L));
    for (int m = 0; m < L; ++m) {
        const TensorBasis& tb = h.basis(m);
        std::vector<char> act(static_cast<std::size_t>(tb.num_elements()), 0);
        for_each_in_box(tb.all_elements(), [&](const MultiIndex& k) {
            act[static_cast<std::size_t>(tb.element_linear(k))] = h.is_active(m, k) ? 1 : 0;
        });
        auto& alive = out.alive_[static_cast<std::size_t>(m)];
        alive.assign(static_cast<std::size_t>(tb.num_elements()), {});
        for (int fj = 0; fj < out.size(); ++fj) {
            const ThbFunction& f = out.functions_[static_cast<std::size_t>(fj)];
            if (f.level > m) continue;
            for (const auto& [id, c] : f.at_level(m).entries()) {
                for_each_in_box(tb.support_box(tb.basis_multi(id)), [&](const MultiIndex& k) {
                    const auto e = static_cast<std::size_t>(tb.element_linear(k));
                    if (!act[e]) return;
                    auto& v = alive[e];
                    if (v.empty() || v.back() != fj) v.push_back(fj);
                });
            }
        }
    }

    out.extraction_.resize(static_cast<std::size_t>(L));
    for (int m = 0; m < L; ++m) {
        const TensorBasis& tb = h.basis(m);
        for (int i = 0; i < n; ++i) {
            std::vector<BezierExtraction> ex;
            for (int k = 0; k < tb.direction(i).num_elements(); ++k) ex.push_back(bezier_extraction(tb.direction(i), k));
            out.extraction_[static_cast<std::size_t>(m)].push_back(std::move(ex));
        }
    }
    return out;
}

inline ThbBasis build_thb_basis(const DomainHierarchy& h) { return build_basis(h, BasisKind::Truncated); }
inline ThbBasis build_hb_basis(const DomainHierarchy& h) { return build_basis(h, BasisKind::Hierarchical); }

/// Every active level-l element only carries functions from levels l-1 and l.
inline ValidationReport check_two_level(const ThbBasis& basis) {
    ValidationReport r{"two-level grading", 2, {}};
    const DomainHierarchy& h = basis.hierarchy();
    for (int l = 0; l < h.num_levels(); ++l)
        for (const auto& k : active_elements(h, l))
            for (int j : basis.alive_on(l, k)) {
                const int fl = basis.function(j).level;
                if (fl < l - 1)
                    r.violations.push_back("level-" + std::to_string(l) + " element " + to_string(k) +
                                           " carries a level-" + std::to_string(fl) + " function " +
                                           to_string(basis.function(j).index));
            }
    return r;
}

/// THB basis of a hierarchy that must satisfy bisection/nestedness and
/// two-level grading; throws MeshAssumptionError naming the first violation.
inline ThbBasis build_checked_thb_basis(const DomainHierarchy& h) {
    const ValidationReport b = check_bisection(h);
    if (!b.ok()) throw MeshAssumptionError(b.assumption, b.violations.front());
    ThbBasis basis = build_thb_basis(h);
    const ValidationReport t = check_two_level(basis);
    if (!t.ok()) throw MeshAssumptionError(t.assumption, t.violations.front());
    return basis;
}

} // namespace thb
