#pragma once

// Domain hierarchies Omega_0 ⊇ Omega_1 ⊇ ... on dyadically bisected levels.
//
// Levels are 0-based: level 0 is the coarse mesh and Omega_0 is the whole box.
// Omega_{l+1} is stored as the set of level-l cells it covers, so it is always
// a union of whole level-l cells and nestedness is checked on insertion.

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thb/errors.hpp"
#include "thb/tensor_basis.hpp"

namespace thb {

/// Outcome of one mesh validator.
struct ValidationReport {
    std::string name;
    int assumption = 0;
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

inline std::string to_string(const MultiIndex& k) {
    std::string s = "(";
    for (int i = 0; i < k.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(k[i]);
    }
    return s + ")";
}

inline MultiIndex parent_of(const MultiIndex& k) {
    MultiIndex p = k;
    for (int i = 0; i < k.size(); ++i) p[i] = k[i] / 2;
    return p;
}

inline IndexBox children_of(const MultiIndex& k) {
    MultiIndex lo = k, hi = k;
    for (int i = 0; i < k.size(); ++i) {
        lo[i] = 2 * k[i];
        hi[i] = 2 * k[i] + 1;
    }
    return {lo, hi};
}

/// Level l+1 basis is the per-direction bisection of level l.
inline std::vector<TensorBasis> build_levels(const TensorBasis& coarse, int levels) {
    if (levels < 1) throw InvalidInput("a hierarchy needs at least one level");
    std::vector<TensorBasis> out{coarse};
    for (int l = 1; l < levels; ++l) out.push_back(out.back().bisected());
    return out;
}

class DomainHierarchy {
public:
    DomainHierarchy() = default;
    DomainHierarchy(TensorBasis coarse, int levels) : bases_(build_levels(coarse, levels)) {
        for (int l = 0; l + 1 < levels; ++l)
            covered_.emplace_back(static_cast<std::size_t>(bases_[static_cast<std::size_t>(l)].num_elements()), 0);
    }

    int num_levels() const noexcept { return static_cast<int>(bases_.size()); }
    int dim() const { return bases_.front().dim(); }
    const TensorBasis& basis(int level) const { return bases_.at(static_cast<std::size_t>(level)); }
    const TensorBasis& coarse() const { return bases_.front(); }
    const TensorBasis& finest() const { return bases_.back(); }
    MultiIndex degrees() const { return coarse().degrees(); }

    /// Level-l cell is part of Omega_{l+1}.
    bool covered(int level, const MultiIndex& k) const {
        if (level + 1 >= num_levels()) return false;
        return covered_[static_cast<std::size_t>(level)][static_cast<std::size_t>(basis(level).element_linear(k))] != 0;
    }
    bool covered_linear(int level, std::int64_t id) const {
        if (level + 1 >= num_levels()) return false;
        return covered_[static_cast<std::size_t>(level)][static_cast<std::size_t>(id)] != 0;
    }

    /// Level-l cell lies in Omega_l.
    bool in_domain(int level, const MultiIndex& k) const {
        if (level == 0) return true;
        return covered(level - 1, parent_of(k));
    }

    /// Level-l cell is in Omega_l but not in Omega_{l+1}.
    bool is_active(int level, const MultiIndex& k) const { return in_domain(level, k) && !covered(level, k); }

    /// Adds the level-l cell to Omega_{l+1}; returns true if the hierarchy changed.
    /// Appends a level when needed.
    bool cover(int level, const MultiIndex& k) {
        if (!basis(level).valid_element(k)) throw InvalidInput("cell " + to_string(k) + " outside the level grid");
        if (!in_domain(level, k))
            throw InvalidInput("cannot refine level-" + std::to_string(level) + " cell " + to_string(k) +
                               " outside Omega_" + std::to_string(level));
        while (level + 1 >= num_levels()) add_level();
        auto& c = covered_[static_cast<std::size_t>(level)][static_cast<std::size_t>(basis(level).element_linear(k))];
        if (c) return false;
        c = 1;
        return true;
    }

    void add_level() {
        covered_.emplace_back(static_cast<std::size_t>(bases_.back().num_elements()), 0);
        bases_.push_back(bases_.back().bisected());
    }

    /// Level-l cells whose union is Omega_l (l >= 1), tuple-sorted.
    std::vector<MultiIndex> domain_cells(int level) const {
        std::vector<MultiIndex> out;
        for_each_in_box(basis(level).all_elements(), [&](const MultiIndex& k) {
            if (in_domain(level, k)) out.push_back(k);
        });
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Level-l cells covered by Omega_{l+1}.
    std::vector<MultiIndex> covered_cells(int level) const {
        std::vector<MultiIndex> out;
        if (level + 1 >= num_levels()) return out;
        for_each_in_box(basis(level).all_elements(), [&](const MultiIndex& k) {
            if (covered(level, k)) out.push_back(k);
        });
        return out;
    }

    /// Drops trailing levels whose refinement domain is empty.
    void trim() {
        while (num_levels() > 1) {
            const auto& last = covered_.back();
            if (std::find(last.begin(), last.end(), char{1}) != last.end()) break;
            covered_.pop_back();
            bases_.pop_back();
        }
    }

    /// Same hierarchy with every coordinate multiplied by s.
    DomainHierarchy scaled(double s) const {
        DomainHierarchy h = *this;
        for (auto& b : h.bases_) b = b.scaled(s);
        return h;
    }

    bool operator==(const DomainHierarchy&) const = default;

private:
    std::vector<TensorBasis> bases_;
    std::vector<std::vector<char>> covered_;
};

/// True when every cell of the spline's support lies in Omega_l.
inline bool spline_is_active(const DomainHierarchy& h, int level, const MultiIndex& j) {
    bool ok = true;
    for_each_in_box(h.basis(level).support_box(j), [&](const MultiIndex& k) {
        if (ok && !h.in_domain(level, k)) ok = false;
    });
    return ok;
}

struct ActiveSplit {
    std::vector<std::int64_t> active;
    std::vector<std::int64_t> passive;
};

/// Splits the level-l B-splines by support containment in Omega_l.
inline ActiveSplit split_active(const DomainHierarchy& h, int level) {
    if (level < 0 || level >= h.num_levels()) throw InvalidInput("level out of range");
    const TensorBasis& tb = h.basis(level);
    ActiveSplit out;
    for (std::int64_t id = 0; id < tb.num_basis(); ++id)
        (spline_is_active(h, level, tb.basis_multi(id)) ? out.active : out.passive).push_back(id);
    return out;
}

/// Zeroes the coefficients of the active level-l splines.
inline Eigen::VectorXd truncate(const DomainHierarchy& h, int level, const Eigen::VectorXd& coeffs) {
    const TensorBasis& tb = h.basis(level);
    if (coeffs.size() != tb.num_basis()) throw InvalidInput("coefficient vector size mismatch");
    Eigen::VectorXd out = coeffs;
    for (std::int64_t id = 0; id < tb.num_basis(); ++id)
        if (spline_is_active(h, level, tb.basis_multi(id))) out[id] = 0.0;
    return out;
}

/// Active level-l elements in linear order.
inline std::vector<MultiIndex> active_elements(const DomainHierarchy& h, int level) {
    std::vector<MultiIndex> out;
    for_each_in_box(h.basis(level).all_elements(), [&](const MultiIndex& k) {
        if (h.is_active(level, k)) out.push_back(k);
    });
    return out;
}

/// Level-qualified element.
struct Cell {
    int level = 0;
    MultiIndex index;

    bool operator==(const Cell& o) const noexcept { return level == o.level && index == o.index; }
};

/// All active elements ordered by (level, linear index).
inline std::vector<Cell> all_active_elements(const DomainHierarchy& h) {
    std::vector<Cell> out;
    for (int l = 0; l < h.num_levels(); ++l)
        for (auto& k : active_elements(h, l)) out.push_back({l, k});
    return out;
}

/// Bisection between consecutive levels and nestedness of the domains.
inline ValidationReport check_bisection(const DomainHierarchy& h) {
    ValidationReport r{"bisection and nestedness", 1, {}};
    for (int l = 1; l < h.num_levels(); ++l) {
        if (!(h.basis(l) == h.basis(l - 1).bisected()))
            r.violations.push_back("level " + std::to_string(l) + " is not the bisection of level " +
                                   std::to_string(l - 1));
        for_each_in_box(h.basis(l).all_elements(), [&](const MultiIndex& k) {
            if (h.covered(l, k) && !h.in_domain(l, k))
                r.violations.push_back("level-" + std::to_string(l) + " cell " + to_string(k) +
                                       " refined outside Omega_" + std::to_string(l));
        });
    }
    return r;
}

/// Largest ratio of neighbouring coarse span lengths over all directions.
inline double coarse_aspect_ratio(const DomainHierarchy& h) {
    double worst = 1.0;
    for (const auto& kv : h.coarse().directions()) {
        const auto& b = kv.breaks();
        double lo = b[1] - b[0], hi = lo;
        for (std::size_t i = 1; i + 1 < b.size(); ++i) {
            lo = std::min(lo, b[i + 1] - b[i]);
            hi = std::max(hi, b[i + 1] - b[i]);
        }
        worst = std::max(worst, hi / lo);
    }
    return worst;
}

/// Covers every level-l cell of `box` (clipped to the grid) by Omega_{l+1}.
inline bool cover_box(DomainHierarchy& h, int level, IndexBox box) {
    const MultiIndex counts = h.basis(level).element_counts();
    for (int i = 0; i < box.dim(); ++i) {
        box.lo[i] = std::max(box.lo[i], 0);
        box.hi[i] = std::min(box.hi[i], counts[i] - 1);
    }
    bool changed = false;
    for_each_in_box(box, [&](const MultiIndex& k) { changed = h.cover(level, k) || changed; });
    return changed;
}

} // namespace thb
