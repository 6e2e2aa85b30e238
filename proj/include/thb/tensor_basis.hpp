#pragma once

// Tensor-product B-spline spaces on boxes. Linear indices run lexicographically
// with direction 0 fastest, for both splines and elements.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "thb/errors.hpp"
#include "thb/knot_vector.hpp"

namespace thb {

inline constexpr int kMaxDim = 3;

/// Fixed-capacity integer tuple (element or spline multi-index, translations).
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(int dim, int fill = 0) : dim_(dim) {
        if (dim < 1 || dim > kMaxDim) throw InvalidInput("dimension must be in 1.." + std::to_string(kMaxDim));
        v_.fill(fill);
    }
    MultiIndex(std::initializer_list<int> values) : MultiIndex(static_cast<int>(values.size())) {
        int i = 0;
        for (int x : values) v_[static_cast<std::size_t>(i++)] = x;
    }

    int size() const noexcept { return dim_; }
    int& operator[](int i) noexcept { return v_[static_cast<std::size_t>(i)]; }
    int operator[](int i) const noexcept { return v_[static_cast<std::size_t>(i)]; }

    bool operator==(const MultiIndex& o) const noexcept {
        if (dim_ != o.dim_) return false;
        for (int i = 0; i < dim_; ++i)
            if (v_[static_cast<std::size_t>(i)] != o.v_[static_cast<std::size_t>(i)]) return false;
        return true;
    }
    /// Tuple-lexicographic order (direction 0 most significant).
    bool operator<(const MultiIndex& o) const noexcept {
        for (int i = 0; i < dim_; ++i)
            if ((*this)[i] != o[i]) return (*this)[i] < o[i];
        return false;
    }

    MultiIndex operator+(const MultiIndex& t) const noexcept {
        MultiIndex r = *this;
        for (int i = 0; i < dim_; ++i) r[i] += t[i];
        return r;
    }

private:
    int dim_ = 1;
    std::array<int, kMaxDim> v_{};
};

/// Integer box [lo, hi] (inclusive) of multi-indices.
struct IndexBox {
    MultiIndex lo;
    MultiIndex hi;

    int dim() const noexcept { return lo.size(); }
    bool contains(const MultiIndex& k) const noexcept {
        for (int i = 0; i < dim(); ++i)
            if (k[i] < lo[i] || k[i] > hi[i]) return false;
        return true;
    }
    bool empty() const noexcept {
        for (int i = 0; i < dim(); ++i)
            if (hi[i] < lo[i]) return true;
        return false;
    }
    std::int64_t count() const noexcept {
        if (empty()) return 0;
        std::int64_t c = 1;
        for (int i = 0; i < dim(); ++i) c *= hi[i] - lo[i] + 1;
        return c;
    }
};

/// Calls f(MultiIndex) for every index in the box, direction 0 fastest.
template <class F>
void for_each_in_box(const IndexBox& box, F&& f) {
    if (box.empty()) return;
    MultiIndex k = box.lo;
    const int n = box.dim();
    while (true) {
        f(static_cast<const MultiIndex&>(k));
        int d = 0;
        while (d < n) {
            if (++k[d] <= box.hi[d]) break;
            k[d] = box.lo[d];
            ++d;
        }
        if (d == n) return;
    }
}

class TensorBasis {
public:
    TensorBasis() = default;
    explicit TensorBasis(std::vector<KnotVector> directions) : dirs_(std::move(directions)) {
        if (dirs_.empty() || static_cast<int>(dirs_.size()) > kMaxDim)
            throw InvalidInput("tensor basis dimension must be in 1.." + std::to_string(kMaxDim));
    }

    int dim() const noexcept { return static_cast<int>(dirs_.size()); }
    const KnotVector& direction(int i) const { return dirs_.at(static_cast<std::size_t>(i)); }
    const std::vector<KnotVector>& directions() const noexcept { return dirs_; }
    int degree(int i) const { return direction(i).degree(); }
    MultiIndex degrees() const {
        MultiIndex p(dim());
        for (int i = 0; i < dim(); ++i) p[i] = degree(i);
        return p;
    }
    int max_degree() const {
        int m = 0;
        for (int i = 0; i < dim(); ++i) m = std::max(m, degree(i));
        return m;
    }
    int min_degree() const {
        int m = degree(0);
        for (int i = 1; i < dim(); ++i) m = std::min(m, degree(i));
        return m;
    }

    MultiIndex element_counts() const {
        MultiIndex c(dim());
        for (int i = 0; i < dim(); ++i) c[i] = direction(i).num_elements();
        return c;
    }
    MultiIndex basis_counts() const {
        MultiIndex c(dim());
        for (int i = 0; i < dim(); ++i) c[i] = direction(i).num_basis();
        return c;
    }
    std::int64_t num_elements() const { return product(element_counts()); }
    std::int64_t num_basis() const { return product(basis_counts()); }

    std::int64_t element_linear(const MultiIndex& k) const { return linearize(k, element_counts()); }
    MultiIndex element_multi(std::int64_t id) const { return delinearize(id, element_counts()); }
    std::int64_t basis_linear(const MultiIndex& j) const { return linearize(j, basis_counts()); }
    MultiIndex basis_multi(std::int64_t id) const { return delinearize(id, basis_counts()); }

    bool valid_element(const MultiIndex& k) const {
        if (k.size() != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (k[i] < 0 || k[i] >= direction(i).num_elements()) return false;
        return true;
    }
    bool valid_basis(const MultiIndex& j) const {
        if (j.size() != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (j[i] < 0 || j[i] >= direction(i).num_basis()) return false;
        return true;
    }

    IndexBox all_elements() const {
        MultiIndex hi = element_counts();
        for (int i = 0; i < dim(); ++i) hi[i] -= 1;
        return {MultiIndex(dim(), 0), hi};
    }

    /// Indices (box) of the splines that do not vanish on element k.
    IndexBox splines_box(const MultiIndex& k) const {
        MultiIndex lo(dim()), hi(dim());
        for (int i = 0; i < dim(); ++i) {
            lo[i] = k[i];
            hi[i] = k[i] + degree(i);
        }
        return {lo, hi};
    }
    /// Elements (box) in the support of spline j.
    IndexBox support_box(const MultiIndex& j) const {
        MultiIndex lo(dim()), hi(dim());
        for (int i = 0; i < dim(); ++i) {
            lo[i] = direction(i).support_first_element(j[i]);
            hi[i] = direction(i).support_last_element(j[i]);
        }
        return {lo, hi};
    }

    /// Physical box of element k as (lower corner, upper corner).
    std::pair<std::array<double, kMaxDim>, std::array<double, kMaxDim>> element_bounds(const MultiIndex& k) const {
        std::array<double, kMaxDim> a{}, b{};
        for (int i = 0; i < dim(); ++i) {
            a[static_cast<std::size_t>(i)] = direction(i).element_lower(k[i]);
            b[static_cast<std::size_t>(i)] = direction(i).element_upper(k[i]);
        }
        return {a, b};
    }

    TensorBasis bisected() const {
        std::vector<KnotVector> d;
        for (const auto& kv : dirs_) d.push_back(bisect(kv));
        return TensorBasis(std::move(d));
    }
    TensorBasis scaled(double s) const {
        std::vector<KnotVector> d;
        for (const auto& kv : dirs_) d.push_back(kv.scaled(s));
        return TensorBasis(std::move(d));
    }

    bool operator==(const TensorBasis&) const = default;

private:
    static std::int64_t product(const MultiIndex& c) {
        std::int64_t r = 1;
        for (int i = 0; i < c.size(); ++i) r *= c[i];
        return r;
    }
    static std::int64_t linearize(const MultiIndex& k, const MultiIndex& counts) {
        std::int64_t id = 0;
        for (int i = counts.size() - 1; i >= 0; --i) id = id * counts[i] + k[i];
        return id;
    }
    static MultiIndex delinearize(std::int64_t id, const MultiIndex& counts) {
        MultiIndex k(counts.size());
        for (int i = 0; i < counts.size(); ++i) {
            k[i] = static_cast<int>(id % counts[i]);
            id /= counts[i];
        }
        return k;
    }

    std::vector<KnotVector> dirs_;
};

/// All elements in lexicographic order (direction 0 fastest).
inline std::vector<MultiIndex> element_list(const TensorBasis& tb) {
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(tb.num_elements()));
    for_each_in_box(tb.all_elements(), [&](const MultiIndex& k) { out.push_back(k); });
    return out;
}

/// Linear indices of the splines that do not vanish on element k.
inline std::vector<std::int64_t> splines_on_element(const TensorBasis& tb, const MultiIndex& k) {
    if (!tb.valid_element(k)) throw InvalidInput("element index out of range");
    std::vector<std::int64_t> out;
    for_each_in_box(tb.splines_box(k), [&](const MultiIndex& j) { out.push_back(tb.basis_linear(j)); });
    return out;
}

/// Linear indices of the elements in the support of spline j.
inline std::vector<std::int64_t> elements_of_spline(const TensorBasis& tb, const MultiIndex& j) {
    if (!tb.valid_basis(j)) throw InvalidInput("spline index out of range");
    std::vector<std::int64_t> out;
    for_each_in_box(tb.support_box(j), [&](const MultiIndex& k) { out.push_back(tb.element_linear(k)); });
    return out;
}

inline void check_point(const TensorBasis& tb, std::span<const double> x) {
    if (static_cast<int>(x.size()) != tb.dim()) throw InvalidInput("point dimension mismatch");
    for (int i = 0; i < tb.dim(); ++i) {
        const auto& kv = tb.direction(i);
        if (!(x[static_cast<std::size_t>(i)] >= kv.lower() && x[static_cast<std::size_t>(i)] <= kv.upper()))
            throw DomainError("evaluation point outside the domain");
    }
}

/// Mixed partial derivative of tensor spline j at x; orders[i] per direction.
inline double eval_tensor_deriv(const TensorBasis& tb, const MultiIndex& j, std::span<const double> x,
                                const MultiIndex& orders) {
    check_point(tb, x);
    double v = 1.0;
    for (int i = 0; i < tb.dim(); ++i) {
        v *= eval_single(tb.direction(i), j[i], x[static_cast<std::size_t>(i)], orders[i]);
        if (v == 0.0) return 0.0;
    }
    return v;
}

inline double eval_tensor(const TensorBasis& tb, const MultiIndex& j, std::span<const double> x) {
    return eval_tensor_deriv(tb, j, x, MultiIndex(tb.dim(), 0));
}

/// Uniform tensor basis on the unit box with the same degree/element count per direction.
inline TensorBasis uniform_tensor_basis(const MultiIndex& degrees, const MultiIndex& elements) {
    std::vector<KnotVector> d;
    for (int i = 0; i < degrees.size(); ++i) d.push_back(uniform_knot_vector(degrees[i], elements[i]));
    return TensorBasis(std::move(d));
}

} // namespace thb
