#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "thb/adaptive.hpp"
#include "thb/harness.hpp"

using namespace thb;

namespace {

std::vector<MultiIndex> covered_list(const DomainHierarchy& h, int level) {
    if (level + 1 >= h.num_levels()) return {};
    auto v = h.covered_cells(level);
    std::sort(v.begin(), v.end());
    return v;
}

bool includes(const DomainHierarchy& big, const DomainHierarchy& small) {
    for (int l = 0; l + 1 < small.num_levels(); ++l) {
        if (l + 1 >= big.num_levels()) return false;
        for (const auto& k : small.covered_cells(l))
            if (!big.covered(l, k)) return false;
    }
    return true;
}

DomainHierarchy quad2d(int n = 6) { return DomainHierarchy(uniform_tensor_basis({2, 2}, {n, n}), 1); }

} // namespace

TEST(Doerfler, Examples) {
    EXPECT_EQ(doerfler_indices({4, 3, 2, 1}, 0.5), (std::vector<int>{0, 1}));
    EXPECT_EQ(doerfler_indices({1, 3, 4, 2}, 1e-9), (std::vector<int>{2}));
    const auto eq = doerfler_indices(std::vector<double>(10, 2.0), 0.5);
    EXPECT_EQ(eq, (std::vector<int>{0, 1, 2, 3, 4}));
    EXPECT_THROW(doerfler_indices({1, 2}, 0.0), InvalidInput);
    EXPECT_THROW(doerfler_indices({1, 2}, 1.0), InvalidInput);
    EXPECT_TRUE(doerfler_indices({0, 0}, 0.5).empty());
}

TEST(Doerfler, MinimalOnRandomErrors) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> e(1 + trial % 37);
        for (auto& v : e) v = u(rng);
        const double theta = 0.05 + 0.9 * u(rng);
        const auto idx = doerfler_indices(e, theta);
        const double total = std::accumulate(e.begin(), e.end(), 0.0);
        double s = 0.0, smallest = 1e300;
        for (int i : idx) {
            s += e[static_cast<std::size_t>(i)];
            smallest = std::min(smallest, e[static_cast<std::size_t>(i)]);
        }
        EXPECT_GE(s, theta * total);
        EXPECT_LT(s - smallest, theta * total);
        // no unmarked element beats a marked one
        for (std::size_t i = 0; i < e.size(); ++i)
            if (std::find(idx.begin(), idx.end(), static_cast<int>(i)) == idx.end()) EXPECT_LE(e[i], smallest);
    }
}

TEST(MarkElements, MapsToCells) {
    const DomainHierarchy h = quad2d(2);
    const auto cells = all_active_elements(h);
    const MarkSet m = mark_elements({0.1, 0.9, 0.2, 0.3}, cells, 0.5);
    ASSERT_EQ(m.cells.size(), 1u);
    EXPECT_EQ(m.cells[0].index, (MultiIndex{1, 0}));
    EXPECT_THROW(mark_elements({0.1}, cells, 0.5), InvalidInput);
}

TEST(SupportCover, OneDimensionalQuadratic) {
    const DomainHierarchy h(uniform_tensor_basis(MultiIndex{2}, MultiIndex{8}), 1);
    const DomainHierarchy a = support_cover(h, MarkSet{{{0, MultiIndex{4}}}});
    EXPECT_EQ(covered_list(a, 0), (std::vector<MultiIndex>{MultiIndex{3}, MultiIndex{4}, MultiIndex{5}}));
    // boundary element: the first spline lives on the first element alone
    const DomainHierarchy b = support_cover(h, MarkSet{{{0, MultiIndex{0}}}});
    EXPECT_EQ(covered_list(b, 0), (std::vector<MultiIndex>{MultiIndex{0}}));
    EXPECT_TRUE(check_spline_support_domains(b).ok());
    EXPECT_THROW(support_cover(a, MarkSet{{{0, MultiIndex{4}}}}), InvalidInput);
    // marks already refined by an earlier support are skipped
    const DomainHierarchy c = support_cover(h, MarkSet{{{0, MultiIndex{4}}, {0, MultiIndex{5}}}});
    EXPECT_TRUE(c == a || includes(c, a));
    EXPECT_TRUE(check_spline_support_domains(c).ok());
}

TEST(SupportCover, TwoDimensionalIsOneSupport) {
    const DomainHierarchy h = support_cover(quad2d(), MarkSet{{{0, MultiIndex{2, 3}}}});
    const auto cov = covered_list(h, 0);
    ASSERT_EQ(cov.size(), 9u);
    for (const auto& k : cov) {
        EXPECT_LE(std::abs(k[0] - 2), 1);
        EXPECT_LE(std::abs(k[1] - 3), 1);
    }
}

TEST(MostCentredSpline, UniqueAndTies) {
    const TensorBasis q = uniform_tensor_basis(MultiIndex{2}, MultiIndex{8});
    EXPECT_EQ(most_centred_spline(q, MultiIndex{4}), MultiIndex{5});
    // odd degree: two supports are equally centred, the lower index wins
    const TensorBasis c = uniform_tensor_basis(MultiIndex{3}, MultiIndex{8});
    const MultiIndex j = most_centred_spline(c, MultiIndex{4});
    const IndexBox s = c.support_box(j);
    EXPECT_EQ(s.lo, MultiIndex{2});
    EXPECT_EQ(s.hi, MultiIndex{5});
}

TEST(GradeMesh, FixpointAndRepair) {
    const DomainHierarchy graded = oracle::f1();
    EXPECT_TRUE(grade_mesh(graded) == graded);
    DomainHierarchy h(uniform_tensor_basis(MultiIndex{2}, MultiIndex{8}), 3);
    h.cover(0, MultiIndex{3});
    h.cover(0, MultiIndex{4});
    h.cover(1, MultiIndex{7});
    h.cover(1, MultiIndex{8});
    ASSERT_FALSE(check_two_level(build_thb_basis(h)).ok());
    const DomainHierarchy g = grade_mesh(h);
    EXPECT_TRUE(check_two_level(build_thb_basis(g)).ok());
    EXPECT_TRUE(includes(g, h));
    EXPECT_GT(covered_list(g, 0).size(), 2u);
    EXPECT_TRUE(grade_mesh(g) == g);
}

TEST(CellSetTopology, EulerAndComponents) {
    std::vector<MultiIndex> box, ring, split;
    for_each_in_box({MultiIndex{0, 0}, MultiIndex{2, 2}}, [&](const MultiIndex& k) {
        box.push_back(k);
        if (!(k == MultiIndex{1, 1})) ring.push_back(k);
        if (k[1] != 1) split.push_back(k);
    });
    const auto tb = detail::cell_set_topology(box);
    EXPECT_EQ(tb.components, 1);
    EXPECT_EQ(tb.euler, 1);
    const auto tr = detail::cell_set_topology(ring);
    EXPECT_EQ(tr.components, 1);
    EXPECT_EQ(tr.euler, 0);
    const auto ts = detail::cell_set_topology(split);
    EXPECT_EQ(ts.components, 2);
    EXPECT_EQ(ts.euler, 2);
    // diagonal neighbours only: not face-connected, but one vertex-connected piece
    const auto td = detail::cell_set_topology({MultiIndex{0, 0}, MultiIndex{1, 1}});
    EXPECT_EQ(td.components, 2);
    EXPECT_EQ(td.euler, 1);
}

TEST(ConnectedSupport, RingIsRefined) {
    DomainHierarchy h = quad2d();
    h.cover(0, MultiIndex{2, 2});
    const auto v = detail::overlap_violators(h, 0);
    EXPECT_NE(std::find(v.begin(), v.end(), MultiIndex{3, 3}), v.end());
    const DomainHierarchy r = connected_support(h);
    for_each_in_box({MultiIndex{1, 1}, MultiIndex{3, 3}}, [&](const MultiIndex& k) { EXPECT_TRUE(r.covered(0, k)); });
    EXPECT_TRUE(check_connected_overlaps(r).ok());
}

TEST(ConnectedSupport, SplitIsRefined) {
    DomainHierarchy h = quad2d();
    for (int i = 1; i <= 3; ++i) h.cover(0, MultiIndex{i, 2});
    const auto v = detail::overlap_violators(h, 0);
    EXPECT_NE(std::find(v.begin(), v.end(), MultiIndex{3, 3}), v.end());
    const DomainHierarchy r = connected_support(h);
    for_each_in_box({MultiIndex{1, 1}, MultiIndex{3, 3}}, [&](const MultiIndex& k) { EXPECT_TRUE(r.covered(0, k)); });
    EXPECT_TRUE(check_connected_overlaps(r).ok());
}

TEST(ConnectedSupport, SimpleOverlapsUntouched) {
    DomainHierarchy h = quad2d();
    EXPECT_TRUE(detail::overlap_violators(h, 0).empty());
    EXPECT_TRUE(connected_support(h) == h);
    // an L-shaped overlap is fine for the spline whose corner is refined
    h.cover(0, MultiIndex{3, 3});
    const auto v = detail::overlap_violators(h, 0);
    EXPECT_EQ(std::find(v.begin(), v.end(), MultiIndex{3, 3}), v.end());
    EXPECT_NE(std::find(v.begin(), v.end(), MultiIndex{4, 4}), v.end());
}

TEST(AlignCubicBlocks, Cases) {
    const DomainHierarchy c33(uniform_tensor_basis({3, 3}, {8, 8}), 1);
    const IndexBox a = align_cubic_blocks(c33, 0, {MultiIndex{3, 5}, MultiIndex{3, 5}});
    EXPECT_EQ(a.lo, (MultiIndex{2, 4}));
    EXPECT_EQ(a.hi, (MultiIndex{3, 5}));
    const DomainHierarchy c32(uniform_tensor_basis({3, 2}, {8, 8}), 1);
    const IndexBox b = align_cubic_blocks(c32, 0, {MultiIndex{3, 3}, MultiIndex{3, 3}});
    EXPECT_EQ(b.lo, (MultiIndex{2, 3}));
    EXPECT_EQ(b.hi, (MultiIndex{3, 3}));
    const IndexBox al{MultiIndex{2, 4}, MultiIndex{5, 7}};
    const IndexBox c = align_cubic_blocks(c33, 0, al);
    EXPECT_EQ(c.lo, al.lo);
    EXPECT_EQ(c.hi, al.hi);
}

TEST(ConformMesh, EmptyMarksAndIdempotence) {
    const DomainHierarchy h = oracle::f1();
    EXPECT_TRUE(conform_mesh(h, {}) == h);
    const DomainHierarchy once = conform_mesh(quad2d(8), MarkSet{{{0, MultiIndex{3, 3}}, {0, MultiIndex{6, 1}}}});
    EXPECT_TRUE(conform_mesh(once, {}) == once);
}

TEST(ConformMesh, OneDimensionalMarksGiveValidMesh) {
    const DomainHierarchy h(uniform_tensor_basis(MultiIndex{2}, MultiIndex{8}), 1);
    const DomainHierarchy r = conform_mesh(h, MarkSet{{{0, MultiIndex{5}}, {0, MultiIndex{6}}}});
    EXPECT_EQ(r.num_levels(), 2);
    EXPECT_TRUE(all_ok(validate_mesh(build_checked_thb_basis(r))));
}

TEST(ConformMesh, GrowsAndValidatesOnRandomMarks) {
    for (int p : {2, 3}) {
        for (unsigned seed = 0; seed < 4; ++seed) {
            std::mt19937 rng(seed * 17 + static_cast<unsigned>(p));
            DomainHierarchy h(uniform_tensor_basis({p, p}, {8, 8}), 1);
            for (int round = 0; round < 3; ++round) {
                const auto cells = all_active_elements(h);
                std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
                MarkSet m;
                for (int i = 0; i < 4; ++i) m.cells.push_back(cells[pick(rng)]);
                const DomainHierarchy next = conform_mesh(h, m);
                EXPECT_TRUE(includes(next, h));
                for (const auto& c : m.cells) EXPECT_TRUE(next.covered(c.level, c.index));
                const auto reports = validate_mesh(build_checked_thb_basis(next));
                for (const auto& r : reports) EXPECT_TRUE(r.ok()) << r.name << " p=" << p << " seed=" << seed;
                h = next;
            }
        }
    }
}

TEST(ElemError, ZeroInSpaceAndOrder) {
    const ThbBasis basis = build_thb_basis(oracle::corner_fixture(2, 4));
    const Target f = [](const Point& x) { return x[0] * x[0] - 3.0 * x[0] * x[1] + 0.5; };
    const GlobalProjection g = project(f, basis);
    const auto e = elem_error(f, basis, g.coeffs);
    EXPECT_EQ(e.size(), all_active_elements(basis.hierarchy()).size());
    for (double v : e) EXPECT_LE(v, 1e-10);

    // error on one element from a coefficient perturbation that only lives there
    Eigen::VectorXd c = g.coeffs;
    const int j = basis.find(0, MultiIndex{0, 0});
    c[j] += 1.0;
    const auto e2 = elem_error(f, basis, c);
    const auto cells = all_active_elements(basis.hierarchy());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].level == 0 && cells[i].index == MultiIndex{0, 0}) EXPECT_GT(e2[i], 0.5);
        else EXPECT_LE(e2[i], 1e-10);
    }
}

TEST(ElemError, MonotoneUnderUniformRefinement) {
    const TargetFunction f = sinsin_target(2);
    for (int p : {1, 2, 3}) {
        double prev = 1e300;
        for (int n : {4, 8, 16}) {
            const ThbBasis basis = build_thb_basis(DomainHierarchy(uniform_tensor_basis({p, p}, {n, n}), 1));
            const auto e = elem_error(f.value, basis, project(f.value, basis).coeffs);
            const double m = *std::max_element(e.begin(), e.end());
            EXPECT_LE(m, prev);
            prev = m;
        }
    }
}

TEST(Adapt, SpaceMemberTerminatesImmediately) {
    const DomainHierarchy h = quad2d(4);
    AdaptOptions o;
    const AdaptResult r = adapt([](const Point& x) { return x[0] * x[1] * x[1]; }, h, o);
    ASSERT_EQ(r.report.iterations.size(), 1u);
    EXPECT_TRUE(r.report.converged);
    EXPECT_TRUE(r.mesh == h);
    EXPECT_EQ(r.report.iterations[0].marked, 0);
}

TEST(Adapt, InvalidParameters) {
    const Target f = [](const Point& x) { return x[0]; };
    AdaptOptions o;
    o.theta = 1.5;
    EXPECT_THROW(adapt(f, quad2d(4), o), InvalidInput);
    o = {};
    o.tolerance = 0.0;
    EXPECT_THROW(adapt(f, quad2d(4), o), InvalidInput);
}

TEST(Adapt, SmallRunStaysValidAndRespectsCap) {
    const TargetFunction f = make_target("tanh-ring", 2);
    AdaptOptions o;
    o.tolerance = 1e-2;
    o.max_levels = 3;
    o.projector.quadrature = 6;
    const AdaptResult r = adapt(f.value, quad2d(8), o);
    ASSERT_GE(r.report.iterations.size(), 2u);
    for (const auto& it : r.report.iterations) {
        EXPECT_TRUE(it.valid);
        EXPECT_LE(it.levels, 3);
    }
    EXPECT_LT(r.report.iterations.back().max_error, r.report.iterations.front().max_error);
}
