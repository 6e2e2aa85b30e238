#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "thb/element_ops.hpp"
#include "thb/tensor_basis.hpp"

using namespace thb;

TEST(ElementList, CountsAndOrder) {
    const auto a = element_list(uniform_tensor_basis({1, 1}, {2, 2}));
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0], (MultiIndex{0, 0}));
    EXPECT_EQ(a[1], (MultiIndex{1, 0}));
    EXPECT_EQ(a[2], (MultiIndex{0, 1}));
    EXPECT_EQ(a[3], (MultiIndex{1, 1}));
    const auto b = element_list(uniform_tensor_basis(MultiIndex{2}, MultiIndex{8}));
    ASSERT_EQ(b.size(), 8u);
    for (int i = 0; i < 8; ++i) EXPECT_EQ(b[static_cast<std::size_t>(i)][0], i);
    EXPECT_EQ(element_list(uniform_tensor_basis({2, 1}, {3, 2})).size(), 6u);
}

TEST(LinearIndex, DirectionZeroFastest) {
    const TensorBasis tb = uniform_tensor_basis({2, 2}, {3, 4});
    EXPECT_EQ(tb.element_linear(MultiIndex{1, 0}), 1);
    EXPECT_EQ(tb.element_linear(MultiIndex{0, 1}), 3);
    for (std::int64_t id = 0; id < tb.num_basis(); ++id) EXPECT_EQ(tb.basis_linear(tb.basis_multi(id)), id);
}

TEST(SplinesOnElement, CountAndOpenKnotStart) {
    const TensorBasis tb = uniform_tensor_basis({2, 2}, {4, 5});
    for (const auto& k : element_list(tb)) EXPECT_EQ(splines_on_element(tb, k).size(), 9u);
    const TensorBasis single = uniform_tensor_basis({3, 2}, {1, 1});
    EXPECT_EQ(static_cast<std::int64_t>(splines_on_element(single, MultiIndex{0, 0}).size()), single.num_basis());
    // 1D, p=2, 8 elements: element 0 carries splines 1..3 in one-based numbering
    const TensorBasis one = uniform_tensor_basis(MultiIndex{2}, MultiIndex{8});
    EXPECT_EQ(splines_on_element(one, MultiIndex{0}), (std::vector<std::int64_t>{0, 1, 2}));
}

TEST(ElementsOfSpline, SupportsAndDuality) {
    const TensorBasis one = uniform_tensor_basis(MultiIndex{3}, MultiIndex{9});
    EXPECT_EQ(elements_of_spline(one, MultiIndex{5}).size(), 4u);
    EXPECT_EQ(elements_of_spline(one, MultiIndex{0}), (std::vector<std::int64_t>{0}));
    EXPECT_THROW(elements_of_spline(one, MultiIndex{12}), InvalidInput);

    const TensorBasis tb(std::vector<KnotVector>{open_knot_vector(2, {0.2, 0.3, 0.7}), open_knot_vector(3, {0.4, 0.5})});
    for (const auto& k : element_list(tb)) {
        const auto on = splines_on_element(tb, k);
        for (std::int64_t id = 0; id < tb.num_basis(); ++id) {
            const auto els = elements_of_spline(tb, tb.basis_multi(id));
            const bool a = std::find(on.begin(), on.end(), id) != on.end();
            const bool b = std::find(els.begin(), els.end(), tb.element_linear(k)) != els.end();
            EXPECT_EQ(a, b);
            // the spline is nonzero at the element centre exactly when incident
            const Box box = cell_box(tb, k);
            Point c{};
            for (int i = 0; i < 2; ++i) c[static_cast<std::size_t>(i)] = 0.5 * (box.lo[static_cast<std::size_t>(i)] + box.hi[static_cast<std::size_t>(i)]);
            EXPECT_EQ(a, oracle::tensor_spline(tb, tb.basis_multi(id), c) > 0.0);
        }
    }
}

TEST(EvalTensor, PartitionOfUnityAndSeparability) {
    const TensorBasis tb(std::vector<KnotVector>{open_knot_vector(2, {0.25, 0.6}), open_knot_vector(3, {0.5})});
    for (const auto& x : oracle::random_points(2, 200, 1)) {
        double sum = 0.0;
        for (std::int64_t id = 0; id < tb.num_basis(); ++id) {
            const MultiIndex j = tb.basis_multi(id);
            const double v = eval_tensor(tb, j, std::span<const double>(x.data(), 2));
            sum += v;
            EXPECT_NEAR(v, oracle::spline(tb.direction(0), j[0], x[0]) * oracle::spline(tb.direction(1), j[1], x[1]), 1e-14);
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
    }
}

TEST(EvalTensor, BilinearMixedDerivative) {
    const TensorBasis tb = uniform_tensor_basis({1, 1}, {2, 2});
    const double x[2] = {0.25, 0.25};
    // hat (1,1) rises with slope 2 on the first element in both directions
    EXPECT_NEAR(eval_tensor_deriv(tb, MultiIndex{1, 1}, x, MultiIndex{1, 1}), 4.0, 1e-14);
    EXPECT_NEAR(eval_tensor_deriv(tb, MultiIndex{0, 1}, x, MultiIndex{1, 1}), -4.0, 1e-14);
    const double out[2] = {1.1, 0.5};
    EXPECT_THROW(eval_tensor(tb, MultiIndex{0, 0}, out), DomainError);
}

TEST(TensorSpace, LocalGramFullRankAndPolynomialReproduction) {
    const TensorBasis tb(std::vector<KnotVector>{open_knot_vector(2, {0.3, 0.55}), open_knot_vector(3, {0.2, 0.6, 0.8})});
    for (const auto& k : element_list(tb)) {
        const Box box = cell_box(tb, k);
        std::vector<MultiIndex> js;
        for_each_in_box(tb.splines_box(k), [&](const MultiIndex& j) { js.push_back(j); });
        ASSERT_EQ(js.size(), 12u);
        const int n = static_cast<int>(js.size());
        const int rank = oracle::sampled_rank({box}, n, [&](int c, const Point& x) { return oracle::tensor_spline(tb, js[static_cast<std::size_t>(c)], x); }, 6);
        EXPECT_EQ(rank, n);
        // every monomial x^a y^b with a<=2, b<=3 is reproduced on the element
        std::vector<Point> pts;
        for (const auto& x : oracle::random_points(2, 40, 9)) {
            Point y{};
            for (int i = 0; i < 2; ++i) y[static_cast<std::size_t>(i)] = box.lo[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(i)] * box.width(i);
            pts.push_back(y);
        }
        Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), n);
        for (std::size_t r = 0; r < pts.size(); ++r)
            for (int c = 0; c < n; ++c) a(static_cast<Eigen::Index>(r), c) = oracle::tensor_spline(tb, js[static_cast<std::size_t>(c)], pts[r]);
        for (int ea = 0; ea <= 2; ++ea)
            for (int eb = 0; eb <= 3; ++eb) {
                Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
                for (std::size_t r = 0; r < pts.size(); ++r) rhs[static_cast<Eigen::Index>(r)] = std::pow(pts[r][0], ea) * std::pow(pts[r][1], eb);
                const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
                EXPECT_LE((a * c - rhs).lpNorm<Eigen::Infinity>(), 1e-10);
            }
    }
}

TEST(TensorBernstein, MatchesProductOfBernsteinDerivatives) {
    const Box box{2, {0.2, 0.1, 0}, {0.45, 0.6, 0}};
    const MultiIndex p{3, 2};
    const Point x{0.3, 0.37, 0};
    const double h = 1e-5;
    const Eigen::VectorXd v = tensor_bernstein(p, box, x, MultiIndex{0, 0});
    EXPECT_NEAR(v.sum(), 1.0, 1e-15);
    const Eigen::VectorXd dx = tensor_bernstein(p, box, x, MultiIndex{1, 0});
    Point xp = x, xm = x;
    xp[0] += h;
    xm[0] -= h;
    const Eigen::VectorXd fd = (tensor_bernstein(p, box, xp, MultiIndex{0, 0}) - tensor_bernstein(p, box, xm, MultiIndex{0, 0})) / (2 * h);
    EXPECT_LT((dx - fd).lpNorm<Eigen::Infinity>(), 1e-8);
}
