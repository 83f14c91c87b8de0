#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace nlsel;
using testutil::randomModel;

namespace {

Dataset raw(VectorXd y, MatrixXd X) { return Dataset(std::move(y), std::move(X)); }

} // namespace

TEST(Model, CanonicalForm) {
    const Model a(std::vector<int>{3, 1, 2, 1});
    EXPECT_EQ(a.vec(), (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(a, (Model{1, 2, 3}));
    EXPECT_EQ(ModelHash{}(a), ModelHash{}(Model{3, 2, 1}));
    EXPECT_LT((Model{0, 5}), (Model{1}));
    EXPECT_EQ(a.with(0), (Model{0, 1, 2, 3}));
    EXPECT_EQ(a.without(2), (Model{1, 3}));
    EXPECT_EQ(a.swapped(1, 7), (Model{2, 3, 7}));
    EXPECT_EQ(a.str(), "{1,2,3}");
}

TEST(Standardize, ConstantColumnThrows) {
    MatrixXd X(4, 2);
    X << 1, 1, 2, 1, 3, 1, 4, 1;
    try {
        standardize(raw(VectorXd::LinSpaced(4, 0, 3), X));
        FAIL() << "expected ConstantColumn";
    } catch (const ConstantColumn &e) {
        EXPECT_EQ(e.column(), 1);
    }
}

TEST(Standardize, NonFiniteThrows) {
    MatrixXd X(3, 1);
    X << 1, std::nan(""), 2;
    EXPECT_THROW(standardize(raw(VectorXd::Ones(3), X)), NonFinite);
}

TEST(Standardize, HandExamples) {
    MatrixXd X(2, 2);
    X << -1, 0, 1, 2;
    const Dataset d = standardize(raw(VectorXd::Zero(2), X));
    EXPECT_NEAR(d.X(0, 0), -1.0, 1e-15);
    EXPECT_NEAR(d.X(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(d.X(0, 1), -1.0, 1e-15);
    EXPECT_NEAR(d.X(1, 1), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(d.columnMeans[1], 1.0);
    EXPECT_DOUBLE_EQ(d.columnScales[1], 1.0);
}

TEST(StandardizeProperty, ColumnConventionAndIdempotence) {
    Rng rng(11);
    std::normal_distribution<double> z;
    MatrixXd X(37, 9);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = 3.0 + 5.0 * z(rng);
    VectorXd y(37);
    for (auto &v : y) v = 10 + z(rng);
    const Dataset a = standardize(raw(y, X));
    for (int j = 0; j < a.p(); ++j) {
        EXPECT_LE(std::abs(a.X.col(j).mean()), 1e-10);
        EXPECT_LE(std::abs(a.X.col(j).squaredNorm() - a.n()), 1e-8 * a.n());
    }
    EXPECT_LE(std::abs(a.y.mean()), 1e-12);
    const Dataset b = standardize(a);
    EXPECT_LE((a.X - b.X).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((a.y - b.y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OlsFit, EmptyModel) {
    MatrixXd X(4, 1);
    X << 1, 2, 3, 5;
    VectorXd y(4);
    y << 1, 1, 2, 2; // ||y||^2 = 10
    const Fit f = olsFit(raw(y, X), Model{});
    EXPECT_EQ(f.beta.size(), 0);
    EXPECT_DOUBLE_EQ(f.rss, 10.0);
}

TEST(OlsFit, ExactInterpolation) {
    MatrixXd X(5, 2);
    X << 1, 0, 0, 1, 1, 1, 2, -1, 3, 4;
    const VectorXd y = X * Eigen::Vector2d(2.0, -0.5);
    const Fit f = olsFit(raw(y, X), Model{0, 1});
    EXPECT_LE(f.rss, 1e-20 * y.squaredNorm() + 1e-24);
    EXPECT_NEAR(f.beta[0], 2.0, 1e-12);
    EXPECT_NEAR(f.beta[1], -0.5, 1e-12);
}

TEST(OlsFit, ThreeByOneToy) {
    MatrixXd X(3, 1);
    X << 1, 0, -1;
    X *= std::sqrt(1.5);
    VectorXd y(3);
    y << 1, 2, 3;
    const Fit f = olsFit(raw(y, X), Model{0});
    const double xty = X.col(0).dot(y), xx = X.col(0).squaredNorm();
    EXPECT_NEAR(f.beta[0], xty / xx, 1e-14);
    EXPECT_NEAR(f.rss, y.squaredNorm() - xty * xty / xx, 1e-12);
    // generic solver
    const VectorXd b = X.colPivHouseholderQr().solve(y);
    EXPECT_NEAR(f.beta[0], b[0], 1e-14);
    EXPECT_NEAR(f.residual.squaredNorm(), f.rss, 1e-12);
}

TEST(OlsFit, SingularGramThrows) {
    MatrixXd X(4, 2);
    X << 1, 2, 2, 4, 3, 6, 4, 8;
    EXPECT_THROW(olsFit(raw(VectorXd::Ones(4), X), Model{0, 1}), SingularGram);
}

TEST(RidgeFit, Examples) {
    const Dataset d = testutil::synth(30, 6, 4);
    const Model k{0, 2, 3};
    EXPECT_LE(std::abs(ridgeFit(d, k, 1e12).rss - olsFit(d, k).rss), 1e-6 * olsFit(d, k).rss);
    EXPECT_DOUBLE_EQ(ridgeFit(d, Model{}, 2.0).rss, d.y.squaredNorm());
    const Fit r1 = ridgeFit(d, Model{1}, 1.0);
    const double xty = d.X.col(1).dot(d.y), xx = d.X.col(1).squaredNorm();
    EXPECT_NEAR(r1.beta[0], xty / (xx + 1.0), 1e-12);
    // stored quadratic form = ||r||^2 + ||b||^2 / tau
    const Fit r = ridgeFit(d, k, 0.7);
    EXPECT_NEAR(r.rss, r.residual.squaredNorm() + r.beta.squaredNorm() / 0.7, 1e-9 * r.rss);
    EXPECT_THROW(ridgeFit(d, k, 0.0), DomainError);
}

TEST(GramSpectrum, Examples) {
    MatrixXd X(4, 2);
    X << 1, 1, -1, 1, 1, -1, -1, -1;
    const Dataset orth = standardize(raw(VectorXd::LinSpaced(4, 0, 1), X));
    const GramSpectrum s = gramSpectrum(orth, Model{0, 1});
    EXPECT_NEAR(s.nuMin, 1.0, 1e-12);
    EXPECT_NEAR(s.nuMax, 1.0, 1e-12);

    const Dataset d = testutil::synth(50, 3, 9);
    const double rho = d.X.col(0).dot(d.X.col(1)) / d.n();
    const GramSpectrum c = gramSpectrum(d, Model{0, 1});
    EXPECT_NEAR(c.nuMin, 1.0 - std::abs(rho), 1e-12);
    EXPECT_NEAR(c.nuMax, 1.0 + std::abs(rho), 1e-12);
    EXPECT_EQ(c.uK, c.nuMin);

    const GramSpectrum one = gramSpectrum(d, Model{2});
    EXPECT_NEAR(one.nuMin, 1.0, 1e-12);
    EXPECT_NEAR(one.nuMax, 1.0, 1e-12);
    EXPECT_THROW(gramSpectrum(d, Model{}), SingularGram);
}

TEST(Neighborhood, Examples) {
    const Neighborhood e = neighborhood(Model{}, 3, 3);
    EXPECT_EQ(e.plus, (std::vector<Model>{Model{0}, Model{1}, Model{2}}));
    EXPECT_TRUE(e.minus.empty());
    EXPECT_TRUE(e.swap.empty());
    const Neighborhood o = neighborhood(Model{0}, 3, 3);
    EXPECT_EQ(o.plus.size(), 2u);
    EXPECT_EQ(o.minus.size(), 1u);
    EXPECT_EQ(o.swap.size(), 2u);
    EXPECT_TRUE(neighborhood(Model{0, 1}, 5, 2).plus.empty());
}

TEST(NeighborhoodProperty, ClosedFormCardinalities) {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const int p = 1 + static_cast<int>(rng() % 30);
        const int qn = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(p));
        const Model k = randomModel(rng, p, qn);
        const int s = static_cast<int>(k.size());
        const Neighborhood nb = neighborhood(k, p, qn);
        EXPECT_EQ(static_cast<int>(nb.plus.size()), s == qn ? 0 : p - s);
        EXPECT_EQ(static_cast<int>(nb.minus.size()), s);
        EXPECT_EQ(static_cast<int>(nb.swap.size()), s * (p - s));
        for (const auto &m : nb.plus) EXPECT_EQ(static_cast<int>(m.size()), s + 1);
        for (const auto &m : nb.swap) EXPECT_EQ(static_cast<int>(m.size()), s);
    }
}

TEST(FitProperty, NestedRssMonotoneAndRidgeBracketing) {
    const Dataset d = testutil::synth(60, 25, 21);
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        Model k = randomModel(rng, d.p(), 8);
        Model bigger = k;
        for (int add = 0; add < 3; ++add) bigger = bigger.with(static_cast<int>(rng() % 25));
        const double rk = olsFit(d, k).rss, rb = olsFit(d, bigger).rss;
        EXPECT_LE(rb, rk * (1 + 1e-12) + 1e-12);
        for (double tau : {1e-3, 0.5, 4.0, 1e6}) EXPECT_GE(ridgeFit(d, k, tau).rss, rk * (1 - 1e-12) - 1e-12);
    }
}

TEST(FitProperty, OlsMatchesGenericSolver) {
    Rng rng(3);
    std::normal_distribution<double> z;
    for (int t = 0; t < 50; ++t) {
        MatrixXd X(40, 15);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
        VectorXd y(40);
        for (auto &v : y) v = z(rng);
        const Dataset d = raw(y, X);
        const Model k = randomModel(rng, 15, 10);
        if (k.empty()) continue;
        const Fit f = olsFit(d, k);
        const MatrixXd Xk = X(Eigen::all, k.vec());
        const VectorXd b = Xk.colPivHouseholderQr().solve(y);
        EXPECT_LE((f.beta - b).norm(), 1e-8 * std::max(1.0, b.norm()));
        EXPECT_LE(std::abs(f.rss - (y - Xk * b).squaredNorm()), 1e-8 * std::max(1.0, f.rss));
        EXPECT_NEAR(f.rss, f.residual.squaredNorm(), 1e-8 * std::max(1.0, f.rss));
    }
}
