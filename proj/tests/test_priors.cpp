#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace nlsel;

namespace {

// integral of a density over R split at 0 and +-1, each piece adaptively
template <class F> double integrateLine(F f, double lim = std::numeric_limits<double>::infinity()) {
    using boost::math::quadrature::gauss_kronrod;
    double total = 0;
    const double pts[] = {-lim, -1.0, 0.0, 1.0, lim};
    for (int i = 0; i < 4; ++i) total += gauss_kronrod<double, 61>::integrate(f, pts[i], pts[i + 1], 15, 1e-13);
    return total;
}

VectorXd vec1(double b) { return VectorXd::Constant(1, b); }

} // namespace

TEST(Pemom, ZeroCoordinateIsNegInf) {
    VectorXd b(3);
    b << 0.4, 0.0, -1.0;
    EXPECT_EQ(pemomLogDensity(b, 1.0, 1.0), kNegInf);
    EXPECT_THROW(pemomLogDensity(b, 0.0, 1.0), DomainError);
    EXPECT_THROW(pemomLogDensity(b, 1.0, -1.0), DomainError);
}

TEST(Pemom, NormalizerMatchesQuadrature) {
    // mpmath reference: integral over |t| <= 40 of exp(-t^2/2 - 1/t^2) = 0.609403280568757515...
    EXPECT_NEAR(std::exp(pemomLogNormalizer(1.0, 1.0)), 0.60940328056875751, 1e-14);
    const double q = integrateLine([](double t) { return t == 0 ? 0.0 : std::exp(-t * t / 2 - 1 / (t * t)); }, 40.0);
    EXPECT_NEAR(pemomLogNormalizer(1.0, 1.0), std::log(q), 1e-6);
}

TEST(Pemom, DensityIntegratesToOne) {
    const double q = integrateLine([](double b) { return b == 0 ? 0.0 : std::exp(pemomLogDensity(vec1(b), 2.0, 3.0)); });
    EXPECT_NEAR(q, 1.0, 1e-6);
}

TEST(Pimom, Examples) {
    EXPECT_NEAR(pimomLogNormalizer(1.0, 1), std::log(std::sqrt(std::numbers::pi)), 1e-14);
    VectorXd b(2);
    b << 0.0, 2.0;
    EXPECT_EQ(pimomLogDensity(b, 1.0, 1.0, 1), kNegInf);
    EXPECT_THROW(pimomLogDensity(b, 1.0, 1.0, 0), DomainError);
    EXPECT_THROW(pimomLogDensity(b, 1.0, 0.0, 1), DomainError);
    const double q = integrateLine([](double x) { return x == 0 ? 0.0 : std::exp(pimomLogDensity(vec1(x), 1.0, 2.0, 1)); });
    EXPECT_NEAR(q, 1.0, 1e-6);
}

TEST(PriorsProperty, SymmetryAndAdditivity) {
    Rng rng(2);
    std::normal_distribution<double> z;
    for (int t = 0; t < 50; ++t) {
        VectorXd b(4);
        for (auto &v : b) v = z(rng);
        const double s2 = 0.2 + 3 * uniform01(rng), tau = 0.1 + 5 * uniform01(rng);
        const int r = 1 + static_cast<int>(rng() % 3);
        VectorXd flipped = b;
        flipped[rng() % 4] *= -1;
        flipped[rng() % 4] *= -1;
        EXPECT_DOUBLE_EQ(pemomLogDensity(b, s2, tau), pemomLogDensity(flipped, s2, tau));
        EXPECT_DOUBLE_EQ(pimomLogDensity(b, s2, tau, r), pimomLogDensity(flipped, s2, tau, r));
        double pe = 0, pi = 0;
        for (int j = 0; j < 4; ++j) pe += pemomLogDensity(vec1(b[j]), s2, tau), pi += pimomLogDensity(vec1(b[j]), s2, tau, r);
        EXPECT_NEAR(pe, pemomLogDensity(b, s2, tau), 1e-10);
        EXPECT_NEAR(pi, pimomLogDensity(b, s2, tau, r), 1e-10);
    }
}

TEST(PriorsProperty, QuadratureNormalization) {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        const double s2 = 0.1 + 4 * uniform01(rng), tau = 0.05 + 6 * uniform01(rng);
        const int r = 1 + static_cast<int>(rng() % 4);
        const double qe = integrateLine([&](double b) { return b == 0 ? 0.0 : std::exp(pemomLogDensity(vec1(b), s2, tau)); });
        const double qi = integrateLine([&](double b) { return b == 0 ? 0.0 : std::exp(pimomLogDensity(vec1(b), s2, tau, r)); });
        EXPECT_NEAR(qe, 1.0, 1e-5) << "s2=" << s2 << " tau=" << tau;
        EXPECT_NEAR(qi, 1.0, 1e-5) << "tau=" << tau << " r=" << r;
    }
}

TEST(GPrior, LocalDensity) {
    const Dataset d = testutil::synth(40, 3, 6);
    const Model k{0, 2};
    const double at0 = gpriorLogDensity(VectorXd::Zero(2), 1.3, 5.0, d, k);
    EXPECT_TRUE(std::isfinite(at0));
    Rng rng(1);
    std::normal_distribution<double> z;
    for (int t = 0; t < 20; ++t) EXPECT_LT(gpriorLogDensity(Eigen::Vector2d(z(rng), z(rng)), 1.3, 5.0, d, k), at0);
    // one standardized column, g = n: beta ~ N(0, sigma2)
    const double s2 = 2.0;
    const double v = gpriorLogDensity(vec1(0.7), s2, d.n(), d, Model{1});
    EXPECT_NEAR(v, -0.5 * std::log(2 * std::numbers::pi * s2) - 0.49 / (2 * s2), 1e-10);
}

TEST(ModelPrior, Examples) {
    ModelPrior u{ModelPriorKind::UniformRestricted, 5, 10};
    EXPECT_EQ(logModelPrior(u, 2) - logModelPrior(u, 5), 0.0);
    EXPECT_EQ(logModelPrior(u, 6), kNegInf);
    ModelPrior bb{ModelPriorKind::BetaBinomial, 3, 3};
    EXPECT_NEAR(logModelPrior(bb, 0), std::log(0.25), 1e-14);
    EXPECT_NEAR(logModelPrior(bb, 1), std::log(1.0 / 12), 1e-14);
    bb.qn = 2;
    EXPECT_EQ(logModelPrior(bb, 3), kNegInf);
}

TEST(ModelPriorProperty, BetaBinomialDecreasesToMidpoint) {
    for (int p = 4; p <= 100; ++p) {
        ModelPrior bb{ModelPriorKind::BetaBinomial, p, p};
        for (int k = 1; k <= p / 2; ++k) EXPECT_LT(logModelPrior(bb, k), logModelPrior(bb, k - 1)) << "p=" << p << " k=" << k;
    }
}
