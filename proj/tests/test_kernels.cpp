#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "gplc/kernels.hpp"
#include "gplc/kernels_json.hpp"
#include "gplc/random.hpp"

using namespace gplc;

namespace {

std::vector<KernelSpec> all_families() {
    std::vector<KernelSpec> out;
    out.push_back(KernelSpec::matern(0.5, {0.3}));
    out.push_back(KernelSpec::matern(1.31, {0.4}, 2.0));
    out.push_back(KernelSpec::matern(2.5, {0.2}));
    out.push_back(KernelSpec::matern_tensor(1.31, {0.67, 0.45}, 0.24));
    out.push_back(KernelSpec::matern_tensor(2.5, {0.2, 0.2}));
    out.push_back(KernelSpec::gaussian({0.2}));
    out.push_back(KernelSpec::gaussian({0.3, 0.5}, 1.5));
    out.push_back(KernelSpec::exponential({0.3, 0.2}));
    out.push_back(KernelSpec::triangular(0.4));
    out.push_back(KernelSpec::fbm(0.5));
    out.push_back(KernelSpec::fbm(0.9));
    out.push_back(KernelSpec::fbm(0.2));
    out.push_back(KernelSpec::brownian());
    out.push_back(KernelSpec::finite_rank({{1.0, BasisKind::cosine, {0}}, {0.5, BasisKind::cosine, {2}}}));
    out.push_back(KernelSpec::finite_rank({{1.0, BasisKind::legendre, {1, 0}}, {0.3, BasisKind::legendre, {2, 3}}}));
    return out;
}

Eigen::VectorXd random_point(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd x(d);
    for (int k = 0; k < d; ++k) {
        x[k] = u(rng);
    }
    return x;
}

Eigen::VectorXd pt(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) {
        x[i++] = c;
    }
    return x;
}

} // namespace

TEST(Kernel, MaternHalfEvaluatesExponential) {
    EXPECT_NEAR(eval_kernel(KernelSpec::matern(0.5, {1.0}), pt({0.0}), pt({1.0})), std::exp(-1.0), 1e-15);
}

TEST(Kernel, BrownianFbmIsTwiceMin) {
    EXPECT_NEAR(eval_kernel(KernelSpec::fbm(0.5), pt({0.3}), pt({0.7})), 0.6, 1e-15);
    EXPECT_NEAR(eval_kernel(KernelSpec::brownian(), pt({0.3}), pt({0.7})), 0.3, 1e-15);
}

TEST(Kernel, StationaryDiagonalIsVariance) {
    EXPECT_EQ(eval_kernel(KernelSpec::matern(2.5, {0.2}, 1.7), pt({0.42}), pt({0.42})), 1.7);
    EXPECT_EQ(eval_kernel(KernelSpec::matern(1.31, {0.2}, 0.24), pt({0.1}), pt({0.1})), 0.24);
    EXPECT_EQ(eval_kernel(KernelSpec::gaussian({0.2, 0.1}), pt({0.1, 0.9}), pt({0.1, 0.9})), 1.0);
}

TEST(Kernel, TensorMaternIsProductOfFactors) {
    const KernelSpec t = KernelSpec::matern_tensor(1.31, {0.67, 0.45}, 0.24);
    const double f1 = eval_kernel(KernelSpec::matern(1.31, {0.67}), pt({0.1}), pt({0.5}));
    const double f2 = eval_kernel(KernelSpec::matern(1.31, {0.45}), pt({0.8}), pt({0.3}));
    EXPECT_NEAR(eval_kernel(t, pt({0.1, 0.8}), pt({0.5, 0.3})), 0.24 * f1 * f2, 1e-15);
}

TEST(KernelProperty, SymmetricForEveryFamily) {
    auto rng = make_stream(11, 0);
    for (const auto& spec : all_families()) {
        const Kernel k(spec);
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::VectorXd x = random_point(k.dimension(), rng);
            const Eigen::VectorXd y = random_point(k.dimension(), rng);
            const double kxy = k(x, y);
            EXPECT_LE(std::abs(kxy - k(y, x)), 1e-14 * std::abs(kxy)) << to_string(spec.family);
        }
    }
}

TEST(KernelProperty, CauchySchwarz) {
    auto rng = make_stream(12, 0);
    for (const auto& spec : all_families()) {
        const Kernel k(spec);
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::VectorXd x = random_point(k.dimension(), rng);
            const Eigen::VectorXd y = random_point(k.dimension(), rng);
            const double kxy = k(x, y);
            EXPECT_LE(kxy * kxy, k(x, x) * k(y, y) * (1.0 + 1e-12)) << to_string(spec.family);
        }
    }
}

TEST(KernelProperty, HalfIntegerMaternMatchesBesselForm) {
    for (double nu : {0.5, 1.5, 2.5}) {
        const double norm = detail::matern_norm(nu);
        for (double a = 0.01; a < 6.0; a *= 1.3) {
            const double closed = matern_correlation(nu, a);
            const double bessel = detail::matern_correlation_bessel(nu, std::sqrt(2.0 * nu) * a, norm);
            EXPECT_LE(std::abs(closed - bessel), 1e-10 * closed) << "nu=" << nu << " a=" << a;
        }
    }
}

TEST(KernelProperty, GeneralMaternIsContinuousInNu) {
    // Orders just off a half-integer take the Bessel path and must land next to the closed form.
    for (double a : {0.05, 0.5, 2.0}) {
        EXPECT_NEAR(matern_correlation(1.5 + 1e-9, a), matern_correlation(1.5, a), 1e-7);
        EXPECT_NEAR(matern_correlation(2.5 - 1e-9, a), matern_correlation(2.5, a), 1e-7);
    }
}

TEST(KernelProperty, DiagonalBoundedOnUnitCube) {
    for (const auto& spec : all_families()) {
        const Kernel k(spec);
        const int d = k.dimension();
        double sup = 0.0;
        const int per = d == 1 ? 2001 : 61;
        Eigen::VectorXd x(d);
        const long total = d == 1 ? per : static_cast<long>(per) * per;
        for (long idx = 0; idx < total; ++idx) {
            x[0] = static_cast<double>(idx % per) / (per - 1);
            if (d == 2) {
                x[1] = static_cast<double>(idx / per) / (per - 1);
            }
            sup = std::max(sup, k(x, x));
        }
        EXPECT_TRUE(std::isfinite(sup)) << to_string(spec.family);
        EXPECT_LT(sup, 100.0) << to_string(spec.family);
    }
}

TEST(Kernel, RejectsDimensionMismatchAndNonFinite) {
    const Kernel k(KernelSpec::matern_tensor(2.5, {0.2, 0.2}));
    EXPECT_THROW(k(pt({0.1}), pt({0.2})), DimensionError);
    EXPECT_THROW(k(pt({0.1, std::nan("")}), pt({0.2, 0.3})), DomainError);
    EXPECT_THROW(k(pt({0.1, INFINITY}), pt({0.2, 0.3})), DomainError);
}

TEST(Kernel, RejectsInvalidHyperparameters) {
    EXPECT_THROW(Kernel(KernelSpec::matern(2.5, {-0.1})), InvalidInput);
    EXPECT_THROW(Kernel(KernelSpec::matern(0.0, {0.1})), InvalidInput);
    EXPECT_THROW(Kernel(KernelSpec::gaussian({0.2}, 0.0)), InvalidInput);
    EXPECT_THROW(Kernel(KernelSpec::fbm(1.0)), InvalidInput);
    EXPECT_THROW(Kernel(KernelSpec::finite_rank({})), InvalidInput);
}

TEST(GramMatrix, SinglePoint) {
    Points p(1, 1);
    p << 0.37;
    const KernelSpec spec = KernelSpec::fbm(0.9);
    const Eigen::MatrixXd g = gram_matrix(spec, p);
    ASSERT_EQ(g.rows(), 1);
    EXPECT_EQ(g(0, 0), eval_kernel(spec, pt({0.37}), pt({0.37})));
}

TEST(GramMatrix, DuplicatePointsAreSingular) {
    Points p(2, 1);
    p << 0.3, 0.3;
    const Eigen::MatrixXd g = gram_matrix(KernelSpec::matern(2.5, {0.2}), p);
    EXPECT_NEAR(g.determinant(), 0.0, 1e-12);
}

TEST(GramMatrix, PositiveSemidefiniteOnRandomPoints) {
    auto rng = make_stream(5, 1);
    const Points p = Measure::unit_cube(1).sample(10, rng);
    const Eigen::MatrixXd g = gram_matrix(KernelSpec::matern(2.5, {0.2}), p);
    EXPECT_EQ((g - g.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(GramMatrix, PositiveSemidefiniteForEveryFamily) {
    auto rng = make_stream(6, 1);
    for (const auto& spec : all_families()) {
        const Kernel k(spec);
        const Points p = Measure::unit_cube(k.dimension()).sample(40, rng);
        const Eigen::MatrixXd g = gram_matrix(k, p);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * g.trace() / 40.0) << to_string(spec.family);
    }
}

TEST(GramMatrix, RejectsEmptyPointSet) {
    const Points p(0, 1);
    EXPECT_THROW(gram_matrix(KernelSpec::matern(2.5, {0.2}), p), InvalidInput);
}

TEST(KernelJson, RoundTrip) {
    for (const auto& spec : all_families()) {
        const KernelSpec back = kernel_from_json(kernel_to_json(spec));
        EXPECT_EQ(back.family, spec.family);
        EXPECT_EQ(back.nu, spec.nu);
        EXPECT_EQ(back.lengthscales, spec.lengthscales);
        EXPECT_EQ(back.variance, spec.variance);
        EXPECT_EQ(back.hurst, spec.hurst);
        EXPECT_EQ(back.rank_terms.size(), spec.rank_terms.size());
    }
}

TEST(KernelJson, RejectsUnknownFields) {
    const auto j = nlohmann::json::parse(R"({"family": "matern1d", "nu": 2.5, "lengthscales": [0.2], "scale": 1})");
    EXPECT_THROW(kernel_from_json(j), InvalidInput);
    EXPECT_THROW(kernel_from_json(nlohmann::json::parse(R"({"nu": 2.5})")), InvalidInput);
    EXPECT_THROW(kernel_from_json(nlohmann::json::parse(R"({"family": "spline"})")), InvalidInput);
}
