#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gplc/learning_curve.hpp"

using namespace gplc;

namespace {

// sum_p tau lambda_p / (tau + lambda_p) for the Brownian spectrum at tau = 0.05,
// from a 30-digit summation with an Euler-Maclaurin tail.
constexpr double kBrownianLimit = 0.11177422592127879983;

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double c : v) {
        x[i++] = c;
    }
    return x;
}

std::vector<double> tau_values() {
    std::vector<double> t;
    for (int k = 0; k <= 4; ++k) {
        t.push_back(std::pow(10.0, -3.0 + 0.75 * k));
    }
    return t;
}

} // namespace

TEST(RateLaw, Exponents) {
    const RateLaw f = rate_law(KernelFamily::fbm, {2.5, 0.5, 1});
    EXPECT_DOUBLE_EQ(f.exponent, 0.5);
    EXPECT_EQ(f.log_power, 0);
    const RateLaw m = rate_law(KernelFamily::matern1d, {2.5, 0.5, 1});
    EXPECT_DOUBLE_EQ(m.exponent, 0.8);
    EXPECT_EQ(m.log_power, 0);
    const RateLaw g = rate_law(KernelFamily::gaussian, {2.5, 0.5, 1});
    EXPECT_DOUBLE_EQ(g.exponent, 1.0);
    EXPECT_EQ(g.log_power, 1);
    const RateLaw t = rate_law(KernelFamily::matern_tensor, {1.31, 0.5, 2});
    EXPECT_NEAR(t.exponent, 0.618320610687, 1e-12);
    EXPECT_EQ(t.log_power, 1);
    EXPECT_EQ(rate_law(KernelFamily::gaussian, {2.5, 0.5, 3}).log_power, 3);
    EXPECT_NEAR(rate_law(KernelFamily::fbm, {2.5, 0.9, 1}).exponent, 1.0 - 1.0 / 2.8, 1e-15);
    const RateLaw d = rate_law(KernelFamily::finite_rank, {});
    EXPECT_EQ(d.exponent, 1.0);
    EXPECT_EQ(d.log_power, 0);
    EXPECT_THROW(rate_law(KernelFamily::triangular, {}), InvalidInput);
    EXPECT_THROW(rate_law(KernelFamily::matern1d, {0.5, 0.5, 1}), InvalidInput);
}

TEST(AsymptoticImse, SingleEigenvalue) {
    EXPECT_DOUBLE_EQ(asymptotic_imse(vec({1.0}), 1.0).truncated, 0.5);
}

TEST(AsymptoticImse, TwoTerms) {
    EXPECT_NEAR(asymptotic_imse(vec({2.0, 1.0}), 0.1).truncated, 0.1 * 2.0 / 2.1 + 0.1 / 1.1, 1e-16);
    EXPECT_NEAR(asymptotic_imse(vec({2.0, 1.0}), 0.1).truncated, 0.186147, 1e-6);
}

TEST(AsymptoticImse, TailReportedAsInterval) {
    const ImseLimit l = asymptotic_imse(vec({1.0, 0.1}), 0.2, 0.05);
    EXPECT_DOUBLE_EQ(l.tail_upper, 0.05);
    EXPECT_DOUBLE_EQ(l.estimate, l.truncated + 0.025);
    EXPECT_THROW(asymptotic_imse(vec({1.0}), 0.0), InvalidInput);
}

TEST(AsymptoticImse, BrownianSpectrumBracketsOracle) {
    const Spectrum s = nystrom_spectrum(KernelSpec::brownian(), trapezoid_box({0.0}, {1.0}, 2000), 200);
    const ImseLimit l = asymptotic_imse(s, 0.05);
    EXPECT_LE(l.truncated, kBrownianLimit * (1.0 + 1e-3));
    EXPECT_GE(l.truncated + l.tail_upper, kBrownianLimit * (1.0 - 1e-3));
    // The midpoint also carries the O(1/m) quadrature error of the eigenvalues.
    EXPECT_NEAR(l.estimate, kBrownianLimit, 5e-3 * kBrownianLimit);
}

TEST(AsymptoticMse, RankOneAtUnitTau) {
    const KernelSpec spec = KernelSpec::finite_rank({{1.0, BasisKind::cosine, {0}}});
    const Spectrum s = nystrom_spectrum(spec, trapezoid_box({0.0}, {1.0}, 100), 1);
    for (double x : {0.0, 0.4, 1.0}) {
        EXPECT_NEAR(asymptotic_mse_at(s, spec, 1.0, Eigen::VectorXd::Constant(1, x)).value, 0.5, 1e-12);
    }
}

TEST(AsymptoticMse, MonotoneAndVanishingInTau) {
    const KernelSpec spec = KernelSpec::matern(2.5, {0.2});
    const Spectrum s = nystrom_spectrum(spec, trapezoid_box({0.0}, {1.0}, 500), 50);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
    double prev = 0.0;
    for (double tau = 1e-9; tau < 10.0; tau *= 3.0) {
        const double v = asymptotic_mse_at(s, spec, tau, x).value;
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_LT(asymptotic_mse_at(s, spec, 1e-12, x).value, 1e-10);
}

TEST(AsymptoticMse, BrownianMidpointAgainstDirectSum) {
    // phi_p(1/2)^2 = 1 for every p, so the pointwise limit equals the IMSE limit.
    const KernelSpec spec = KernelSpec::brownian();
    const Spectrum s = nystrom_spectrum(spec, trapezoid_box({0.0}, {1.0}, 2000), 200);
    const PointwiseLimit l = asymptotic_mse_at(s, spec, 0.05, Eigen::VectorXd::Constant(1, 0.5));
    EXPECT_LE(l.value, kBrownianLimit * (1.0 + 1e-3));
    EXPECT_GE(l.value + l.tail_bound, kBrownianLimit * (1.0 - 1e-3));
}

TEST(BTau, Arithmetic) {
    EXPECT_NEAR(b_tau(vec({1.0, 0.5, 0.01}), 0.1).value, 0.21, 1e-15);
    EXPECT_DOUBLE_EQ(b_tau(vec({3.0, 2.0, 1.0, 0.5}), 0.1).value, 0.4);
    const BTau b = b_tau(vec({1.0, 0.5, 0.01}), 0.1);
    EXPECT_DOUBLE_EQ(b.lower, 0.105);
    EXPECT_DOUBLE_EQ(b.upper, 0.21);
}

TEST(BTau, BrownianBracketContainsLimit) {
    const Spectrum s = nystrom_spectrum(KernelSpec::brownian(), trapezoid_box({0.0}, {1.0}, 2000), 200);
    const BTau b = b_tau(s, 0.05);
    EXPECT_LE(b.lower, kBrownianLimit);
    EXPECT_GE(b.upper, kBrownianLimit);
}

TEST(BTauProperty, BracketHoldsExactly) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(1, 200);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = len(rng);
        Eigen::VectorXd lambda(m);
        double v = std::pow(10.0, 2.0 * u(rng) - 1.0);
        for (int p = 0; p < m; ++p) {
            lambda[p] = v;
            v *= 0.3 + 0.7 * u(rng);
        }
        const double residual = u(rng) < 0.5 ? 0.0 : lambda[m - 1] * u(rng);
        for (double tau : tau_values()) {
            const BTau b = b_tau(lambda, tau, residual);
            const ImseLimit l = asymptotic_imse(lambda, tau, residual);
            if (residual == 0.0) {
                EXPECT_LE(b.lower, l.truncated);
            }
            EXPECT_LE(l.truncated + l.tail_upper, b.upper);
            EXPECT_LE(b.lower, l.estimate);
            EXPECT_LE(l.estimate, b.upper);
        }
    }
}

TEST(AsymptoticImseProperty, IncreasingInTauAndBounded) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 5 + trial;
        Eigen::VectorXd lambda(m);
        for (int p = 0; p < m; ++p) {
            lambda[p] = std::pow(p + 1.0, -1.0 - 3.0 * u(rng));
        }
        std::sort(lambda.data(), lambda.data() + m, std::greater<>());
        const double residual = 0.01 * u(rng);
        double prev = -1.0;
        for (double tau = 1e-4; tau <= 10.0; tau *= 1.7) {
            const ImseLimit l = asymptotic_imse(lambda, tau, residual);
            EXPECT_GT(l.truncated, prev);
            prev = l.truncated;
            EXPECT_LE(l.truncated, std::min(tau * m, lambda.sum()));
            EXPECT_LE(l.estimate, std::min(tau * m + residual, lambda.sum() + residual));
        }
    }
}

TEST(EmpiricalCurve, SingleDesignMatchesDirectComputation) {
    const KernelSpec spec = KernelSpec::matern(2.5, {0.2});
    const Measure mu = Measure::unit_cube(1);
    const Quadrature q = trapezoid_box({0.0}, {1.0}, 400);
    LearningCurveConfig cfg;
    cfg.n = 30;
    cfg.tau_grid = {0.02};
    cfg.n_designs = 1;
    cfg.seed = 9;
    const LearningCurve lc = empirical_learning_curve(spec, mu, q, cfg);
    auto rng = make_stream(9, 0);
    const Design design(mu.sample(30, rng), mu);
    const Predictor p = fit_blup(spec, design, ObservationSet::from_means(Eigen::VectorXd::Zero(30), 30 * 0.02));
    EXPECT_NEAR(lc.imse_mean[0], integrated_mse(p, q), 1e-14);
    EXPECT_EQ(lc.imse_stderr[0], 0.0);
}

TEST(EmpiricalCurve, Deterministic) {
    LearningCurveConfig cfg;
    cfg.n = 40;
    cfg.tau_grid = {0.01, 0.05, 0.2};
    cfg.n_designs = 3;
    cfg.seed = 5;
    const Quadrature q = trapezoid_box({0.0}, {1.0}, 300);
    const LearningCurve a = empirical_learning_curve(KernelSpec::fbm(0.7), Measure::unit_cube(1), q, cfg);
    cfg.threads = 2;
    const LearningCurve b = empirical_learning_curve(KernelSpec::fbm(0.7), Measure::unit_cube(1), q, cfg);
    EXPECT_EQ(a.imse_mean, b.imse_mean);
    EXPECT_EQ(a.imse_stderr, b.imse_stderr);
    EXPECT_GT(a.imse_mean[2], a.imse_mean[1]);
    EXPECT_GT(a.imse_mean[1], a.imse_mean[0]);
}

TEST(EmpiricalCurve, RejectsBadConfig) {
    const Quadrature q = trapezoid_box({0.0}, {1.0}, 50);
    LearningCurveConfig cfg;
    cfg.tau_grid = {};
    EXPECT_THROW(empirical_learning_curve(KernelSpec::brownian(), Measure::unit_cube(1), q, cfg), InvalidInput);
    cfg.tau_grid = {-0.1};
    EXPECT_THROW(empirical_learning_curve(KernelSpec::brownian(), Measure::unit_cube(1), q, cfg), InvalidInput);
}

TEST(LogLogFit, ExactPowerLaw) {
    std::vector<double> x;
    std::vector<double> y;
    for (double t = 0.01; t < 1.0; t *= 1.5) {
        x.push_back(t);
        y.push_back(3.0 * std::pow(t, 0.8));
    }
    const LogLogFit f = fit_loglog_slope(x, y);
    EXPECT_NEAR(f.slope, 0.8, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(LogLogFit, ConstantAndErrors) {
    EXPECT_NEAR(fit_loglog_slope({0.1, 0.2, 0.4}, {2.0, 2.0, 2.0}).slope, 0.0, 1e-15);
    EXPECT_THROW(fit_loglog_slope({0.1, 0.2}, {1.0, 2.0}), InvalidInput);
    EXPECT_THROW(fit_loglog_slope({0.1, 0.2, 0.3}, {1.0, -2.0, 1.0}), DomainError);
    EXPECT_THROW(fit_loglog_slope({0.1, 0.2, 0.3}, {1.0, 2.0}), DimensionError);
}
