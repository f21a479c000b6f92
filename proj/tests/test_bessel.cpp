#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gplc/bessel.hpp"
#include "gplc/errors.hpp"

namespace {

using gplc::bessel_k;

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Independent check through the integral representation
// K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt. The integrand is even in t
// and decays doubly exponentially, so the trapezoid rule converges geometrically.
double integral_k(double nu, double z) {
    const auto f = [&](double t) { return std::exp(-z * std::cosh(t)) * std::cosh(nu * t); };
    // exp(-z cosh t) is far below double precision past this point.
    const double upper = std::acosh(800.0 / z);
    const int m = 20000;
    const double h = upper / m;
    double acc = 0.5 * f(0.0);
    for (int j = 1; j <= m; ++j) {
        acc += f(h * j);
    }
    return h * acc;
}

} // namespace

TEST(BesselK, HalfIntegerClosedForm) {
    EXPECT_NEAR(bessel_k(0.5, 1.0), std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(bessel_k(0.5, 1.0), 0.4610685, 1e-7);
    EXPECT_LT(rel(bessel_k(0.5, 1.0), 0.46106850444789455844), 1e-14);
    // K_{3/2}(z) = sqrt(pi/(2z)) e^{-z} (1 + 1/z)
    const double z = 0.7;
    EXPECT_LT(rel(bessel_k(1.5, z), std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * (1.0 + 1.0 / z)), 1e-14);
}

TEST(BesselK, RecurrenceAtOneTwo) {
    const double nu = 1.0;
    const double z = 2.0;
    const double r = bessel_k(nu + 1.0, z) - bessel_k(nu - 1.0, z) - 2.0 * nu / z * bessel_k(nu, z);
    EXPECT_LT(std::abs(r), 1e-8);
}

TEST(BesselK, GeneralOrderMatchesIntegralRepresentation) {
    // mpmath reference for the integral at 30 digits.
    EXPECT_LT(rel(bessel_k(1.31, 2.0), 0.16167079017083391267), 1e-10);
    EXPECT_LT(rel(integral_k(1.31, 2.0), 0.16167079017083391267), 1e-10);
    for (double nu : {0.1, 0.77, 1.31, 2.2, 3.6}) {
        for (double z : {0.3, 1.0, 2.0, 4.5, 9.0}) {
            EXPECT_LT(rel(bessel_k(nu, z), integral_k(nu, z)), 1e-10) << "nu=" << nu << " z=" << z;
        }
    }
}

TEST(BesselK, HighPrecisionReferenceValues) {
    struct Case {
        double nu;
        double z;
        double value;
    };
    const Case cases[] = {
        {0.0, 0.1, 2.4270690247020165578},
        {0.3, 0.01, 6.8901026382927695432},
        {2.7, 5.0, 0.0071262487556333315595},
        {1.31, 0.05, 56.130838756529497833},
        {7.2, 30.0, 4.9712264894018642169e-14},
        {4.0, 1e-3, 47999996000000.246003},
    };
    for (const auto& c : cases) {
        EXPECT_LT(rel(bessel_k(c.nu, c.z), c.value), 1e-10) << "nu=" << c.nu << " z=" << c.z;
    }
}

TEST(BesselK, AgreesWithStandardLibrary) {
    for (double nu : {0.0, 0.25, 0.9, 1.31, 2.0, 2.75, 5.5}) {
        for (double z : {0.02, 0.5, 1.7, 3.0, 12.0, 40.0}) {
            EXPECT_LT(rel(bessel_k(nu, z), std::cyl_bessel_k(nu, z)), 1e-10) << "nu=" << nu << " z=" << z;
        }
    }
}

TEST(BesselK, EvenInOrder) {
    for (double nu : {0.3, 1.31, 2.5}) {
        EXPECT_EQ(bessel_k(-nu, 1.3), bessel_k(nu, 1.3));
    }
}

TEST(BesselK, RejectsNonPositiveArgument) {
    EXPECT_THROW(bessel_k(1.0, 0.0), gplc::DomainError);
    EXPECT_THROW(bessel_k(1.0, -2.0), gplc::DomainError);
    EXPECT_THROW(bessel_k(1.0, std::nan("")), gplc::DomainError);
}

TEST(BesselK, OverflowSaturatesWithFlag) {
    const auto r = gplc::bessel_k_checked(200.0, 1e-3);
    EXPECT_TRUE(r.overflow);
    EXPECT_EQ(r.value, std::numeric_limits<double>::max());
    EXPECT_FALSE(gplc::bessel_k_checked(2.0, 1.0).overflow);
}
