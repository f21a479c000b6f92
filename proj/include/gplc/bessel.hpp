#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gplc/errors.hpp"

namespace gplc {

/// Value of K_nu(z) together with a flag raised when the true value exceeds
/// the double range. On overflow `value` saturates at the largest finite double.
struct BesselKResult {
    double value = 0.0;
    bool overflow = false;
};

namespace detail {

// Taylor coefficients of 1/Gamma(x) about 0: 1/Gamma(x) = sum_k kRecipGamma[k] x^k.
inline constexpr std::array<double, 29> kRecipGamma = {
    0.0,
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
    1.18669225475160033258e-18,
    1.412380655318031781556e-18,
};

// Temme's auxiliary gamma quantities for |mu| <= 1/2:
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu),  gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
// Splitting the series by parity avoids the cancellation at mu -> 0.
struct TemmeGammas {
    double gam1, gam2, gampl, gammi;
};

inline TemmeGammas temme_gammas(double mu) {
    double odd = 0.0;
    double even = 0.0;
    for (std::size_t k = kRecipGamma.size() - 1; k >= 1; --k) {
        // Horner over mu^(k-1) (odd k) and mu^(k-2) (even k).
        if (k % 2 == 1) {
            odd = odd * mu * mu + kRecipGamma[k];
        } else {
            even = even * mu * mu + kRecipGamma[k];
        }
    }
    TemmeGammas g{};
    g.gam1 = -even;
    g.gam2 = odd;
    g.gampl = g.gam2 - mu * g.gam1;
    g.gammi = g.gam2 + mu * g.gam1;
    return g;
}

inline bool is_half_integer(double nu, int& n) {
    const double twice = 2.0 * nu;
    const double r = std::round(twice);
    if (twice != r || static_cast<long long>(r) % 2 == 0 || r > 61.0) {
        return false;
    }
    n = static_cast<int>((r - 1.0) / 2.0);
    return true;
}

// K_{n+1/2}(z) = sqrt(pi/(2z)) e^{-z} sum_{k<=n} (n+k)!/(k!(n-k)!) (2z)^{-k}
inline double bessel_k_half_integer(int n, double z) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 0; k < n; ++k) {
        term *= static_cast<double>(n + k + 1) * static_cast<double>(n - k) / (static_cast<double>(k + 1) * 2.0 * z);
        sum += term;
    }
    return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum;
}

// Temme series (z <= 2) or Steed's continued fraction (z > 2) for K_mu, K_{mu+1}
// with |mu| <= 1/2, then forward recurrence up to order nu.
inline double bessel_k_general(double nu, double z) {
    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    constexpr double pi = std::numbers::pi;

    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;
    const double mu2 = mu * mu;
    const double xi = 1.0 / z;
    const double xi2 = 2.0 * xi;

    double kmu = 0.0;
    double k1 = 0.0;
    if (z <= 2.0) {
        const double x2 = 0.5 * z;
        const double pimu = pi * mu;
        const double fact = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
        const TemmeGammas g = temme_gammas(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= max_iter; ++i) {
            const double di = static_cast<double>(i);
            ff = (di * ff + p + q) / (di * di - mu2);
            c *= d / di;
            p /= di - mu;
            q /= di + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - di * ff);
            if (std::abs(del) < std::abs(sum) * eps) {
                break;
            }
        }
        kmu = sum;
        k1 = sum1 * xi2;
    } else {
        double b = 2.0 * (1.0 + z);
        double d = 1.0 / b;
        double h = d;
        double delh = d;
        double q1 = 0.0;
        double q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1;
        double c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        for (int i = 2; i <= max_iter; ++i) {
            a -= 2.0 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < eps) {
                break;
            }
        }
        h = a1 * h;
        kmu = std::sqrt(pi / (2.0 * z)) * std::exp(-z) / s;
        k1 = kmu * (mu + z + 0.5 - h) * xi;
    }
    for (int i = 1; i <= nl; ++i) {
        const double next = (mu + i) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    return kmu;
}

} // namespace detail

/// Modified Bessel function of the second kind K_nu(z) for z > 0 with an
/// overflow flag. K_nu = K_{-nu}, so only |nu| matters.
inline BesselKResult bessel_k_checked(double nu, double z) {
    if (!std::isfinite(nu)) {
        throw DomainError("bessel_k: order must be finite");
    }
    if (!(z > 0.0) || !std::isfinite(z)) {
        throw DomainError("bessel_k: argument must be finite and > 0, got " + std::to_string(z));
    }
    nu = std::abs(nu);
    int n = 0;
    const double v = detail::is_half_integer(nu, n) ? detail::bessel_k_half_integer(n, z)
                                                    : detail::bessel_k_general(nu, z);
    if (!std::isfinite(v)) {
        return {std::numeric_limits<double>::max(), true};
    }
    return {v, false};
}

/// K_nu(z); saturates at the largest finite double on overflow.
inline double bessel_k(double nu, double z) { return bessel_k_checked(nu, z).value; }

} // namespace gplc
