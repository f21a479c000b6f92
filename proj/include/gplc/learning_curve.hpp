#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/kernels.hpp"
#include "gplc/parallel.hpp"
#include "gplc/quadrature.hpp"
#include "gplc/random.hpp"
#include "gplc/spectrum.hpp"

namespace gplc {

/// Learning-curve rate IMSE ~ tau^exponent * log(1/tau)^log_power.
struct RateLaw {
    double exponent = 1.0;
    int log_power = 0;
    KernelFamily family = KernelFamily::finite_rank;
    /// H for fBm, nu for the Matern families, 0 otherwise.
    double regularity = 0.0;
    int dimension = 1;

    /// tau^exponent * log(1/tau)^log_power, for tau in (0, 1).
    [[nodiscard]] double shape(double tau) const {
        return std::pow(tau, exponent) * std::pow(std::log(1.0 / tau), log_power);
    }
};

struct RateParams {
    double nu = 2.5;
    double hurst = 0.5;
    int dimension = 1;
};

inline RateLaw rate_law(KernelFamily family, const RateParams& params) {
    RateLaw r;
    r.family = family;
    r.dimension = params.dimension;
    if (params.dimension < 1) {
        throw InvalidInput("rate_law: dimension must be >= 1");
    }
    switch (family) {
    case KernelFamily::brownian:
    case KernelFamily::fbm: {
        const double h = family == KernelFamily::brownian ? 0.5 : params.hurst;
        if (!(h > 0.0 && h < 1.0)) {
            throw InvalidInput("rate_law: hurst must lie in (0, 1)");
        }
        r.regularity = h;
        r.exponent = 1.0 - 1.0 / (2.0 * h + 1.0);
        r.log_power = 0;
        return r;
    }
    case KernelFamily::matern1d:
    case KernelFamily::matern_tensor:
        if (!(params.nu > 0.5)) {
            throw InvalidInput("rate_law: Matern rate law needs nu > 1/2");
        }
        r.regularity = params.nu;
        r.exponent = 1.0 - 1.0 / (2.0 * params.nu);
        r.log_power = family == KernelFamily::matern_tensor ? params.dimension - 1 : 0;
        return r;
    case KernelFamily::gaussian:
        r.exponent = 1.0;
        r.log_power = params.dimension;
        return r;
    case KernelFamily::finite_rank:
        r.exponent = 1.0;
        r.log_power = 0;
        return r;
    default:
        throw InvalidInput("rate_law: no rate law for family " + std::string(to_string(family)));
    }
}

inline RateLaw rate_law(const KernelSpec& spec) {
    return rate_law(spec.family, {spec.nu, spec.hurst, spec.dimension()});
}

namespace detail {

inline void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidInput("tau must be finite and > 0");
    }
}

// tau lambda / (tau + lambda), arranged so that the term lies in
// [min(lambda, tau) / 2, min(lambda, tau)] in floating point as well.
inline double limit_term(double lambda, double tau) {
    if (lambda <= tau) {
        return lambda * (tau / (tau + lambda));
    }
    return tau * (lambda / (tau + lambda));
}

} // namespace detail

struct PointwiseLimit {
    /// sum_{p<P} tau lambda_p / (tau + lambda_p) phi_p(x)^2
    double value = 0.0;
    /// Upper bound on the omitted terms: k(x,x) - sum_{p<P} lambda_p phi_p(x)^2, clamped at 0.
    double tail_bound = 0.0;
};

/// Pointwise large-n limit of the MSE at x for reduced noise tau.
inline PointwiseLimit asymptotic_mse_at(const Spectrum& s, const KernelSpec& spec, double tau, PointRef x) {
    detail::check_tau(tau);
    const Kernel kernel(spec);
    const Eigen::VectorXd phi = eigenfunctions_at(s, kernel, x);
    PointwiseLimit out;
    double captured = 0.0;
    for (Eigen::Index p = 0; p < s.size(); ++p) {
        const double lambda = s.eigenvalues[p];
        out.value += detail::limit_term(lambda, tau) * phi[p] * phi[p];
        captured += lambda * phi[p] * phi[p];
    }
    out.tail_bound = std::max(0.0, kernel.eval(x.data(), x.data()) - captured);
    return out;
}

struct ImseLimit {
    /// sum over the retained eigenvalues.
    double truncated = 0.0;
    /// The omitted terms lie in [0, tail_upper].
    double tail_upper = 0.0;
    /// truncated + tail_upper / 2.
    double estimate = 0.0;
};

/// sum_p tau lambda_p / (tau + lambda_p) over an explicit eigenvalue list, with
/// `residual` the trace mass not represented by the list.
inline ImseLimit asymptotic_imse(const Eigen::VectorXd& eigenvalues, double tau, double residual = 0.0) {
    detail::check_tau(tau);
    ImseLimit out;
    for (Eigen::Index p = 0; p < eigenvalues.size(); ++p) {
        out.truncated += detail::limit_term(eigenvalues[p], tau);
    }
    out.tail_upper = std::max(0.0, residual);
    out.estimate = out.truncated + 0.5 * out.tail_upper;
    return out;
}

inline ImseLimit asymptotic_imse(const Spectrum& s, double tau) {
    return asymptotic_imse(s.eigenvalues, tau, s.residual_trace);
}

struct BTau {
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// B_tau = sum_{lambda <= tau} lambda + tau #{lambda > tau}; the limit IMSE of
/// the same eigenvalue list lies in [B_tau / 2, B_tau].
inline BTau b_tau(const Eigen::VectorXd& eigenvalues, double tau, double residual = 0.0) {
    detail::check_tau(tau);
    BTau out;
    // Summed term by term in list order, like asymptotic_imse, so the bracket
    // also holds in floating point.
    for (Eigen::Index p = 0; p < eigenvalues.size(); ++p) {
        const double lambda = eigenvalues[p];
        out.value += lambda <= tau ? lambda : tau;
    }
    // Unlisted eigenvalues are all below the smallest listed one; when that is
    // <= tau their whole mass belongs to the first sum.
    out.value += std::max(0.0, residual);
    out.lower = 0.5 * out.value;
    out.upper = out.value;
    return out;
}

inline BTau b_tau(const Spectrum& s, double tau) { return b_tau(s.eigenvalues, tau, s.residual_trace); }

struct LearningCurve {
    std::vector<double> tau;
    std::vector<double> imse_mean;
    std::vector<double> imse_stderr;
    /// per_design(d, t): IMSE of design d at tau[t].
    Eigen::MatrixXd per_design;
};

struct LearningCurveConfig {
    Eigen::Index n = 200;
    std::vector<double> tau_grid;
    int n_designs = 10;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Monte-Carlo learning curve: for each of n_designs designs of n i.i.d. points
/// from `measure`, the IMSE (against `quad`) with homoscedastic noise n tau.
/// The same designs are reused for every tau; design d draws from stream d.
inline LearningCurve empirical_learning_curve(const KernelSpec& spec, const Measure& measure, const Quadrature& quad,
                                              const LearningCurveConfig& cfg) {
    if (cfg.n < 1) {
        throw InvalidInput("empirical_learning_curve: n must be >= 1");
    }
    if (cfg.tau_grid.empty()) {
        throw InvalidInput("empirical_learning_curve: empty tau grid");
    }
    if (cfg.n_designs < 1) {
        throw InvalidInput("empirical_learning_curve: n_designs must be >= 1");
    }
    for (double t : cfg.tau_grid) {
        detail::check_tau(t);
    }
    quad.validate_probability();
    const Kernel kernel(spec);
    const auto n_tau = static_cast<Eigen::Index>(cfg.tau_grid.size());
    LearningCurve out;
    out.tau = cfg.tau_grid;
    out.per_design.resize(cfg.n_designs, n_tau);

    parallel_for(static_cast<std::size_t>(cfg.n_designs), cfg.threads, [&](std::size_t d) {
        auto rng = make_stream(cfg.seed, d);
        Design design(measure.sample(cfg.n, rng), measure);
        const Eigen::MatrixXd gram = gram_matrix(kernel, design.points);
        const CrossCovariance cache = CrossCovariance::compute(kernel, quad.nodes, design.points);
        const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(cfg.n);
        for (Eigen::Index t = 0; t < n_tau; ++t) {
            const double noise = static_cast<double>(cfg.n) * cfg.tau_grid[static_cast<std::size_t>(t)];
            const Predictor p(kernel, design, Eigen::VectorXd::Constant(cfg.n, noise), zeros, 0.0, &gram);
            out.per_design(static_cast<Eigen::Index>(d), t) = integrated_mse(p, quad, &cache);
        }
    });

    for (Eigen::Index t = 0; t < n_tau; ++t) {
        const Eigen::VectorXd col = out.per_design.col(t);
        const double mean = col.mean();
        double se = 0.0;
        if (cfg.n_designs > 1) {
            const double var = (col.array() - mean).square().sum() / (cfg.n_designs - 1);
            se = std::sqrt(var / cfg.n_designs);
        }
        out.imse_mean.push_back(mean);
        out.imse_stderr.push_back(se);
    }
    return out;
}

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least squares of log y on log x.
inline LogLogFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw DimensionError("fit_loglog_slope: x and y lengths differ");
    }
    if (x.size() < 3) {
        throw InvalidInput("fit_loglog_slope: needs at least 3 points");
    }
    const auto n = static_cast<double>(x.size());
    std::vector<double> lx(x.size());
    std::vector<double> ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw DomainError("fit_loglog_slope: values must be positive");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw InvalidInput("fit_loglog_slope: x values must not all be equal");
    }
    LogLogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

} // namespace gplc
