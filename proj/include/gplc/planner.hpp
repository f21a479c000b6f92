#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/kernels.hpp"
#include "gplc/learning_curve.hpp"
#include "gplc/optimize.hpp"
#include "gplc/parallel.hpp"
#include "gplc/random.hpp"

namespace gplc {

struct NoiseEstimate {
    Eigen::VectorXd per_point;
    double mean = 0.0;
};

/// Per-point unbiased sample variance of the replicates and its average over
/// points. Without replicates (or with single ones) externally supplied
/// variances in obs.sigma_eps2 are used instead.
inline NoiseEstimate estimate_noise(const ObservationSet& obs) {
    const Eigen::Index n = obs.size();
    NoiseEstimate out;
    bool replicated = obs.has_replicates();
    if (replicated) {
        for (const auto& r : obs.replicates) {
            replicated = replicated && r.size() >= 2;
        }
    }
    if (replicated) {
        out.per_point.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = obs.replicates[static_cast<std::size_t>(i)];
            const double s = static_cast<double>(r.size());
            const double mean = std::accumulate(r.begin(), r.end(), 0.0) / s;
            double ss = 0.0;
            for (double v : r) {
                ss += (v - mean) * (v - mean);
            }
            out.per_point[i] = ss / (s - 1.0);
        }
    } else if (obs.sigma_eps2.size() == n && n > 0) {
        out.per_point = obs.sigma_eps2;
    } else {
        throw InvalidInput("estimate_noise: every point needs at least 2 replicates, or supply sigma_eps2");
    }
    out.mean = out.per_point.mean();
    return out;
}

/// Matern hyperparameters: regularity, per-dimension length-scales, variance.
struct MaternParams {
    double nu = 2.5;
    std::vector<double> theta{1.0};
    double sigma2 = 1.0;

    [[nodiscard]] KernelSpec unit_kernel() const {
        KernelSpec s;
        s.family = theta.size() == 1 ? KernelFamily::matern1d : KernelFamily::matern_tensor;
        s.nu = nu;
        s.lengthscales = theta;
        s.variance = 1.0;
        return s;
    }
    [[nodiscard]] KernelSpec kernel() const {
        KernelSpec s = unit_kernel();
        s.variance = sigma2;
        return s;
    }
};

/// -1/2 r^T C^{-1} r - 1/2 log det C with C = sigma2 K + noise I and r = z - m,
/// through a Cholesky factorization.
inline double concentrated_log_likelihood(const MaternParams& params, const Points& points,
                                          const Eigen::VectorXd& values, double mean, double noise) {
    if (points.rows() != values.size()) {
        throw DimensionError("likelihood: " + std::to_string(points.rows()) + " points but " +
                             std::to_string(values.size()) + " values");
    }
    if (!(params.sigma2 >= 0.0) || !(noise >= 0.0)) {
        throw InvalidInput("likelihood: sigma2 and the noise variance must be >= 0");
    }
    const Kernel unit(params.unit_kernel());
    Eigen::MatrixXd c = params.sigma2 * gram_matrix(unit, points);
    c.diagonal().array() += noise;
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) {
        const std::size_t minor = detail::first_bad_leading_minor(c);
        throw SingularCovariance(minor, "likelihood: sigma2 K + noise I is not positive definite (leading minor " +
                                            std::to_string(minor) + ")");
    }
    const Eigen::VectorXd r = (values.array() - mean).matrix();
    const Eigen::VectorXd v = llt.matrixL().solve(r);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * v.squaredNorm() - 0.5 * log_det;
}

/// Search box for (nu, theta_1..theta_d, sigma2).
struct LikelihoodBounds {
    double nu_lower = 0.5;
    double nu_upper = 3.0;
    std::vector<double> theta_lower;
    std::vector<double> theta_upper;
    double sigma2_lower = 0.01;
    double sigma2_upper = 1.0;

    static LikelihoodBounds defaults(int d) {
        LikelihoodBounds b;
        b.theta_lower.assign(static_cast<std::size_t>(d), 0.01);
        b.theta_upper.assign(static_cast<std::size_t>(d), 2.0);
        return b;
    }

    [[nodiscard]] int dimension() const { return static_cast<int>(theta_lower.size()); }

    [[nodiscard]] Eigen::VectorXd lower() const {
        Eigen::VectorXd v(dimension() + 2);
        v[0] = nu_lower;
        for (int k = 0; k < dimension(); ++k) {
            v[k + 1] = theta_lower[static_cast<std::size_t>(k)];
        }
        v[dimension() + 1] = sigma2_lower;
        return v;
    }
    [[nodiscard]] Eigen::VectorXd upper() const {
        Eigen::VectorXd v(dimension() + 2);
        v[0] = nu_upper;
        for (int k = 0; k < dimension(); ++k) {
            v[k + 1] = theta_upper[static_cast<std::size_t>(k)];
        }
        v[dimension() + 1] = sigma2_upper;
        return v;
    }

    void validate() const {
        if (theta_lower.empty() || theta_lower.size() != theta_upper.size()) {
            throw InvalidInput("bounds: theta bounds must be nonempty with equal lengths");
        }
        const Eigen::VectorXd lo = lower();
        const Eigen::VectorXd hi = upper();
        if (!((hi - lo).array() > 0.0).all() || !(lo.array() > 0.0).all()) {
            throw InvalidInput("bounds: every lower bound must be > 0 and below its upper bound");
        }
    }
};

inline MaternParams params_from_vector(const Eigen::VectorXd& v) {
    MaternParams p;
    p.nu = v[0];
    p.theta.assign(v.data() + 1, v.data() + v.size() - 1);
    p.sigma2 = v[v.size() - 1];
    return p;
}

inline Eigen::VectorXd params_to_vector(const MaternParams& p) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(p.theta.size()) + 2);
    v[0] = p.nu;
    for (std::size_t k = 0; k < p.theta.size(); ++k) {
        v[static_cast<Eigen::Index>(k) + 1] = p.theta[k];
    }
    v[v.size() - 1] = p.sigma2;
    return v;
}

struct FitConfig {
    LikelihoodBounds bounds;
    int n_random = 10000;
    int n_polish = 150;
    std::uint64_t seed = 0;
    int threads = 1;
    /// Polished optima closer than this (in box-scaled coordinates) share a cluster.
    double cluster_radius = 0.05;
    BoxMinimizerOptions optimizer;
};

struct HyperparameterFit {
    MaternParams params;
    double mean = 0.0;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    /// Best likelihood among the random starts.
    double best_start_log_likelihood = -std::numeric_limits<double>::infinity();
    int n_random = 0;
    int n_polished = 0;
    /// Number of distinct local maxima found by the polish runs.
    int n_local_maxima = 0;
    /// Set when no polish improved on the best start; params is then that start.
    bool warning = false;
};

/// Multi-start maximization of the likelihood over the bounds: n_random
/// uniform starts are scored, the n_polish best are polished by projected
/// BFGS. The mean is fixed at the sample mean of `values`.
inline HyperparameterFit fit_hyperparameters(const Points& points, const Eigen::VectorXd& values, double noise,
                                             const FitConfig& cfg) {
    cfg.bounds.validate();
    if (cfg.bounds.dimension() != points.cols()) {
        throw DimensionError("fit: bounds have dimension " + std::to_string(cfg.bounds.dimension()) +
                             " but the points have dimension " + std::to_string(points.cols()));
    }
    if (cfg.n_random < 1 || cfg.n_polish < 1) {
        throw InvalidInput("fit: n_random and n_polish must be >= 1");
    }
    if (values.size() == 0 || values.size() != points.rows()) {
        throw DimensionError("fit: need one value per point");
    }
    const double m = values.mean();
    const Eigen::VectorXd lo = cfg.bounds.lower();
    const Eigen::VectorXd hi = cfg.bounds.upper();
    const Eigen::Index dim = lo.size();

    auto loglik = [&](const Eigen::VectorXd& v) {
        try {
            return concentrated_log_likelihood(params_from_vector(v), points, values, m, noise);
        } catch (const Error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    const auto n_random = static_cast<std::size_t>(cfg.n_random);
    std::vector<Eigen::VectorXd> starts(n_random);
    std::vector<double> scores(n_random);
    parallel_for(n_random, cfg.threads, [&](std::size_t i) {
        auto rng = make_stream(cfg.seed, i);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::VectorXd v(dim);
        for (Eigen::Index k = 0; k < dim; ++k) {
            v[k] = lo[k] + (hi[k] - lo[k]) * u(rng);
        }
        starts[i] = v;
        scores[i] = loglik(v);
    });

    std::vector<std::size_t> order(n_random);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return scores[l] > scores[r]; });
    const std::size_t n_polish = std::min(n_random, static_cast<std::size_t>(cfg.n_polish));

    const BoxMinimizer minimizer(lo, hi, cfg.optimizer);
    std::vector<BoxMinimum> polished(n_polish);
    parallel_for(n_polish, cfg.threads, [&](std::size_t j) {
        polished[j] = minimizer.minimize([&](const Eigen::VectorXd& v) { return -loglik(v); }, starts[order[j]]);
    });

    HyperparameterFit fit;
    fit.mean = m;
    fit.n_random = cfg.n_random;
    fit.n_polished = static_cast<int>(n_polish);
    fit.best_start_log_likelihood = scores[order[0]];
    // Ties resolve to the lowest polish rank, i.e. the best start.
    std::size_t best = 0;
    for (std::size_t j = 1; j < n_polish; ++j) {
        if (-polished[j].value > -polished[best].value) {
            best = j;
        }
    }
    const double best_polished = -polished[best].value;
    if (std::isfinite(best_polished) && best_polished > fit.best_start_log_likelihood) {
        fit.params = params_from_vector(polished[best].x);
        fit.log_likelihood = best_polished;
    } else {
        fit.params = params_from_vector(starts[order[0]]);
        fit.log_likelihood = fit.best_start_log_likelihood;
        fit.warning = true;
    }

    // Greedy clustering of the finite polished optima in scaled coordinates.
    std::vector<Eigen::VectorXd> centers;
    const Eigen::VectorXd width = hi - lo;
    for (std::size_t j = 0; j < n_polish; ++j) {
        if (!std::isfinite(polished[j].value)) {
            continue;
        }
        const Eigen::VectorXd u = (polished[j].x - lo).cwiseQuotient(width);
        bool seen = false;
        for (const auto& c : centers) {
            if ((c - u).norm() < cfg.cluster_radius) {
                seen = true;
                break;
            }
        }
        if (!seen) {
            centers.push_back(u);
        }
    }
    fit.n_local_maxima = static_cast<int>(centers.size());
    return fit;
}

/// Inputs of the IMSE extrapolation IMSE_T = IMSE_T0 g(T) / g(T0) with
/// g(T) = log(T / sigma2_bar)^log_power / (T / sigma2_bar)^exponent.
struct DecayInputs {
    double imse_T0 = 0.0;
    double T0 = 1.0;
    double sigma_eps2_bar = 1.0;
    RateLaw rate;

    void validate() const {
        if (!(imse_T0 > 0.0) || !(T0 > 0.0) || !(sigma_eps2_bar > 0.0)) {
            throw InvalidInput("decay: imse_T0, T0 and sigma_eps2_bar must be > 0");
        }
        if (!(rate.exponent > 0.0) || rate.log_power < 0) {
            throw InvalidInput("decay: rate exponent must be > 0 and log power >= 0");
        }
        if (rate.log_power > 0) {
            const double u0 = T0 / sigma_eps2_bar;
            if (!(std::log(u0) > rate.log_power / rate.exponent)) {
                throw DomainError("decay: T0 / sigma_eps2_bar = " + std::to_string(u0) +
                                  " lies outside the region where the rate law decreases; use a larger T0");
            }
        }
    }
};

inline double imse_decay(const DecayInputs& f, double budget) {
    f.validate();
    if (budget < f.T0) {
        throw InvalidInput("decay: T = " + std::to_string(budget) + " is below T0 = " + std::to_string(f.T0));
    }
    if (budget == f.T0) {
        return f.imse_T0;
    }
    const double lu = std::log(budget / f.sigma_eps2_bar);
    const double lu0 = std::log(f.T0 / f.sigma_eps2_bar);
    double log_ratio = -f.rate.exponent * (lu - lu0);
    if (f.rate.log_power > 0) {
        log_ratio += f.rate.log_power * (std::log(lu) - std::log(lu0));
    }
    return f.imse_T0 * std::exp(log_ratio);
}

struct BudgetSolution {
    long T = 0;
    /// ceil(T / n) replications per point for a uniform allocation over n points.
    long per_point = 0;
};

/// Smallest integer T >= T0 with imse_decay(T) <= target.
inline BudgetSolution required_budget(const DecayInputs& f, double target, long n_points = 1) {
    f.validate();
    if (!(target > 0.0) || !(target < f.imse_T0)) {
        throw InvalidInput("target_imse = " + std::to_string(target) + " must be > 0 and below the current IMSE " +
                           std::to_string(f.imse_T0));
    }
    if (n_points < 1) {
        throw InvalidInput("required_budget: n_points must be >= 1");
    }
    auto lo = static_cast<long>(std::ceil(f.T0));
    if (imse_decay(f, static_cast<double>(lo)) <= target) {
        return {lo, (lo + n_points - 1) / n_points};
    }
    long hi = std::max(lo + 1, 2 * lo);
    while (imse_decay(f, static_cast<double>(hi)) > target) {
        if (hi > (1L << 52)) {
            throw DomainError("required_budget: target is not reached below T = 2^52");
        }
        lo = hi;
        hi *= 2;
    }
    // Invariant: decay(lo) > target >= decay(hi).
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (imse_decay(f, static_cast<double>(mid)) <= target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return {hi, (hi + n_points - 1) / n_points};
}

struct BudgetForecast {
    DecayInputs inputs;
    double target = 0.0;
    long solved_T = 0;
    long per_point = 0;
    /// (T, predicted IMSE) at log-spaced budgets from T0 to 2 solved_T.
    std::vector<std::pair<double, double>> curve;
};

inline BudgetForecast forecast(const DecayInputs& f, double target, long n_points = 1, int curve_points = 50) {
    BudgetForecast out;
    out.inputs = f;
    out.target = target;
    const BudgetSolution sol = required_budget(f, target, n_points);
    out.solved_T = sol.T;
    out.per_point = sol.per_point;
    const double t_hi = std::max(2.0 * static_cast<double>(sol.T), f.T0 * 2.0);
    for (int j = 0; j < curve_points; ++j) {
        const double frac = curve_points > 1 ? static_cast<double>(j) / (curve_points - 1) : 0.0;
        double t = f.T0 * std::exp(frac * std::log(t_hi / f.T0));
        if (j == 0) {
            t = f.T0;
        }
        out.curve.emplace_back(t, imse_decay(f, t));
    }
    return out;
}

} // namespace gplc
