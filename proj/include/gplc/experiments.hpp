#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gplc/allocation.hpp"
#include "gplc/csv.hpp"
#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/learning_curve.hpp"
#include "gplc/planner.hpp"
#include "gplc/random.hpp"
#include "gplc/simulator.hpp"
#include "gplc/spectrum.hpp"

namespace gplc {

/// Decreasing tau values with 1/tau log-spaced over [inv_min, inv_max].
inline std::vector<double> inverse_tau_grid(double inv_min, double inv_max, int count) {
    if (!(inv_min > 0.0) || !(inv_max > inv_min) || count < 2) {
        throw InvalidInput("tau grid: need 0 < inv_tau_min < inv_tau_max and at least 2 values");
    }
    std::vector<double> tau;
    for (int i = 0; i < count; ++i) {
        const double inv = inv_min * std::pow(inv_max / inv_min, static_cast<double>(i) / (count - 1));
        tau.push_back(1.0 / inv);
    }
    return tau;
}

/// One empirical learning curve with its reference curve, indexed by 1/tau.
struct CurveSeries {
    std::string label;
    std::vector<double> inv_tau;
    std::vector<double> imse_mean;
    std::vector<double> imse_stderr;
    std::vector<double> theory;
    RateLaw rate;
    /// Regression of log IMSE on log(1/tau).
    LogLogFit empirical_fit;
    /// Same regression for the theory column.
    double theory_grid_slope = 0.0;

    [[nodiscard]] csv::Table table() const {
        csv::Table t({"inv_tau", "imse_mean", "imse_stderr", "theory_value"});
        for (std::size_t i = 0; i < inv_tau.size(); ++i) {
            t.add_row(std::vector<double>{inv_tau[i], imse_mean[i], imse_stderr[i], theory[i]});
        }
        return t;
    }
};

namespace detail {

inline CurveSeries make_series(std::string label, const std::vector<double>& tau, const LearningCurve& lc,
                               std::vector<double> theory, RateLaw rate) {
    CurveSeries s;
    s.label = std::move(label);
    for (double t : tau) {
        s.inv_tau.push_back(1.0 / t);
    }
    s.imse_mean = lc.imse_mean;
    s.imse_stderr = lc.imse_stderr;
    s.theory = std::move(theory);
    s.rate = rate;
    s.empirical_fit = fit_loglog_slope(s.inv_tau, s.imse_mean);
    s.theory_grid_slope = fit_loglog_slope(s.inv_tau, s.theory).slope;
    return s;
}

// exp(mean(log(y / shape))) over [begin, end).
inline double fitted_constant(const std::vector<double>& y, const std::vector<double>& shape, std::size_t begin,
                              std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        acc += std::log(y[i] / shape[i]);
    }
    return std::exp(acc / static_cast<double>(end - begin));
}

} // namespace detail

struct Figure1Config {
    Eigen::Index n = 200;
    int quad_nodes = 4000;
    double inv_tau_min = 5.0;
    double inv_tau_max = 100.0;
    int n_tau = 12;
    int n_designs = 10;
    std::vector<double> hursts{0.5, 0.9};
    /// Nystrom discretization for the theory curve.
    int spectrum_nodes = 2000;
    int spectrum_terms = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// fBm learning curves against the large-n limit sum_p tau lambda_p / (tau + lambda_p).
inline std::vector<CurveSeries> run_figure1(const Figure1Config& cfg) {
    const std::vector<double> tau = inverse_tau_grid(cfg.inv_tau_min, cfg.inv_tau_max, cfg.n_tau);
    const Quadrature quad = trapezoid_box({0.0}, {1.0}, cfg.quad_nodes);
    const Quadrature spec_quad = trapezoid_box({0.0}, {1.0}, cfg.spectrum_nodes);
    std::vector<CurveSeries> out;
    for (std::size_t h = 0; h < cfg.hursts.size(); ++h) {
        const KernelSpec spec = KernelSpec::fbm(cfg.hursts[h]);
        LearningCurveConfig lc_cfg;
        lc_cfg.n = cfg.n;
        lc_cfg.tau_grid = tau;
        lc_cfg.n_designs = cfg.n_designs;
        lc_cfg.seed = cfg.seed + 1000003ULL * h;
        lc_cfg.threads = cfg.threads;
        const LearningCurve lc = empirical_learning_curve(spec, Measure::unit_cube(1), quad, lc_cfg);
        const Spectrum s = nystrom_spectrum(spec, spec_quad, cfg.spectrum_terms);
        std::vector<double> theory;
        for (double t : tau) {
            theory.push_back(asymptotic_imse(s, t).estimate);
        }
        char label[32];
        std::snprintf(label, sizeof label, "fbm_H%.2f", cfg.hursts[h]);
        out.push_back(detail::make_series(label, tau, lc, std::move(theory), rate_law(spec)));
    }
    return out;
}

struct Figure2Config {
    Eigen::Index n = 200;
    /// Nodes per axis of the 2-D trapezoid rule.
    int grid_2d = 64;
    int quad_nodes_1d = 4000;
    double inv_tau_min = 10.0;
    double inv_tau_max = 100.0;
    int n_tau = 10;
    int n_designs = 10;
    double theta = 0.2;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Figure2Result {
    /// Theory column: C tau^{1-1/(2 nu)} log(1/tau) with C fitted on all points.
    CurveSeries matern;
    /// Theory column: C tau log(1/tau) with C fitted on the larger-tau half.
    CurveSeries gaussian;
    double gaussian_constant = 0.0;
    /// Every smaller-tau point lies at or below C tau log(1/tau).
    bool gaussian_bounded = false;
};

inline Figure2Result run_figure2(const Figure2Config& cfg) {
    const std::vector<double> tau = inverse_tau_grid(cfg.inv_tau_min, cfg.inv_tau_max, cfg.n_tau);
    Figure2Result r;
    {
        const KernelSpec spec = KernelSpec::matern_tensor(2.5, {cfg.theta, cfg.theta});
        const Quadrature quad = trapezoid_box({0.0, 0.0}, {1.0, 1.0}, cfg.grid_2d);
        LearningCurveConfig lc_cfg{cfg.n, tau, cfg.n_designs, cfg.seed, cfg.threads};
        const LearningCurve lc = empirical_learning_curve(spec, Measure::unit_cube(2), quad, lc_cfg);
        const RateLaw rate = rate_law(spec);
        std::vector<double> shape;
        for (double t : tau) {
            shape.push_back(rate.shape(t));
        }
        const double c = detail::fitted_constant(lc.imse_mean, shape, 0, shape.size());
        for (double& v : shape) {
            v *= c;
        }
        r.matern = detail::make_series("matern52_2d", tau, lc, std::move(shape), rate);
    }
    {
        const KernelSpec spec = KernelSpec::gaussian({cfg.theta});
        const Quadrature quad = trapezoid_box({0.0}, {1.0}, cfg.quad_nodes_1d);
        LearningCurveConfig lc_cfg{cfg.n, tau, cfg.n_designs, cfg.seed + 1000003ULL, cfg.threads};
        const LearningCurve lc = empirical_learning_curve(spec, Measure::unit_cube(1), quad, lc_cfg);
        const RateLaw rate = rate_law(spec);
        std::vector<double> shape;
        for (double t : tau) {
            shape.push_back(rate.shape(t));
        }
        // tau decreases along the grid, so the first half holds the larger values.
        const std::size_t half = shape.size() / 2;
        r.gaussian_constant = detail::fitted_constant(lc.imse_mean, shape, 0, half);
        r.gaussian_bounded = true;
        for (std::size_t i = 0; i < shape.size(); ++i) {
            shape[i] *= r.gaussian_constant;
            if (i >= half && lc.imse_mean[i] > shape[i]) {
                r.gaussian_bounded = false;
            }
        }
        r.gaussian = detail::make_series("gaussian_1d", tau, lc, std::move(shape), rate);
    }
    return r;
}

struct DegenerateConfig {
    Eigen::Index n = 200;
    int quad_nodes = 2000;
    double inv_tau_min = 100.0;
    double inv_tau_max = 2000.0;
    int n_tau = 10;
    int n_designs = 10;
    /// Weights of the cosine basis functions 0, 1, 2, ...
    std::vector<double> weights{1.0, 0.5, 0.25};
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Finite-rank kernel sum_p w_p b_p(x) b_p(y) with orthonormal cosine b_p; its
/// Mercer eigenvalues under the uniform measure are exactly the weights.
inline CurveSeries run_degenerate(const DegenerateConfig& cfg) {
    std::vector<RankTerm> terms;
    for (std::size_t p = 0; p < cfg.weights.size(); ++p) {
        terms.push_back({cfg.weights[p], BasisKind::cosine, {static_cast<int>(p)}});
    }
    const KernelSpec spec = KernelSpec::finite_rank(terms);
    const std::vector<double> tau = inverse_tau_grid(cfg.inv_tau_min, cfg.inv_tau_max, cfg.n_tau);
    const Quadrature quad = trapezoid_box({0.0}, {1.0}, cfg.quad_nodes);
    LearningCurveConfig lc_cfg{cfg.n, tau, cfg.n_designs, cfg.seed, cfg.threads};
    const LearningCurve lc = empirical_learning_curve(spec, Measure::unit_cube(1), quad, lc_cfg);
    const Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(cfg.weights.data(),
                                                                     static_cast<Eigen::Index>(cfg.weights.size()));
    std::vector<double> theory;
    for (double t : tau) {
        theory.push_back(asymptotic_imse(lambda, t).truncated);
    }
    return detail::make_series("finite_rank", tau, lc, std::move(theory), rate_law(spec));
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw InvalidInput("spearman: need two equal-length samples of size >= 2");
    }
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return v[l] < v[r]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
                ++j;
            }
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

struct CaseStudyConfig {
    SimulatorConfig simulator;
    Eigen::Index n = 100;
    /// Nodes per axis of the test grid and of the IMSE trapezoid rule.
    int grid = 75;
    /// Replicates averaged into each test value.
    int test_replicates = 200;
    /// Replicates per training point used to estimate the noise variances.
    int noise_replicates = 10;
    /// target IMSE = target_ratio * IMSE_T0.
    double target_ratio = 0.2;
    /// Largest uniform s tried when measuring the empirical budget.
    long max_s = 120;
    /// Independent noise realizations averaged in the empirical comparisons.
    int realizations = 10;
    /// Budget for the allocation comparison; 0 uses the forecast budget.
    long allocation_budget = 0;
    FitConfig fit;
    std::uint64_t seed = 0;
    int threads = 1;

    CaseStudyConfig() {
        fit.bounds = LikelihoodBounds::defaults(2);
        fit.n_random = 1000;
        fit.n_polish = 8;
    }
};

struct CaseStudyReport {
    Points design;
    Eigen::VectorXd sigma_eps2_true;
    NoiseEstimate noise;
    /// Standard error of noise.mean, from the spread of the per-point estimates.
    double noise_mean_stderr = 0.0;
    double noise_field_mean = 0.0;
    HyperparameterFit fit;
    double imse_T0 = 0.0;
    double emse_T0 = 0.0;
    /// Variance left in the test values, sigma_bar^2 / test_replicates.
    double test_noise_floor = 0.0;
    BudgetForecast forecast;
    double target = 0.0;
    /// EMSE (averaged over realizations) and model IMSE for uniform s = 1..max_s.
    std::vector<double> emse_by_s;
    std::vector<double> imse_by_s;
    /// Smallest s whose averaged EMSE reaches the target; 0 when none does.
    long empirical_s = 0;
    long empirical_T = 0;
    AllocationPlan plan;
    double mse_uniform = 0.0;
    double mse_optimal = 0.0;
    double maxse_uniform = 0.0;
    double maxse_optimal = 0.0;
    double allocation_noise_spearman = 0.0;
};

namespace detail {
inline std::uint64_t case_stream(std::uint64_t seed, std::uint64_t role) {
    return splitmix64(seed ^ splitmix64(role * 0x9e3779b97f4a7c15ULL + 17));
}
} // namespace detail

/// End-to-end replication-planning workflow on the synthetic simulator:
/// noise estimation, likelihood fit on single runs, IMSE forecast and
/// budget, empirical budget check, and optimal vs uniform allocation.
inline CaseStudyReport run_case_study(const CaseStudyConfig& cfg) {
    if (cfg.n < 2 || cfg.grid < 2 || cfg.test_replicates < 1 || cfg.noise_replicates < 2 || cfg.realizations < 1 ||
        cfg.max_s < 1) {
        throw InvalidInput("casestudy: n, grid, test_replicates, noise_replicates, realizations and max_s "
                           "are out of range");
    }
    CaseStudyReport rep;
    SimulatorConfig sim_cfg = cfg.simulator;
    sim_cfg.seed = detail::case_stream(cfg.seed, 1);
    const SyntheticSimulator sim(sim_cfg);
    const Measure mu = Measure::unit_cube(2);
    const auto n = cfg.n;

    auto design_rng = make_stream(cfg.seed, 2);
    rep.design = latin_hypercube(n, mu.box(), design_rng);
    const Design design(rep.design, mu);
    rep.sigma_eps2_true = sim.noise_variances(rep.design);

    // Training pools: realization r draws from its own seed; realization 0 is the observed data.
    auto pool_seed = [&](int r) { return detail::case_stream(cfg.seed, 100 + static_cast<std::uint64_t>(r)); };

    const std::vector<long> pilot(static_cast<std::size_t>(n), cfg.noise_replicates);
    const ObservationSet pilot_obs = sample_observations(sim, rep.design, pilot, pool_seed(0));
    rep.noise = estimate_noise(pilot_obs);
    rep.noise_mean_stderr = std::sqrt((rep.noise.per_point.array() - rep.noise.mean).square().sum() /
                                      static_cast<double>(n - 1) / static_cast<double>(n));
    rep.noise_field_mean = cfg.simulator.noise_level;
    const double sbar = rep.noise.mean;

    // z holds the single runs (s = 1); the likelihood sees the pilot means,
    // whose smaller noise is what makes the regularity identifiable.
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z[i] = pilot_obs.replicates[static_cast<std::size_t>(i)][0];
    }
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = detail::case_stream(cfg.seed, 3);
    fit_cfg.threads = cfg.threads;
    rep.fit = fit_hyperparameters(rep.design, pilot_obs.values, sbar / cfg.noise_replicates, fit_cfg);
    const KernelSpec kernel_spec = rep.fit.params.kernel();
    const Kernel kernel(kernel_spec);
    const double m = rep.fit.mean;

    const Quadrature grid = trapezoid_box({0.0, 0.0}, {1.0, 1.0}, cfg.grid);
    const HeteroscedasticImse imse(kernel_spec, design, grid);
    rep.imse_T0 = imse.with_noise(Eigen::VectorXd::Constant(n, sbar));

    // Test values: means of test_replicates runs at every grid node.
    const Points& test_pts = grid.nodes;
    const std::vector<long> test_counts(static_cast<std::size_t>(test_pts.rows()), cfg.test_replicates);
    const auto test_reps = sim.replicates(test_pts, test_counts, detail::case_stream(cfg.seed, 4));
    Eigen::VectorXd test_values(test_pts.rows());
    for (Eigen::Index i = 0; i < test_pts.rows(); ++i) {
        const auto& r = test_reps[static_cast<std::size_t>(i)];
        test_values[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    }
    rep.test_noise_floor = sbar / cfg.test_replicates;
    // Reuses the covariances between grid nodes and design points.
    const Eigen::MatrixXd& cross = imse.cross().cross;
    auto prediction_errors = [&](const Eigen::VectorXd& values, const Eigen::VectorXd& noise) {
        const Predictor p(kernel, design, noise, values, m, &imse.gram());
        return Eigen::VectorXd(p.mean_from_cross(cross) - test_values);
    };
    rep.emse_T0 = prediction_errors(z, Eigen::VectorXd::Constant(n, sbar)).squaredNorm() /
                  static_cast<double>(test_pts.rows());

    DecayInputs decay;
    decay.imse_T0 = rep.imse_T0;
    decay.T0 = static_cast<double>(n);
    decay.sigma_eps2_bar = sbar;
    decay.rate = rate_law(KernelFamily::matern_tensor, {rep.fit.params.nu, 0.5, 2});
    rep.target = cfg.target_ratio * rep.imse_T0;
    rep.forecast = forecast(decay, rep.target, n);

    // Empirical budget with uniform allocations, common replicate pools across s.
    const long max_s = std::max<long>(cfg.max_s, 1);
    std::vector<std::vector<std::vector<double>>> pools(static_cast<std::size_t>(cfg.realizations));
    const long needed_alloc = cfg.allocation_budget > 0 ? cfg.allocation_budget : rep.forecast.solved_T;
    const long pool_depth = std::max(max_s, needed_alloc);
    parallel_for(pools.size(), cfg.threads, [&](std::size_t r) {
        pools[r] = sim.replicates(rep.design, std::vector<long>(static_cast<std::size_t>(n), pool_depth),
                                  pool_seed(static_cast<int>(r)));
    });
    rep.emse_by_s.assign(static_cast<std::size_t>(max_s), 0.0);
    rep.imse_by_s.assign(static_cast<std::size_t>(max_s), 0.0);
    parallel_for(static_cast<std::size_t>(max_s), cfg.threads, [&](std::size_t k) {
        const long s = static_cast<long>(k) + 1;
        const Eigen::VectorXd noise = Eigen::VectorXd::Constant(n, sbar / static_cast<double>(s));
        const std::vector<long> counts(static_cast<std::size_t>(n), s);
        double acc = 0.0;
        for (const auto& pool : pools) {
            acc += prediction_errors(prefix_means(pool, counts), noise).squaredNorm() /
                   static_cast<double>(test_pts.rows());
        }
        rep.emse_by_s[k] = acc / static_cast<double>(cfg.realizations);
        rep.imse_by_s[k] = imse.with_noise(noise);
    });
    for (long s = 1; s <= max_s; ++s) {
        if (rep.emse_by_s[static_cast<std::size_t>(s - 1)] <= rep.target) {
            rep.empirical_s = s;
            break;
        }
    }
    rep.empirical_T = rep.empirical_s * n;

    // Allocation of the forecast budget under the estimated noise variances.
    rep.plan = plan_allocation(imse, rep.noise.per_point, needed_alloc);
    const std::vector<long> uniform = uniform_allocation(n, needed_alloc);
    Eigen::VectorXd s_opt(n);
    Eigen::VectorXd s_uni(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s_opt[i] = static_cast<double>(rep.plan.s_int[static_cast<std::size_t>(i)]);
        s_uni[i] = static_cast<double>(uniform[static_cast<std::size_t>(i)]);
    }
    std::vector<double> alloc(rep.plan.s_int.begin(), rep.plan.s_int.end());
    std::vector<double> field(rep.sigma_eps2_true.data(), rep.sigma_eps2_true.data() + n);
    rep.allocation_noise_spearman = spearman(alloc, field);
    for (const auto& pool : pools) {
        const Eigen::VectorXd e_opt =
            prediction_errors(prefix_means(pool, rep.plan.s_int), rep.noise.per_point.cwiseQuotient(s_opt));
        const Eigen::VectorXd e_uni =
            prediction_errors(prefix_means(pool, uniform), rep.noise.per_point.cwiseQuotient(s_uni));
        rep.mse_optimal += e_opt.squaredNorm() / static_cast<double>(e_opt.size());
        rep.mse_uniform += e_uni.squaredNorm() / static_cast<double>(e_uni.size());
        rep.maxse_optimal += e_opt.array().square().maxCoeff();
        rep.maxse_uniform += e_uni.array().square().maxCoeff();
    }
    const double r = static_cast<double>(cfg.realizations);
    rep.mse_optimal /= r;
    rep.mse_uniform /= r;
    rep.maxse_optimal /= r;
    rep.maxse_uniform /= r;
    return rep;
}

} // namespace gplc
