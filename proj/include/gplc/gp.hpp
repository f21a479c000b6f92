#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/kernels.hpp"
#include "gplc/quadrature.hpp"

namespace gplc {

/// Input locations together with the measure they were drawn from.
struct Design {
    Points points;
    Measure measure;

    Design() = default;
    Design(Points pts, Measure mu) : points(std::move(pts)), measure(std::move(mu)) { validate(); }

    [[nodiscard]] Eigen::Index size() const { return points.rows(); }
    [[nodiscard]] int dimension() const { return static_cast<int>(points.cols()); }

    void validate() const {
        if (points.rows() == 0) {
            throw InvalidInput("design: needs at least one point");
        }
        if (points.cols() != measure.dimension()) {
            throw DimensionError("design: points have dimension " + std::to_string(points.cols()) +
                                 " but the measure has dimension " + std::to_string(measure.dimension()));
        }
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            if (!measure.contains(points.row(i).transpose())) {
                throw InvalidInput("design: point " + std::to_string(i) + " lies outside the measure's support");
            }
        }
    }
};

/// Observations at the design points.
///
/// `values` are the per-point means z_i and `noise` the variance of each mean
/// (Delta_ii = sigma_eps^2(x_i) / s_i). Replicates and per-replicate noise
/// variances are kept when known.
struct ObservationSet {
    Eigen::VectorXd values;
    Eigen::VectorXd noise;
    std::vector<int> counts;
    std::vector<std::vector<double>> replicates;
    Eigen::VectorXd sigma_eps2;

    [[nodiscard]] Eigen::Index size() const { return values.size(); }
    [[nodiscard]] bool has_replicates() const { return !replicates.empty(); }

    /// Precomputed means with the variance of each mean; counts default to 1.
    static ObservationSet from_means(Eigen::VectorXd values, Eigen::VectorXd noise, std::vector<int> counts = {}) {
        ObservationSet o;
        if (counts.empty()) {
            counts.assign(static_cast<std::size_t>(values.size()), 1);
        }
        o.values = std::move(values);
        o.noise = std::move(noise);
        o.counts = std::move(counts);
        o.validate();
        return o;
    }

    /// Homoscedastic convenience: every mean carries the same noise variance.
    static ObservationSet from_means(Eigen::VectorXd values, double noise) {
        const Eigen::Index n = values.size();
        return from_means(std::move(values), Eigen::VectorXd::Constant(n, noise));
    }

    /// Raw replicates. The noise of each mean is sigma_eps2_i / s_i, where
    /// sigma_eps2 is supplied or else the unbiased sample variance (needs s_i >= 2).
    static ObservationSet from_replicates(std::vector<std::vector<double>> reps,
                                          std::optional<Eigen::VectorXd> sigma_eps2 = std::nullopt) {
        ObservationSet o;
        const auto n = static_cast<Eigen::Index>(reps.size());
        o.values.resize(n);
        o.noise.resize(n);
        o.counts.resize(reps.size());
        o.sigma_eps2.resize(n);
        if (sigma_eps2 && sigma_eps2->size() != n) {
            throw DimensionError("observations: sigma_eps2 has " + std::to_string(sigma_eps2->size()) +
                                 " entries for " + std::to_string(n) + " points");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = reps[static_cast<std::size_t>(i)];
            if (r.empty()) {
                throw InvalidInput("observations: point " + std::to_string(i) + " has no replicates");
            }
            const double s = static_cast<double>(r.size());
            double mean = 0.0;
            for (double v : r) {
                mean += v;
            }
            mean /= s;
            double var = 0.0;
            if (sigma_eps2) {
                var = (*sigma_eps2)[i];
            } else {
                if (r.size() < 2) {
                    throw InvalidInput("observations: point " + std::to_string(i) +
                                       " has a single replicate and no external noise variance");
                }
                for (double v : r) {
                    var += (v - mean) * (v - mean);
                }
                var /= s - 1.0;
            }
            o.values[i] = mean;
            o.sigma_eps2[i] = var;
            o.noise[i] = var / s;
            o.counts[static_cast<std::size_t>(i)] = static_cast<int>(r.size());
        }
        o.replicates = std::move(reps);
        o.validate();
        return o;
    }

    void validate() const {
        if (noise.size() != values.size() || counts.size() != static_cast<std::size_t>(values.size())) {
            throw DimensionError("observations: values, noise and counts must have equal lengths");
        }
        if (!values.allFinite()) {
            throw InvalidInput("observations: non-finite value");
        }
        if ((noise.array() < 0.0).any() || !noise.allFinite()) {
            throw InvalidInput("observations: noise variances must be finite and >= 0");
        }
        for (int s : counts) {
            if (s < 1) {
                throw InvalidInput("observations: replication counts must be >= 1");
            }
        }
    }
};

namespace detail {

// Order (1-based) of the first leading minor that is not numerically positive.
inline std::size_t first_bad_leading_minor(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) {
            return static_cast<std::size_t>(j + 1);
        }
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return static_cast<std::size_t>(n);
}

} // namespace detail

/// Cholesky factor of K + diag(noise), with the jitter policy: when the
/// smallest noise entry is 0, 1e-10 * trace(K) / n is added to the diagonal;
/// on failure one retry at 1e-8 * trace(K) / n, then SingularCovariance.
struct CovarianceFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;

    static CovarianceFactor compute(const Eigen::MatrixXd& gram, const Eigen::VectorXd& noise) {
        const Eigen::Index n = gram.rows();
        const double scale = gram.trace() / static_cast<double>(n);
        Eigen::MatrixXd a = gram;
        a.diagonal() += noise;
        CovarianceFactor f;
        f.jitter = noise.minCoeff() == 0.0 ? 1e-10 * scale : 0.0;
        for (int attempt = 0; attempt < 2; ++attempt) {
            Eigen::MatrixXd trial = a;
            trial.diagonal().array() += f.jitter;
            f.llt.compute(trial);
            if (f.llt.info() == Eigen::Success) {
                return f;
            }
            f.jitter = 1e-8 * scale;
        }
        const std::size_t minor = detail::first_bad_leading_minor(a + f.jitter * Eigen::MatrixXd::Identity(n, n));
        throw SingularCovariance(minor, "covariance K + Delta is not positive definite after jitter " +
                                            std::to_string(f.jitter) + ": leading minor of order " +
                                            std::to_string(minor) + " is not positive");
    }
};

/// Fitted BLUP state; immutable once built.
class Predictor {
public:
    Predictor(Kernel kernel, Design design, Eigen::VectorXd noise, Eigen::VectorXd values, double mean,
              const Eigen::MatrixXd* gram = nullptr)
        : kernel_(std::move(kernel)), design_(std::move(design)), noise_(std::move(noise)), mean_(mean) {
        if (design_.dimension() != kernel_.dimension()) {
            throw DimensionError("predictor: design dimension " + std::to_string(design_.dimension()) +
                                 " does not match kernel dimension " + std::to_string(kernel_.dimension()));
        }
        if (noise_.size() != design_.size() || values.size() != design_.size()) {
            throw DimensionError("predictor: " + std::to_string(values.size()) + " observations for " +
                                 std::to_string(design_.size()) + " design points");
        }
        const Eigen::MatrixXd k = gram ? *gram : gram_matrix(kernel_, design_.points);
        factor_ = CovarianceFactor::compute(k, noise_);
        lower_ = factor_.llt.matrixL();
        const Eigen::VectorXd r0 = (values.array() - mean_).matrix();
        weights_ = factor_.llt.solve(r0);
        if (factor_.jitter > 0.0) {
            // Iterative refinement against the unjittered K + Delta, so that
            // noiseless data are interpolated beyond the jitter level.
            Eigen::MatrixXd a = k;
            a.diagonal() += noise_;
            Eigen::VectorXd res = r0 - a * weights_;
            for (int step = 0; step < 5; ++step) {
                const Eigen::VectorXd next = weights_ + factor_.llt.solve(res);
                Eigen::VectorXd next_res = r0 - a * next;
                if (!(next_res.norm() < 0.5 * res.norm())) {
                    break;
                }
                weights_ = next;
                res = std::move(next_res);
            }
        }
    }

    [[nodiscard]] const Kernel& kernel() const { return kernel_; }
    [[nodiscard]] const Design& design() const { return design_; }
    [[nodiscard]] const Eigen::VectorXd& noise() const { return noise_; }
    [[nodiscard]] double prior_mean() const { return mean_; }
    [[nodiscard]] double jitter() const { return factor_.jitter; }
    /// Lower-triangular L with L L^T = K + Delta (+ jitter I).
    [[nodiscard]] const Eigen::MatrixXd& lower_factor() const { return lower_; }
    /// (K + Delta)^{-1} (z - m).
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

    /// Posterior means for precomputed covariances `cross` (queries x design).
    [[nodiscard]] Eigen::VectorXd mean_from_cross(const Eigen::MatrixXd& cross) const {
        return (cross * weights_).array() + mean_;
    }

    /// Posterior variances for precomputed `cross` (queries x design) and prior variances `prior`.
    [[nodiscard]] Eigen::VectorXd mse_from_cross(const Eigen::MatrixXd& cross, const Eigen::VectorXd& prior) const {
        const Eigen::MatrixXd v = factor_.llt.matrixL().solve(cross.transpose());
        Eigen::VectorXd out = prior - v.colwise().squaredNorm().transpose();
        // Round-off can push tiny values below zero.
        return out.cwiseMax(0.0);
    }

    [[nodiscard]] Eigen::VectorXd mean(const Points& x) const {
        return mean_from_cross(cross_covariance(kernel_, x, design_.points));
    }

    [[nodiscard]] Eigen::VectorXd mse(const Points& x) const {
        return mse_from_cross(cross_covariance(kernel_, x, design_.points), kernel_diagonal(kernel_, x));
    }

private:
    Kernel kernel_;
    Design design_;
    Eigen::VectorXd noise_;
    double mean_ = 0.0;
    CovarianceFactor factor_;
    Eigen::MatrixXd lower_;
    Eigen::VectorXd weights_;
};

/// Fits the BLUP m + k(x)^T (K + Delta)^{-1} (z - m).
inline Predictor fit_blup(const KernelSpec& spec, const Design& design, const ObservationSet& obs, double mean = 0.0) {
    obs.validate();
    return Predictor(Kernel(spec), design, obs.noise, obs.values, mean);
}

namespace detail {
inline Points as_row(PointRef x) {
    Points p(1, x.size());
    p.row(0) = x.transpose();
    return p;
}
} // namespace detail

inline double predict_mean(const Predictor& p, PointRef x) { return p.mean(detail::as_row(x))[0]; }

/// sigma^2(x) = k(x,x) - k(x)^T (K + Delta)^{-1} k(x), clamped at 0.
inline double predict_mse(const Predictor& p, PointRef x) { return p.mse(detail::as_row(x))[0]; }

/// Precomputed covariances between quadrature nodes and design points.
struct CrossCovariance {
    Eigen::MatrixXd cross;
    Eigen::VectorXd prior;

    static CrossCovariance compute(const Kernel& k, const Points& queries, const Points& design) {
        return {cross_covariance(k, queries, design), kernel_diagonal(k, queries)};
    }
};

/// sum_j w_j sigma^2(q_j) for a probability quadrature (q_j, w_j).
inline double integrated_mse(const Predictor& p, const Quadrature& quad, const CrossCovariance* cache = nullptr) {
    if (quad.size() == 0) {
        throw InvalidInput("integrated_mse: empty quadrature");
    }
    quad.validate_probability();
    const Eigen::VectorXd mse = cache ? p.mse_from_cross(cache->cross, cache->prior) : p.mse(quad.nodes);
    return quad.weights.dot(mse);
}

/// Mean squared prediction error on a test set.
inline double empirical_mse(const Predictor& p, const Points& test_points, const Eigen::VectorXd& test_values) {
    if (test_points.rows() != test_values.size()) {
        throw DimensionError("empirical_mse: " + std::to_string(test_points.rows()) + " points but " +
                             std::to_string(test_values.size()) + " values");
    }
    if (test_values.size() == 0) {
        throw InvalidInput("empirical_mse: empty test set");
    }
    return (p.mean(test_points) - test_values).squaredNorm() / static_cast<double>(test_values.size());
}

} // namespace gplc
