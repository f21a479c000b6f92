#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/kernels.hpp"
#include "gplc/quadrature.hpp"
#include "gplc/random.hpp"

namespace gplc {

enum class TruthKind { surface, surface_plus_kl };
enum class NoiseKind { constant, smooth };

inline TruthKind truth_kind_from_string(const std::string& s) {
    if (s == "surface") {
        return TruthKind::surface;
    }
    if (s == "surface_plus_kl") {
        return TruthKind::surface_plus_kl;
    }
    throw InvalidInput("simulator: unknown truth '" + s + "' (expected surface or surface_plus_kl)");
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "constant") {
        return NoiseKind::constant;
    }
    if (s == "smooth") {
        return NoiseKind::smooth;
    }
    throw InvalidInput("simulator: unknown noise field '" + s + "' (expected constant or smooth)");
}

struct SimulatorConfig {
    TruthKind truth = TruthKind::surface_plus_kl;
    NoiseKind noise = NoiseKind::smooth;
    /// Mean of the noise field over [0,1]^2.
    double noise_level = 3.3e-3;
    /// Amplitude and kernel of the random component of the truth.
    double kl_amplitude = 0.32;
    double kl_lengthscale = 1.0;
    /// Nodes per axis of the grid carrying the field's spectrum.
    int kl_grid = 120;
    std::uint64_t seed = 0;
};

/// Stochastic simulator on [0,1]^2: Y(x) = truth(x) + N(0, sigma_eps2(x)).
///
/// The truth is a fixed smooth surface around 0.65, optionally plus a seeded
/// Karhunen-Loeve path of a tensor Matern-3/2 field. The smooth noise field is
/// level (1 + 0.9 sin(pi x1) cos(pi x2)), whose mean over the square is level.
class SyntheticSimulator {
public:
    static constexpr double noise_floor = 1e-30;

    explicit SyntheticSimulator(SimulatorConfig cfg) : cfg_(std::move(cfg)) {
        if (!(cfg_.noise_level >= 0.0)) {
            throw InvalidInput("simulator: noise_level must be >= 0");
        }
        if (cfg_.truth == TruthKind::surface_plus_kl) {
            build_kl();
        }
    }

    [[nodiscard]] const SimulatorConfig& config() const { return cfg_; }
    [[nodiscard]] int dimension() const { return 2; }

    [[nodiscard]] double truth(PointRef x) const {
        check(x);
        const double x1 = x[0];
        const double x2 = x[1];
        double v = 0.65 + 0.05 * std::sin(2.0 * std::numbers::pi * x1) * std::cos(std::numbers::pi * x2) +
                   0.04 * (x1 - x2 * x2);
        if (cfg_.truth == TruthKind::surface_plus_kl) {
            v += cfg_.kl_amplitude * kl_path(x);
        }
        return v;
    }

    [[nodiscard]] double noise_variance(PointRef x) const {
        check(x);
        double v = cfg_.noise_level;
        if (cfg_.noise == NoiseKind::smooth) {
            v *= 1.0 + 0.9 * std::sin(std::numbers::pi * x[0]) * std::cos(std::numbers::pi * x[1]);
        }
        return std::max(v, noise_floor);
    }

    [[nodiscard]] Eigen::VectorXd truth_values(const Points& pts) const {
        Eigen::VectorXd out(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            out[i] = truth(pts.row(i).transpose());
        }
        return out;
    }

    [[nodiscard]] Eigen::VectorXd noise_variances(const Points& pts) const {
        Eigen::VectorXd out(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            out[i] = noise_variance(pts.row(i).transpose());
        }
        return out;
    }

    /// Replicate j of point i is the j-th normal draw of stream (seed, i), so
    /// asking for more replicates extends the earlier ones.
    [[nodiscard]] std::vector<std::vector<double>> replicates(const Points& pts, const std::vector<long>& counts,
                                                              std::uint64_t seed) const {
        if (counts.size() != static_cast<std::size_t>(pts.rows())) {
            throw DimensionError("simulator: one replication count per point is required");
        }
        const Eigen::VectorXd mu = truth_values(pts);
        const Eigen::VectorXd var = noise_variances(pts);
        std::vector<std::vector<double>> out(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] < 1) {
                throw InvalidInput("simulator: replication counts must be >= 1");
            }
            auto rng = make_stream(seed, i);
            std::normal_distribution<double> z(0.0, 1.0);
            const double sd = std::sqrt(var[static_cast<Eigen::Index>(i)]);
            out[i].resize(static_cast<std::size_t>(counts[i]));
            for (auto& v : out[i]) {
                v = mu[static_cast<Eigen::Index>(i)] + sd * z(rng);
            }
        }
        return out;
    }

private:
    void check(PointRef x) const {
        if (x.size() != 2) {
            throw DimensionError("simulator: points must be 2-dimensional");
        }
    }

    // Full Karhunen-Loeve expansion of the tensor Matern-3/2 field: the 1-D
    // Nystrom spectrum on a g-node trapezoid grid, all eigenpairs kept. With the
    // Nystrom extension the path is amplitude * k1(x1)^T B k1(x2), where
    // B = W Phi L^{-1/2} Xi L^{-1/2} Phi^T W.
    void build_kl() {
        if (cfg_.kl_grid < 2 || !(cfg_.kl_lengthscale > 0.0)) {
            throw InvalidInput("simulator: kl_grid must be >= 2 and kl_lengthscale > 0");
        }
        kl_kernel_.emplace(KernelSpec::matern(1.5, {cfg_.kl_lengthscale}));
        const auto [nodes, weights] = trapezoid_1d(0.0, 1.0, cfg_.kl_grid);
        kl_nodes_ = nodes;
        const Eigen::Index g = nodes.size();
        Eigen::MatrixXd k(g, g);
        for (Eigen::Index i = 0; i < g; ++i) {
            for (Eigen::Index j = 0; j < g; ++j) {
                k(i, j) = kl_kernel_->eval(&nodes[i], &nodes[j]);
            }
        }
        const Eigen::VectorXd sqrt_w = weights.cwiseSqrt();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sqrt_w.asDiagonal() * k * sqrt_w.asDiagonal());
        if (solver.info() != Eigen::Success) {
            throw Error("simulator: eigensolver failed while building the random field");
        }
        const double top = solver.eigenvalues().maxCoeff();
        // Columns of W Phi L^{-1/2}, with W Phi = W^{1/2} U; negligible eigenvalues dropped.
        std::vector<Eigen::Index> keep;
        for (Eigen::Index p = g - 1; p >= 0; --p) {
            if (solver.eigenvalues()[p] > 1e-13 * top) {
                keep.push_back(p);
            }
        }
        const auto kept = static_cast<Eigen::Index>(keep.size());
        Eigen::MatrixXd left(g, kept);
        for (Eigen::Index c = 0; c < kept; ++c) {
            const Eigen::Index p = keep[static_cast<std::size_t>(c)];
            left.col(c) = sqrt_w.cwiseProduct(solver.eigenvectors().col(p)) / std::sqrt(solver.eigenvalues()[p]);
        }
        auto rng = make_stream(cfg_.seed, 0x6b6cULL);
        std::normal_distribution<double> z(0.0, 1.0);
        Eigen::MatrixXd xi(kept, kept);
        for (Eigen::Index i = 0; i < kept; ++i) {
            for (Eigen::Index j = 0; j < kept; ++j) {
                xi(i, j) = z(rng);
            }
        }
        kl_coef_ = left * xi * left.transpose();
    }

    [[nodiscard]] double kl_path(PointRef x) const {
        const Eigen::Index g = kl_nodes_.size();
        Eigen::VectorXd a(g);
        Eigen::VectorXd b(g);
        for (Eigen::Index j = 0; j < g; ++j) {
            a[j] = kl_kernel_->eval(x.data(), &kl_nodes_[j]);
            b[j] = kl_kernel_->eval(x.data() + 1, &kl_nodes_[j]);
        }
        return a.dot(kl_coef_ * b);
    }

    SimulatorConfig cfg_;
    std::optional<Kernel> kl_kernel_;
    Eigen::VectorXd kl_nodes_;
    Eigen::MatrixXd kl_coef_;
};

/// Replicated observations at `pts`. The noise of each mean uses the sample
/// variance when every point has at least 2 replicates, else the simulator's
/// noise field.
inline ObservationSet sample_observations(const SyntheticSimulator& sim, const Points& pts,
                                          const std::vector<long>& counts, std::uint64_t seed) {
    auto reps = sim.replicates(pts, counts, seed);
    bool all_replicated = true;
    for (long c : counts) {
        all_replicated = all_replicated && c >= 2;
    }
    if (all_replicated) {
        return ObservationSet::from_replicates(std::move(reps));
    }
    return ObservationSet::from_replicates(std::move(reps), sim.noise_variances(pts));
}

/// Per-point means of the first s replicates of each pool row.
inline Eigen::VectorXd prefix_means(const std::vector<std::vector<double>>& pool, const std::vector<long>& s) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(pool.size()));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (s[i] < 1 || static_cast<std::size_t>(s[i]) > pool[i].size()) {
            throw InvalidInput("prefix_means: replication count outside the pool");
        }
        double acc = 0.0;
        for (long j = 0; j < s[i]; ++j) {
            acc += pool[i][static_cast<std::size_t>(j)];
        }
        out[static_cast<Eigen::Index>(i)] = acc / static_cast<double>(s[i]);
    }
    return out;
}

} // namespace gplc
