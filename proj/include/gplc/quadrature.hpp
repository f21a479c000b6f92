#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gplc/errors.hpp"

namespace gplc {

/// n x d matrix of input locations, one point per row. Row-major so that a
/// row maps onto a contiguous vector without copying.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

/// Nodes and weights of a discrete probability measure (or of a quadrature
/// rule approximating one).
struct Quadrature {
    Points nodes;
    Eigen::VectorXd weights;

    [[nodiscard]] Eigen::Index size() const { return nodes.rows(); }
    [[nodiscard]] Eigen::Index dimension() const { return nodes.cols(); }

    /// Throws unless weights are nonnegative, sized like the nodes and sum to 1.
    void validate_probability(double tol = 1e-10) const {
        if (nodes.rows() == 0) {
            throw InvalidInput("quadrature: empty node set");
        }
        if (weights.size() != nodes.rows()) {
            throw DimensionError("quadrature: " + std::to_string(weights.size()) + " weights for " +
                                 std::to_string(nodes.rows()) + " nodes");
        }
        if ((weights.array() < 0.0).any() || !weights.allFinite()) {
            throw InvalidInput("quadrature: weights must be finite and nonnegative");
        }
        if (std::abs(weights.sum() - 1.0) > tol) {
            throw InvalidInput("quadrature: weights sum to " + std::to_string(weights.sum()) + ", expected 1");
        }
    }
};

/// Composite trapezoid rule on [lower, upper] with `count` equispaced nodes,
/// normalized to a probability measure.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> trapezoid_1d(double lower, double upper, int count) {
    if (count < 2) {
        throw InvalidInput("trapezoid rule needs at least 2 nodes");
    }
    if (!(upper > lower)) {
        throw InvalidInput("trapezoid rule needs upper > lower");
    }
    Eigen::VectorXd x(count);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(count, 1.0 / (count - 1));
    for (int i = 0; i < count; ++i) {
        x[i] = lower + (upper - lower) * static_cast<double>(i) / (count - 1);
    }
    w[0] *= 0.5;
    w[count - 1] *= 0.5;
    return {x, w};
}

/// Tensorized trapezoid rule on the box prod_k [lower_k, upper_k].
inline Quadrature trapezoid_box(const std::vector<double>& lower, const std::vector<double>& upper,
                                const std::vector<int>& counts) {
    const std::size_t d = lower.size();
    if (d == 0 || upper.size() != d || counts.size() != d) {
        throw DimensionError("trapezoid_box: bounds and counts must share a nonzero dimension");
    }
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> axes;
    Eigen::Index total = 1;
    for (std::size_t k = 0; k < d; ++k) {
        axes.push_back(trapezoid_1d(lower[k], upper[k], counts[k]));
        total *= counts[k];
    }
    Quadrature q;
    q.nodes.resize(total, static_cast<Eigen::Index>(d));
    q.weights.resize(total);
    for (Eigen::Index flat = 0; flat < total; ++flat) {
        Eigen::Index rest = flat;
        double w = 1.0;
        // Last axis varies fastest.
        for (std::size_t k = d; k-- > 0;) {
            const Eigen::Index i = rest % counts[k];
            rest /= counts[k];
            q.nodes(flat, static_cast<Eigen::Index>(k)) = axes[k].first[i];
            w *= axes[k].second[i];
        }
        q.weights[flat] = w;
    }
    return q;
}

inline Quadrature trapezoid_box(const std::vector<double>& lower, const std::vector<double>& upper, int per_dim) {
    return trapezoid_box(lower, upper, std::vector<int>(lower.size(), per_dim));
}

/// Uniform probability measure on an axis-aligned box.
struct UniformBox {
    std::vector<double> lower;
    std::vector<double> upper;

    static UniformBox unit(int d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }
};

/// Design measure: uniform on a box or an explicit discrete measure.
class Measure {
public:
    Measure() : Measure(UniformBox::unit(1)) {}
    explicit Measure(UniformBox box) : repr_(std::move(box)) {
        const auto& b = std::get<UniformBox>(repr_);
        if (b.lower.empty() || b.lower.size() != b.upper.size()) {
            throw DimensionError("uniform box: bounds must share a nonzero dimension");
        }
        for (std::size_t k = 0; k < b.lower.size(); ++k) {
            if (!(b.upper[k] > b.lower[k])) {
                throw InvalidInput("uniform box: upper bound must exceed lower bound");
            }
        }
    }
    explicit Measure(Quadrature q) : repr_(std::move(q)) { std::get<Quadrature>(repr_).validate_probability(); }

    static Measure unit_cube(int d) { return Measure(UniformBox::unit(d)); }

    [[nodiscard]] bool is_uniform_box() const { return std::holds_alternative<UniformBox>(repr_); }
    [[nodiscard]] const UniformBox& box() const { return std::get<UniformBox>(repr_); }

    [[nodiscard]] int dimension() const {
        if (is_uniform_box()) {
            return static_cast<int>(box().lower.size());
        }
        return static_cast<int>(std::get<Quadrature>(repr_).dimension());
    }

    /// Support check. For a discrete measure the bounding box of its nodes is used.
    [[nodiscard]] bool contains(PointRef x, double slack = 1e-12) const {
        if (x.size() != dimension()) {
            return false;
        }
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            double lo = 0.0;
            double hi = 0.0;
            if (is_uniform_box()) {
                lo = box().lower[k];
                hi = box().upper[k];
            } else {
                const auto& q = std::get<Quadrature>(repr_);
                lo = q.nodes.col(k).minCoeff();
                hi = q.nodes.col(k).maxCoeff();
            }
            const double pad = slack * std::max(1.0, hi - lo);
            if (x[k] < lo - pad || x[k] > hi + pad) {
                return false;
            }
        }
        return true;
    }

    /// Quadrature rule for integrals against this measure: tensorized trapezoid
    /// for a box (`per_dim` nodes per axis), the measure itself otherwise.
    [[nodiscard]] Quadrature quadrature(int per_dim) const {
        if (is_uniform_box()) {
            return trapezoid_box(box().lower, box().upper, per_dim);
        }
        return std::get<Quadrature>(repr_);
    }

    /// i.i.d. draws from the measure.
    template <class Rng>
    [[nodiscard]] Points sample(Eigen::Index n, Rng& rng) const {
        Points out(n, dimension());
        if (is_uniform_box()) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int k = 0; k < dimension(); ++k) {
                    out(i, k) = box().lower[k] + (box().upper[k] - box().lower[k]) * u(rng);
                }
            }
        } else {
            const auto& q = std::get<Quadrature>(repr_);
            std::discrete_distribution<Eigen::Index> pick(q.weights.data(), q.weights.data() + q.weights.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                out.row(i) = q.nodes.row(pick(rng));
            }
        }
        return out;
    }

private:
    std::variant<UniformBox, Quadrature> repr_;
};

} // namespace gplc
