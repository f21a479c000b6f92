#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/kernels.hpp"
#include "gplc/quadrature.hpp"

namespace gplc {

/// c(x) = integral of k(x', x)^2 d eta(x'), by quadrature.
inline double local_imse_weight(const Kernel& kernel, PointRef x, const Quadrature& eta) {
    eta.validate_probability();
    kernel.check_point(x);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < eta.size(); ++j) {
        const double k = kernel.eval(eta.nodes.row(j).data(), x.data());
        acc += eta.weights[j] * k * k;
    }
    return acc;
}

inline double local_imse_weight(const KernelSpec& spec, PointRef x, const Quadrature& eta) {
    return local_imse_weight(Kernel(spec), x, eta);
}

/// Continuous optimum of the diagonal-K allocation problem.
struct RealAllocation {
    Eigen::VectorXd s;
    /// Number of points pinned at one replication (0..n).
    Eigen::Index i_star = 0;
    /// Points sorted by (a + sigma^2) / sqrt(c sigma^2), nonincreasing; ties by index.
    std::vector<Eigen::Index> ordering;
};

/// Minimizes sum_i -c_i s_i / (a_i s_i + sigma2_i) subject to s_i >= 1 and
/// sum s_i = T, for prior variances a, noise variances sigma2 and local
/// weights c.
inline RealAllocation optimal_real_allocation(const Eigen::VectorXd& a, const Eigen::VectorXd& sigma2,
                                              const Eigen::VectorXd& c, double budget) {
    const Eigen::Index n = a.size();
    if (n == 0 || sigma2.size() != n || c.size() != n) {
        throw DimensionError("allocation: a, sigma2 and c must be nonempty with equal lengths");
    }
    if (!(budget >= static_cast<double>(n))) {
        throw InfeasibleBudget("allocation: budget T = " + std::to_string(budget) + " is below the number of points " +
                               std::to_string(n) + "; a solution exists only for T >= n");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(sigma2[i] > 0.0) || !std::isfinite(sigma2[i])) {
            throw DomainError("allocation: noise variance at point " + std::to_string(i) + " must be > 0");
        }
        if (!(a[i] > 0.0) || !std::isfinite(a[i])) {
            throw DomainError("allocation: prior variance k(x,x) at point " + std::to_string(i) + " must be > 0");
        }
        if (!(c[i] >= 0.0) || !std::isfinite(c[i])) {
            throw DomainError("allocation: local weight c at point " + std::to_string(i) + " must be >= 0");
        }
    }

    Eigen::VectorXd root(n);
    Eigen::VectorXd ratio(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        root[i] = std::sqrt(c[i] * sigma2[i]);
        ratio[i] = root[i] > 0.0 ? (a[i] + sigma2[i]) / root[i] : std::numeric_limits<double>::infinity();
    }
    RealAllocation out;
    out.ordering.resize(static_cast<std::size_t>(n));
    std::iota(out.ordering.begin(), out.ordering.end(), Eigen::Index{0});
    std::stable_sort(out.ordering.begin(), out.ordering.end(),
                     [&](Eigen::Index l, Eigen::Index r) { return ratio[l] > ratio[r]; });

    out.s = Eigen::VectorXd::Ones(n);
    if (budget == static_cast<double>(n)) {
        out.i_star = n;
        return out;
    }

    // Suffix sums over the sorted order: noise_sum[i] = sum_{j >= i} sigma2/a,
    // root_sum[i] = sum_{j >= i} sqrt(c sigma2)/a (0-based positions).
    std::vector<double> noise_sum(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> root_sum(static_cast<std::size_t>(n) + 1, 0.0);
    for (Eigen::Index pos = n - 1; pos >= 0; --pos) {
        const Eigen::Index i = out.ordering[static_cast<std::size_t>(pos)];
        noise_sum[static_cast<std::size_t>(pos)] = noise_sum[static_cast<std::size_t>(pos) + 1] + sigma2[i] / a[i];
        root_sum[static_cast<std::size_t>(pos)] = root_sum[static_cast<std::size_t>(pos) + 1] + root[i] / a[i];
    }

    // i* = largest 1-based rank i whose ratio reaches the threshold built from
    // the points ranked after it; for i = n the threshold is infinite when T > n.
    Eigen::Index i_star = 0;
    for (Eigen::Index rank = 1; rank < n; ++rank) {
        const Eigen::Index i = out.ordering[static_cast<std::size_t>(rank - 1)];
        const double denom = root_sum[static_cast<std::size_t>(rank)];
        if (!(denom > 0.0)) {
            continue;
        }
        const double threshold = (budget - static_cast<double>(rank) + noise_sum[static_cast<std::size_t>(rank)]) / denom;
        if (ratio[i] >= threshold) {
            i_star = rank;
        }
    }
    const double free_root = root_sum[static_cast<std::size_t>(i_star)];
    if (!(free_root > 0.0)) {
        throw DomainError("allocation: every free point has zero local weight c");
    }
    const double level = (budget - static_cast<double>(i_star) + noise_sum[static_cast<std::size_t>(i_star)]) / free_root;
    for (Eigen::Index pos = i_star; pos < n; ++pos) {
        const Eigen::Index i = out.ordering[static_cast<std::size_t>(pos)];
        out.s[i] = (root[i] * level - sigma2[i]) / a[i];
    }
    out.i_star = i_star;
    return out;
}

/// Objective of the diagonal-K problem up to its s-independent constant.
inline double diagonal_allocation_objective(const Eigen::VectorXd& a, const Eigen::VectorXd& sigma2,
                                            const Eigen::VectorXd& c, const Eigen::VectorXd& s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        acc -= c[i] * s[i] / (a[i] * s[i] + sigma2[i]);
    }
    return acc;
}

struct RoundedAllocation {
    std::vector<long> s;
    /// Indices that received the +1, in the order they received it.
    std::vector<Eigen::Index> increment_order;
};

/// Floors every entry, then adds one to entries in descending order of their
/// fractional part (ties by index) until the total is T.
inline RoundedAllocation round_allocation(const Eigen::VectorXd& s_real, long budget) {
    const Eigen::Index n = s_real.size();
    if (n == 0) {
        throw InvalidInput("round_allocation: empty allocation");
    }
    const double total = s_real.sum();
    if (std::abs(total - static_cast<double>(budget)) > 1e-6 * std::max(1.0, static_cast<double>(budget))) {
        throw InvalidInput("round_allocation: allocation sums to " + std::to_string(total) + ", not T = " +
                           std::to_string(budget));
    }
    RoundedAllocation out;
    out.s.resize(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    long floors = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = s_real[i];
        // Snap values a few ulps away from an integer.
        const double nearest = std::round(v);
        if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, std::abs(v))) {
            v = nearest;
        }
        if (v < 1.0) {
            throw InvalidInput("round_allocation: entry " + std::to_string(i) + " is below 1");
        }
        const double fl = std::floor(v);
        out.s[static_cast<std::size_t>(i)] = static_cast<long>(fl);
        frac[static_cast<std::size_t>(i)] = v - fl;
        floors += static_cast<long>(fl);
    }
    const long extra = budget - floors;
    if (extra < 0 || extra > n) {
        throw InvalidInput("round_allocation: floors are inconsistent with T");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
        return frac[static_cast<std::size_t>(l)] > frac[static_cast<std::size_t>(r)];
    });
    for (long j = 0; j < extra; ++j) {
        const Eigen::Index i = order[static_cast<std::size_t>(j)];
        ++out.s[static_cast<std::size_t>(i)];
        out.increment_order.push_back(i);
    }
    return out;
}

/// Integer allocation spreading T as evenly as possible (remainder to the lowest indices).
inline std::vector<long> uniform_allocation(Eigen::Index n, long budget) {
    if (n < 1 || budget < n) {
        throw InfeasibleBudget("uniform_allocation: budget T = " + std::to_string(budget) +
                               " is below the number of points " + std::to_string(n));
    }
    std::vector<long> s(static_cast<std::size_t>(n), budget / static_cast<long>(n));
    for (long j = 0; j < budget % static_cast<long>(n); ++j) {
        ++s[static_cast<std::size_t>(j)];
    }
    return s;
}

/// IMSE against eta for a fixed design under varying noise diagonals; the
/// Gram matrix and the node/design covariances are computed once.
class HeteroscedasticImse {
public:
    HeteroscedasticImse(const KernelSpec& spec, Design design, Quadrature eta)
        : kernel_(spec), design_(std::move(design)), eta_(std::move(eta)) {
        eta_.validate_probability();
        if (eta_.dimension() != kernel_.dimension()) {
            throw DimensionError("heteroscedastic_imse: quadrature dimension does not match the kernel");
        }
        gram_ = gram_matrix(kernel_, design_.points);
        cache_ = CrossCovariance::compute(kernel_, eta_.nodes, design_.points);
    }

    [[nodiscard]] const Kernel& kernel() const { return kernel_; }
    [[nodiscard]] const Design& design() const { return design_; }
    [[nodiscard]] const Quadrature& eta() const { return eta_; }
    [[nodiscard]] const Eigen::MatrixXd& gram() const { return gram_; }
    [[nodiscard]] const CrossCovariance& cross() const { return cache_; }

    /// IMSE with Delta = diag(noise).
    [[nodiscard]] double with_noise(const Eigen::VectorXd& noise) const {
        const Predictor p(kernel_, design_, noise, Eigen::VectorXd::Zero(design_.size()), 0.0, &gram_);
        return integrated_mse(p, eta_, &cache_);
    }

    /// IMSE with Delta = diag(sigma_eps2 / s).
    [[nodiscard]] double operator()(const Eigen::VectorXd& sigma_eps2, const Eigen::VectorXd& s) const {
        check(sigma_eps2, s);
        return with_noise(sigma_eps2.cwiseQuotient(s));
    }

    [[nodiscard]] double operator()(const Eigen::VectorXd& sigma_eps2, const std::vector<long>& s) const {
        Eigen::VectorXd sv(static_cast<Eigen::Index>(s.size()));
        for (std::size_t i = 0; i < s.size(); ++i) {
            sv[static_cast<Eigen::Index>(i)] = static_cast<double>(s[i]);
        }
        return (*this)(sigma_eps2, sv);
    }

private:
    void check(const Eigen::VectorXd& sigma_eps2, const Eigen::VectorXd& s) const {
        if (sigma_eps2.size() != design_.size() || s.size() != design_.size()) {
            throw DimensionError("heteroscedastic_imse: noise and allocation must have one entry per design point");
        }
        if ((s.array() < 1.0).any()) {
            throw InvalidInput("heteroscedastic_imse: replication counts must be >= 1");
        }
        if ((sigma_eps2.array() < 0.0).any()) {
            throw InvalidInput("heteroscedastic_imse: noise variances must be >= 0");
        }
    }

    Kernel kernel_;
    Design design_;
    Quadrature eta_;
    Eigen::MatrixXd gram_;
    CrossCovariance cache_;
};

inline double heteroscedastic_imse(const KernelSpec& spec, const Design& design, const Eigen::VectorXd& sigma_eps2,
                                   const Eigen::VectorXd& s, const Quadrature& eta) {
    return HeteroscedasticImse(spec, design, eta)(sigma_eps2, s);
}

struct AllocationPlan {
    Eigen::VectorXd s_real;
    std::vector<long> s_int;
    Eigen::Index i_star = 0;
    long budget = 0;
    /// IMSE of the integer allocation.
    double achieved_imse = 0.0;
    /// IMSE of the continuous allocation.
    double real_imse = 0.0;
    /// IMSE of the uniform integer allocation with the same budget.
    double uniform_imse = 0.0;
    std::vector<Eigen::Index> ordering;
    std::vector<Eigen::Index> increment_order;
    /// Set when K has nonzero off-diagonal entries, where the formulas are a heuristic.
    bool quasi_optimal = false;
};

/// Optimal allocation for a design with a (possibly non-diagonal) kernel,
/// followed by integer rounding and IMSE evaluation against eta.
inline AllocationPlan plan_allocation(const HeteroscedasticImse& imse, const Eigen::VectorXd& sigma_eps2, long budget) {
    const Eigen::Index n = imse.design().size();
    if (sigma_eps2.size() != n) {
        throw DimensionError("allocation: " + std::to_string(sigma_eps2.size()) + " noise variances for " +
                             std::to_string(n) + " points");
    }
    Eigen::VectorXd a = imse.gram().diagonal();
    Eigen::VectorXd c(n);
    // c(x_i) = sum_j w_j k(q_j, x_i)^2 from the cached node covariances.
    c = imse.cross().cross.array().square().matrix().transpose() * imse.eta().weights;
    const RealAllocation real = optimal_real_allocation(a, sigma_eps2, c, static_cast<double>(budget));
    AllocationPlan plan;
    plan.s_real = real.s;
    plan.i_star = real.i_star;
    plan.ordering = real.ordering;
    plan.budget = budget;
    const RoundedAllocation rounded = round_allocation(real.s, budget);
    plan.s_int = rounded.s;
    plan.increment_order = rounded.increment_order;
    Eigen::MatrixXd off = imse.gram();
    off.diagonal().setZero();
    plan.quasi_optimal = off.cwiseAbs().maxCoeff() > 0.0;
    plan.real_imse = imse(sigma_eps2, plan.s_real);
    plan.achieved_imse = imse(sigma_eps2, plan.s_int);
    plan.uniform_imse = imse(sigma_eps2, uniform_allocation(n, budget));
    return plan;
}

inline AllocationPlan plan_allocation(const KernelSpec& spec, const Design& design, const Eigen::VectorXd& sigma_eps2,
                                      long budget, const Quadrature& eta) {
    return plan_allocation(HeteroscedasticImse(spec, design, eta), sigma_eps2, budget);
}

/// Continuous optimal allocation only (s_real, i_star, ordering, quasi_optimal).
inline AllocationPlan optimal_real_allocation(const KernelSpec& spec, const Design& design,
                                              const Eigen::VectorXd& sigma_eps2, long budget, const Quadrature& eta) {
    const Kernel kernel(spec);
    const Eigen::Index n = design.size();
    if (sigma_eps2.size() != n) {
        throw DimensionError("allocation: " + std::to_string(sigma_eps2.size()) + " noise variances for " +
                             std::to_string(n) + " points");
    }
    const Eigen::MatrixXd gram = gram_matrix(kernel, design.points);
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c[i] = local_imse_weight(kernel, design.points.row(i).transpose(), eta);
    }
    const RealAllocation real = optimal_real_allocation(gram.diagonal(), sigma_eps2, c, static_cast<double>(budget));
    AllocationPlan plan;
    plan.s_real = real.s;
    plan.i_star = real.i_star;
    plan.ordering = real.ordering;
    plan.budget = budget;
    Eigen::MatrixXd off = gram;
    off.diagonal().setZero();
    plan.quasi_optimal = off.cwiseAbs().maxCoeff() > 0.0;
    return plan;
}

} // namespace gplc
