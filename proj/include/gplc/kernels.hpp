#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gplc/bessel.hpp"
#include "gplc/errors.hpp"
#include "gplc/quadrature.hpp"

namespace gplc {

enum class KernelFamily { matern1d, matern_tensor, gaussian, fbm, brownian, exponential, triangular, finite_rank };

inline std::string_view to_string(KernelFamily f) {
    switch (f) {
    case KernelFamily::matern1d: return "matern1d";
    case KernelFamily::matern_tensor: return "matern_tensor";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::fbm: return "fbm";
    case KernelFamily::brownian: return "brownian";
    case KernelFamily::exponential: return "exponential";
    case KernelFamily::triangular: return "triangular";
    case KernelFamily::finite_rank: return "finite_rank";
    }
    return "unknown";
}

inline KernelFamily kernel_family_from_string(std::string_view s) {
    for (auto f : {KernelFamily::matern1d, KernelFamily::matern_tensor, KernelFamily::gaussian, KernelFamily::fbm,
                   KernelFamily::brownian, KernelFamily::exponential, KernelFamily::triangular,
                   KernelFamily::finite_rank}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    throw InvalidInput("unknown kernel family '" + std::string(s) + "'");
}

/// Orthonormal bases of L2(uniform [0,1]) used by finite-rank kernels.
enum class BasisKind { cosine, legendre };

inline std::string_view to_string(BasisKind b) { return b == BasisKind::cosine ? "cosine" : "legendre"; }

inline BasisKind basis_kind_from_string(std::string_view s) {
    if (s == "cosine") {
        return BasisKind::cosine;
    }
    if (s == "legendre") {
        return BasisKind::legendre;
    }
    throw InvalidInput("unknown basis '" + std::string(s) + "' (expected cosine or legendre)");
}

/// One term weight * prod_k b_{index[k]}(x_k) of a degenerate kernel.
struct RankTerm {
    double weight = 1.0;
    BasisKind basis = BasisKind::cosine;
    std::vector<int> index{0};
};

/// 1-D basis function b_k on [0,1]: sqrt(2) cos(k pi t) (b_0 = 1) or the
/// normalized shifted Legendre polynomial sqrt(2k+1) P_k(2t - 1).
inline double basis_value(BasisKind kind, int k, double t) {
    if (kind == BasisKind::cosine) {
        return k == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(k * std::numbers::pi * t);
    }
    const double u = 2.0 * t - 1.0;
    double p0 = 1.0;
    double p1 = u;
    if (k == 0) {
        return 1.0;
    }
    for (int j = 1; j < k; ++j) {
        const double p2 = ((2.0 * j + 1.0) * u * p1 - j * p0) / (j + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return std::sqrt(2.0 * k + 1.0) * p1;
}

/// Covariance family tag plus hyperparameters.
///
/// Stationary families are unit-variance correlations scaled by `variance`.
/// The fBm family follows |x|^{2H} + |y|^{2H} - |x-y|^{2H}, which is twice the
/// conventional fBm covariance: for H = 1/2 it equals 2 min(x, y), so do not
/// double `variance` to compensate.
struct KernelSpec {
    KernelFamily family = KernelFamily::matern1d;
    double nu = 2.5;
    std::vector<double> lengthscales{1.0};
    double variance = 1.0;
    double hurst = 0.5;
    std::vector<RankTerm> rank_terms;

    static KernelSpec matern(double nu, std::vector<double> lengthscales, double variance = 1.0) {
        KernelSpec s;
        s.family = lengthscales.size() == 1 ? KernelFamily::matern1d : KernelFamily::matern_tensor;
        s.nu = nu;
        s.lengthscales = std::move(lengthscales);
        s.variance = variance;
        s.validate();
        return s;
    }
    static KernelSpec matern_tensor(double nu, std::vector<double> lengthscales, double variance = 1.0) {
        KernelSpec s = matern(nu, std::move(lengthscales), variance);
        s.family = KernelFamily::matern_tensor;
        return s;
    }
    static KernelSpec gaussian(std::vector<double> lengthscales, double variance = 1.0) {
        KernelSpec s;
        s.family = KernelFamily::gaussian;
        s.lengthscales = std::move(lengthscales);
        s.variance = variance;
        s.validate();
        return s;
    }
    static KernelSpec exponential(std::vector<double> lengthscales, double variance = 1.0) {
        KernelSpec s = gaussian(std::move(lengthscales), variance);
        s.family = KernelFamily::exponential;
        return s;
    }
    static KernelSpec triangular(double lengthscale, double variance = 1.0) {
        KernelSpec s = gaussian({lengthscale}, variance);
        s.family = KernelFamily::triangular;
        return s;
    }
    static KernelSpec fbm(double hurst, double variance = 1.0) {
        KernelSpec s;
        s.family = KernelFamily::fbm;
        s.hurst = hurst;
        s.variance = variance;
        s.validate();
        return s;
    }
    static KernelSpec brownian(double variance = 1.0) {
        KernelSpec s;
        s.family = KernelFamily::brownian;
        s.variance = variance;
        s.validate();
        return s;
    }
    static KernelSpec finite_rank(std::vector<RankTerm> terms, double variance = 1.0) {
        KernelSpec s;
        s.family = KernelFamily::finite_rank;
        s.rank_terms = std::move(terms);
        s.variance = variance;
        s.validate();
        return s;
    }

    [[nodiscard]] bool is_stationary() const {
        switch (family) {
        case KernelFamily::fbm:
        case KernelFamily::brownian:
        case KernelFamily::finite_rank: return false;
        default: return true;
        }
    }

    /// Input dimension d.
    [[nodiscard]] int dimension() const {
        switch (family) {
        case KernelFamily::fbm:
        case KernelFamily::brownian: return 1;
        case KernelFamily::finite_rank:
            return rank_terms.empty() ? 1 : static_cast<int>(rank_terms.front().index.size());
        default: return static_cast<int>(lengthscales.size());
        }
    }

    void validate() const {
        if (!(variance > 0.0) || !std::isfinite(variance)) {
            throw InvalidInput("kernel: variance must be finite and > 0");
        }
        const bool uses_lengthscales = family != KernelFamily::fbm && family != KernelFamily::brownian &&
                                       family != KernelFamily::finite_rank;
        if (uses_lengthscales) {
            if (lengthscales.empty()) {
                throw InvalidInput("kernel: lengthscales must not be empty");
            }
            for (double l : lengthscales) {
                if (!(l > 0.0) || !std::isfinite(l)) {
                    throw InvalidInput("kernel: lengthscales must be finite and > 0");
                }
            }
        }
        const bool one_d = family == KernelFamily::matern1d || family == KernelFamily::triangular;
        if (one_d && lengthscales.size() != 1) {
            throw InvalidInput("kernel: family " + std::string(to_string(family)) + " is one-dimensional");
        }
        if ((family == KernelFamily::matern1d || family == KernelFamily::matern_tensor) &&
            (!(nu > 0.0) || !std::isfinite(nu))) {
            throw InvalidInput("kernel: nu must be finite and > 0");
        }
        if (family == KernelFamily::fbm && !(hurst > 0.0 && hurst < 1.0)) {
            throw InvalidInput("kernel: hurst must lie in (0, 1)");
        }
        if (family == KernelFamily::finite_rank) {
            if (rank_terms.empty()) {
                throw InvalidInput("kernel: finite_rank needs at least one term");
            }
            for (const auto& t : rank_terms) {
                if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
                    throw InvalidInput("kernel: finite_rank weights must be finite and >= 0");
                }
                if (t.index.empty() || t.index.size() != rank_terms.front().index.size()) {
                    throw InvalidInput("kernel: finite_rank basis indices must share one nonzero dimension");
                }
                for (int k : t.index) {
                    if (k < 0) {
                        throw InvalidInput("kernel: finite_rank basis index must be >= 0");
                    }
                }
            }
        }
    }
};

namespace detail {

/// Matern correlation 2^{1-nu}/Gamma(nu) t^nu K_nu(t) with t = sqrt(2 nu) r / l,
/// always via the Bessel function (no half-integer shortcut).
inline double matern_correlation_bessel(double nu, double t, double norm) {
    if (t == 0.0) {
        return 1.0;
    }
    const BesselKResult k = bessel_k_checked(nu, t);
    if (k.overflow) {
        return 1.0;
    }
    const double v = norm * std::pow(t, nu) * k.value;
    return std::isfinite(v) ? std::min(v, 1.0) : 1.0;
}

inline double matern_norm(double nu) { return std::exp((1.0 - nu) * std::numbers::ln2 - std::lgamma(nu)); }

} // namespace detail

/// Matern correlation of a scaled distance a = |x - x'| / l, with the closed
/// polynomial-times-exponential forms for nu in {1/2, 3/2, 5/2}.
inline double matern_correlation(double nu, double a) {
    if (nu == 0.5) {
        return std::exp(-a);
    }
    if (nu == 1.5) {
        const double t = std::sqrt(3.0) * a;
        return (1.0 + t) * std::exp(-t);
    }
    if (nu == 2.5) {
        const double t = std::sqrt(5.0) * a;
        return (1.0 + t + t * t / 3.0) * std::exp(-t);
    }
    return detail::matern_correlation_bessel(nu, std::sqrt(2.0 * nu) * a, detail::matern_norm(nu));
}

/// Evaluator for a validated KernelSpec; caches per-family constants.
class Kernel {
public:
    explicit Kernel(KernelSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        d_ = spec_.dimension();
        if (spec_.family == KernelFamily::matern1d || spec_.family == KernelFamily::matern_tensor) {
            matern_norm_ = detail::matern_norm(spec_.nu);
            matern_scale_ = std::sqrt(2.0 * spec_.nu);
        }
        two_h_ = 2.0 * spec_.hurst;
    }

    [[nodiscard]] const KernelSpec& spec() const { return spec_; }
    [[nodiscard]] int dimension() const { return d_; }

    /// Throws on dimension mismatch or non-finite coordinates.
    void check_point(PointRef x) const {
        if (x.size() != d_) {
            throw DimensionError("kernel: point of dimension " + std::to_string(x.size()) +
                                 " for a kernel of dimension " + std::to_string(d_));
        }
        if (!x.allFinite()) {
            throw DomainError("kernel: non-finite coordinate");
        }
        if (spec_.family == KernelFamily::brownian && x[0] < 0.0) {
            throw DomainError("kernel: Brownian covariance is defined for x >= 0");
        }
    }

    void check_points(const Points& pts) const {
        if (pts.cols() != d_) {
            throw DimensionError("kernel: points of dimension " + std::to_string(pts.cols()) +
                                 " for a kernel of dimension " + std::to_string(d_));
        }
        if (!pts.allFinite()) {
            throw DomainError("kernel: non-finite coordinate");
        }
        if (spec_.family == KernelFamily::brownian && pts.rows() > 0 && pts.col(0).minCoeff() < 0.0) {
            throw DomainError("kernel: Brownian covariance is defined for x >= 0");
        }
    }

    double operator()(PointRef x, PointRef y) const {
        check_point(x);
        check_point(y);
        return eval(x.data(), y.data());
    }

    /// Unchecked evaluation on raw coordinate arrays of length dimension().
    [[nodiscard]] double eval(const double* x, const double* y) const {
        const auto& ls = spec_.lengthscales;
        switch (spec_.family) {
        case KernelFamily::matern1d:
        case KernelFamily::matern_tensor: {
            double prod = 1.0;
            for (int k = 0; k < d_; ++k) {
                prod *= matern_factor(std::abs(x[k] - y[k]) / ls[k]);
            }
            return spec_.variance * prod;
        }
        case KernelFamily::gaussian: {
            double q = 0.0;
            for (int k = 0; k < d_; ++k) {
                const double a = (x[k] - y[k]) / ls[k];
                q += a * a;
            }
            return spec_.variance * std::exp(-0.5 * q);
        }
        case KernelFamily::exponential: {
            double q = 0.0;
            for (int k = 0; k < d_; ++k) {
                const double a = (x[k] - y[k]) / ls[k];
                q += a * a;
            }
            return spec_.variance * std::exp(-std::sqrt(q));
        }
        case KernelFamily::triangular:
            return spec_.variance * std::max(0.0, 1.0 - std::abs(x[0] - y[0]) / ls[0]);
        case KernelFamily::fbm: {
            // Summed in a fixed order so that k(x, y) == k(y, x) bit for bit.
            const double px = std::pow(std::abs(x[0]), two_h_);
            const double py = std::pow(std::abs(y[0]), two_h_);
            return spec_.variance * ((std::min(px, py) + std::max(px, py)) - std::pow(std::abs(x[0] - y[0]), two_h_));
        }
        case KernelFamily::brownian:
            return spec_.variance * std::min(x[0], y[0]);
        case KernelFamily::finite_rank: {
            double sum = 0.0;
            for (const auto& term : spec_.rank_terms) {
                double bx = 1.0;
                double by = 1.0;
                for (int k = 0; k < d_; ++k) {
                    bx *= basis_value(term.basis, term.index[k], x[k]);
                    by *= basis_value(term.basis, term.index[k], y[k]);
                }
                sum += term.weight * bx * by;
            }
            return spec_.variance * sum;
        }
        }
        return 0.0;
    }

private:
    [[nodiscard]] double matern_factor(double a) const {
        const double nu = spec_.nu;
        if (nu == 0.5 || nu == 1.5 || nu == 2.5) {
            return matern_correlation(nu, a);
        }
        return detail::matern_correlation_bessel(nu, matern_scale_ * a, matern_norm_);
    }

    KernelSpec spec_;
    int d_ = 1;
    double matern_norm_ = 1.0;
    double matern_scale_ = 1.0;
    double two_h_ = 1.0;
};

/// k(x, y) for a single pair of points.
inline double eval_kernel(const KernelSpec& spec, PointRef x, PointRef y) { return Kernel(spec)(x, y); }

/// Covariances between every row of `a` and every row of `b` (a.rows() x b.rows()).
inline Eigen::MatrixXd cross_covariance(const Kernel& k, const Points& a, const Points& b) {
    k.check_points(a);
    k.check_points(b);
    Eigen::MatrixXd out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            out(i, j) = k.eval(a.row(i).data(), b.row(j).data());
        }
    }
    return out;
}

/// k(x_i, x_i) for each row.
inline Eigen::VectorXd kernel_diagonal(const Kernel& k, const Points& pts) {
    k.check_points(pts);
    Eigen::VectorXd out(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        out[i] = k.eval(pts.row(i).data(), pts.row(i).data());
    }
    return out;
}

/// Symmetric Gram matrix [k(x_i, x_j)].
inline Eigen::MatrixXd gram_matrix(const Kernel& k, const Points& pts) {
    if (pts.rows() == 0) {
        throw InvalidInput("gram_matrix: empty point list");
    }
    k.check_points(pts);
    const Eigen::Index n = pts.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = k.eval(pts.row(i).data(), pts.row(i).data());
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = k.eval(pts.row(i).data(), pts.row(j).data());
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Points& pts) { return gram_matrix(Kernel(spec), pts); }

} // namespace gplc
