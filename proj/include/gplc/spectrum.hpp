#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gplc/errors.hpp"
#include "gplc/kernels.hpp"
#include "gplc/quadrature.hpp"

namespace gplc {

/// Leading Mercer eigenpairs of the integral operator of a kernel under a
/// discrete measure.
///
/// `eigvec_table(j, p)` holds phi_p(node_j), normalized so that
/// sum_j w_j phi_p(node_j) phi_q(node_j) = delta_pq. Each eigenfunction is
/// signed so that its largest-magnitude node value is positive.
struct Spectrum {
    Eigen::VectorXd eigenvalues;
    Points nodes;
    Eigen::VectorXd weights;
    Eigen::MatrixXd eigvec_table;
    /// sum_j w_j k(node_j, node_j); the discrete trace of the operator.
    double quadrature_trace = 0.0;
    /// quadrature_trace - sum of the retained (clipped) eigenvalues.
    double residual_trace = 0.0;

    [[nodiscard]] Eigen::Index size() const { return eigenvalues.size(); }
};

/// Nystrom eigendecomposition of W^{1/2} K W^{1/2} on the quadrature nodes,
/// keeping the P largest eigenvalues. Requires m >= 10 P nodes.
inline Spectrum nystrom_spectrum(const KernelSpec& spec, const Quadrature& measure, Eigen::Index count) {
    measure.validate_probability();
    const Eigen::Index m = measure.size();
    if (count < 1) {
        throw InvalidInput("nystrom_spectrum: need at least one eigenpair");
    }
    if (count > m) {
        throw InvalidInput("nystrom_spectrum: " + std::to_string(count) + " eigenpairs requested from " +
                           std::to_string(m) + " nodes");
    }
    if (m < 10 * count) {
        throw InvalidInput("nystrom_spectrum: " + std::to_string(m) + " nodes are too few for " +
                           std::to_string(count) + " eigenpairs (need at least 10 per eigenpair)");
    }
    const Kernel kernel(spec);
    const Eigen::MatrixXd k = gram_matrix(kernel, measure.nodes);
    const Eigen::VectorXd sqrt_w = measure.weights.cwiseSqrt();
    const Eigen::MatrixXd a = sqrt_w.asDiagonal() * k * sqrt_w.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw Error("nystrom_spectrum: symmetric eigensolver did not converge");
    }

    Spectrum s;
    s.nodes = measure.nodes;
    s.weights = measure.weights;
    s.quadrature_trace = measure.weights.dot(k.diagonal());
    s.eigenvalues.resize(count);
    s.eigvec_table.resize(m, count);
    // Eigenvalues within the eigensolver's round-off of zero are set to 0.
    const double floor = static_cast<double>(m) * std::numeric_limits<double>::epsilon() *
                         solver.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index p = 0; p < count; ++p) {
        // Eigen sorts ascending.
        const Eigen::Index src = m - 1 - p;
        const double raw = solver.eigenvalues()[src];
        const double lambda = raw > floor ? raw : 0.0;
        s.eigenvalues[p] = lambda;
        Eigen::VectorXd u = solver.eigenvectors().col(src);
        Eigen::VectorXd phi(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            if (measure.weights[j] > 0.0) {
                phi[j] = u[j] / sqrt_w[j];
            } else {
                // Zero-weight node: Nystrom extension, using w_i phi_i = sqrt(w_i) u_i.
                phi[j] = lambda > 0.0 ? k.row(j).dot(sqrt_w.cwiseProduct(u)) / lambda : 0.0;
            }
        }
        Eigen::Index arg = 0;
        phi.cwiseAbs().maxCoeff(&arg);
        if (phi[arg] < 0.0) {
            phi = -phi;
        }
        s.eigvec_table.col(p) = phi;
    }
    s.residual_trace = s.quadrature_trace - s.eigenvalues.sum();
    return s;
}

/// All retained eigenfunctions at x via the Nystrom extension
/// phi_p(x) = (1/lambda_p) sum_j w_j k(x, node_j) phi_p(node_j); entries with
/// lambda_p = 0 are set to 0.
inline Eigen::VectorXd eigenfunctions_at(const Spectrum& s, const Kernel& kernel, PointRef x) {
    kernel.check_point(x);
    const Eigen::Index m = s.nodes.rows();
    Eigen::VectorXd kw(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        kw[j] = s.weights[j] * kernel.eval(x.data(), s.nodes.row(j).data());
    }
    Eigen::VectorXd out = s.eigvec_table.transpose() * kw;
    for (Eigen::Index p = 0; p < s.size(); ++p) {
        out[p] = s.eigenvalues[p] > 0.0 ? out[p] / s.eigenvalues[p] : 0.0;
    }
    return out;
}

/// phi_p(x) through the Nystrom extension. Throws if lambda_p = 0.
inline double eigenfunction_at(const Spectrum& s, const KernelSpec& spec, Eigen::Index p, PointRef x) {
    if (p < 0 || p >= s.size()) {
        throw InvalidInput("eigenfunction_at: index " + std::to_string(p) + " outside the retained spectrum");
    }
    if (!(s.eigenvalues[p] > 0.0)) {
        throw DomainError("eigenfunction_at: eigenvalue " + std::to_string(p) +
                          " is zero, the Nystrom extension is undefined");
    }
    const Kernel kernel(spec);
    kernel.check_point(x);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < s.nodes.rows(); ++j) {
        acc += s.weights[j] * kernel.eval(x.data(), s.nodes.row(j).data()) * s.eigvec_table(j, p);
    }
    return acc / s.eigenvalues[p];
}

/// Regularity parameters for the closed-form eigenvalue laws.
struct EigenLawParams {
    double nu = 2.5;
    double hurst = 0.5;
};

/// Large-p eigenvalue laws for the uniform measure on [0,1]^d:
///   fbm:            sin(pi H) Gamma(2H+1) / pi^{2H+1} / p^{2H+1}
///   matern1d:       1 / p^{2 nu}   (exponential: nu = 1/2)
///   matern_tensor:  log(1+p)^{2(d-1) nu} / p^{2 nu}
///   gaussian:       exp(-p^{1/d})  (an upper envelope)
///   brownian:       1 / (pi^2 (p + 1/2)^2), exact for p >= 0
inline double analytic_eigenvalue(KernelFamily family, const EigenLawParams& params, long p, int d) {
    const double pd = static_cast<double>(p);
    if (family == KernelFamily::brownian) {
        if (p < 0) {
            throw InvalidInput("analytic_eigenvalue: index must be >= 0");
        }
        return 1.0 / (std::numbers::pi * std::numbers::pi * (pd + 0.5) * (pd + 0.5));
    }
    if (p < 1) {
        throw InvalidInput("analytic_eigenvalue: asymptotic laws need p >= 1");
    }
    switch (family) {
    case KernelFamily::fbm: {
        const double h = params.hurst;
        if (!(h > 0.0 && h < 1.0)) {
            throw InvalidInput("analytic_eigenvalue: hurst must lie in (0, 1)");
        }
        const double nu_h = std::sin(std::numbers::pi * h) * std::tgamma(2.0 * h + 1.0) /
                            std::pow(std::numbers::pi, 2.0 * h + 1.0);
        return nu_h / std::pow(pd, 2.0 * h + 1.0);
    }
    case KernelFamily::matern1d:
        return 1.0 / std::pow(pd, 2.0 * params.nu);
    case KernelFamily::exponential:
        return 1.0 / pd;
    case KernelFamily::matern_tensor:
        return std::pow(std::log1p(pd), 2.0 * (d - 1) * params.nu) / std::pow(pd, 2.0 * params.nu);
    case KernelFamily::gaussian:
        return std::exp(-std::pow(pd, 1.0 / d));
    default:
        throw InvalidInput("analytic_eigenvalue: no eigenvalue law for family " + std::string(to_string(family)));
    }
}

} // namespace gplc
