#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "gplc/errors.hpp"

namespace gplc {

struct BoxMinimizerOptions {
    int max_iterations = 200;
    /// Relative finite-difference step for the central-difference gradient.
    double fd_step = 1e-6;
    double gradient_tol = 1e-8;
    double value_tol = 1e-12;
};

struct BoxMinimum {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Projected BFGS on the box [lower, upper] with finite-difference gradients.
/// Works in coordinates scaled to the unit cube so that the step rule and the
/// initial inverse Hessian treat all parameters alike. Non-finite objective
/// values are treated as +infinity.
class BoxMinimizer {
public:
    using Objective = std::function<double(const Eigen::VectorXd&)>;

    BoxMinimizer(Eigen::VectorXd lower, Eigen::VectorXd upper, BoxMinimizerOptions opts = {})
        : lower_(std::move(lower)), upper_(std::move(upper)), opts_(opts) {
        if (lower_.size() != upper_.size() || lower_.size() == 0) {
            throw DimensionError("box minimizer: bounds must share a nonzero dimension");
        }
        if (((upper_ - lower_).array() <= 0.0).any()) {
            throw InvalidInput("box minimizer: every upper bound must exceed its lower bound");
        }
    }

    [[nodiscard]] BoxMinimum minimize(const Objective& f, const Eigen::VectorXd& start) const {
        const Eigen::Index d = lower_.size();
        const Eigen::VectorXd width = upper_ - lower_;
        int evals = 0;
        auto fu = [&](const Eigen::VectorXd& u) {
            ++evals;
            const double v = f(lower_ + width.cwiseProduct(u));
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        };
        Eigen::VectorXd u = ((start - lower_).cwiseQuotient(width)).cwiseMax(0.0).cwiseMin(1.0);
        double fx = fu(u);
        BoxMinimum out;
        if (!std::isfinite(fx)) {
            out.x = lower_ + width.cwiseProduct(u);
            out.evaluations = evals;
            return out;
        }
        Eigen::VectorXd g = gradient(fu, u, fx);
        Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d);
        int small_steps = 0;
        int it = 0;
        for (; it < opts_.max_iterations; ++it) {
            const Eigen::VectorXd free = free_mask(u, g);
            const Eigen::VectorXd pg = g.cwiseProduct(free);
            if (pg.lpNorm<Eigen::Infinity>() < opts_.gradient_tol) {
                out.converged = true;
                break;
            }
            Eigen::VectorXd dir = -(h * pg).cwiseProduct(free);
            if (!(dir.dot(pg) < 0.0)) {
                h.setIdentity();
                dir = -pg;
            }
            // Keep the first trial step inside a unit-cube-sized region.
            double alpha = std::min(1.0, 0.5 / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-300));
            Eigen::VectorXd trial;
            double ft = std::numeric_limits<double>::infinity();
            bool accepted = false;
            for (int ls = 0; ls < 40; ++ls) {
                trial = (u + alpha * dir).cwiseMax(0.0).cwiseMin(1.0);
                ft = fu(trial);
                if (ft <= fx + 1e-4 * g.dot(trial - u)) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) {
                if (h.isIdentity()) {
                    out.converged = true;
                    break;
                }
                h.setIdentity();
                continue;
            }
            const Eigen::VectorXd s = trial - u;
            const Eigen::VectorXd g_new = gradient(fu, trial, ft);
            const Eigen::VectorXd y = g_new - g;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                const double rho = 1.0 / sy;
                const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
                h = (id - rho * s * y.transpose()) * h * (id - rho * y * s.transpose()) + rho * s * s.transpose();
            }
            const double change = fx - ft;
            u = trial;
            fx = ft;
            g = g_new;
            if (change <= opts_.value_tol * std::max(1.0, std::abs(fx))) {
                if (++small_steps >= 2) {
                    out.converged = true;
                    ++it;
                    break;
                }
            } else {
                small_steps = 0;
            }
        }
        out.x = (lower_ + width.cwiseProduct(u)).cwiseMax(lower_).cwiseMin(upper_);
        out.value = fx;
        out.iterations = it;
        out.evaluations = evals;
        return out;
    }

private:
    template <class F>
    Eigen::VectorXd gradient(F& fu, const Eigen::VectorXd& u, double fx) const {
        const Eigen::Index d = u.size();
        Eigen::VectorXd g(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            const double h = opts_.fd_step * std::max(std::abs(u[k]), 1.0);
            Eigen::VectorXd up = u;
            Eigen::VectorXd dn = u;
            up[k] = std::min(u[k] + h, 1.0);
            dn[k] = std::max(u[k] - h, 0.0);
            const double fup = up[k] > u[k] ? fu(up) : fx;
            const double fdn = dn[k] < u[k] ? fu(dn) : fx;
            const double span = up[k] - dn[k];
            g[k] = (std::isfinite(fup) && std::isfinite(fdn)) ? (fup - fdn) / span : 0.0;
        }
        return g;
    }

    // 1 for coordinates free to move, 0 for those held at a bound by the gradient.
    static Eigen::VectorXd free_mask(const Eigen::VectorXd& u, const Eigen::VectorXd& g) {
        Eigen::VectorXd m = Eigen::VectorXd::Ones(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            if ((u[k] <= 0.0 && g[k] > 0.0) || (u[k] >= 1.0 && g[k] < 0.0)) {
                m[k] = 0.0;
            }
        }
        return m;
    }

    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
    BoxMinimizerOptions opts_;
};

} // namespace gplc
