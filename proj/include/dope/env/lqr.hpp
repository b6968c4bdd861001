#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dope/rng.hpp"

namespace dope::env {

/**
 * Linear quadratic regulator with additive Gaussian reward noise:
 *   x_{h+1} = A x_h + B a_h,
 *   r(x, a) = -(x' Q x + a' R a) + eps,   eps ~ N(0, sigma^2),
 * evaluated under the fixed linear policy a = K x. The conditional return
 * distribution is Gaussian with closed-form mean and variance, used here as
 * an exactly solvable validation oracle.
 */
struct LqrSystem {
    Eigen::MatrixXd A, B, Q, R, K;
    double sigma = 0.1;
    int horizon = 10;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int action_dim() const { return static_cast<int>(B.cols()); }

    void validate() const {
        const int dx = state_dim();
        const int da = action_dim();
        if (A.cols() != dx || B.rows() != dx) throw std::invalid_argument("LqrSystem: A/B shape mismatch");
        if (Q.rows() != dx || Q.cols() != dx || R.rows() != da || R.cols() != da)
            throw std::invalid_argument("LqrSystem: Q/R shape mismatch");
        if (!Q.isApprox(Q.transpose(), 1e-12) || !R.isApprox(R.transpose(), 1e-12))
            throw std::invalid_argument("LqrSystem: Q and R must be symmetric");
        if (K.rows() != da || K.cols() != dx) throw std::invalid_argument("LqrSystem: K shape mismatch");
        if (horizon < 1) throw std::invalid_argument("LqrSystem: horizon must be >= 1");
    }

    /// Cost-to-go matrices U_1..U_{H+1} with U_{H+1} = 0 and
    /// U_h = (Q + K'RK) + (A + BK)' U_{h+1} (A + BK).
    std::vector<Eigen::MatrixXd> cost_matrices() const {
        const Eigen::MatrixXd closed_loop = A + B * K;
        const Eigen::MatrixXd stage = Q + K.transpose() * R * K;
        std::vector<Eigen::MatrixXd> U(static_cast<std::size_t>(horizon) + 2);
        U[static_cast<std::size_t>(horizon) + 1] = Eigen::MatrixXd::Zero(state_dim(), state_dim());
        for (int h = horizon; h >= 1; --h)
            U[static_cast<std::size_t>(h)] =
                stage + closed_loop.transpose() * U[static_cast<std::size_t>(h) + 1] * closed_loop;
        return U;
    }
};

struct GaussianReturnParams {
    double mean = 0.0;
    double variance = 0.0;
};

/// Closed-form parameters of Z^pi_h(. | x, a) = N(mean, variance):
/// mean = -(Ax + Ba)' U_{h+1} (Ax + Ba) - x'Qx - a'Ra,
/// variance = (H - h + 1) sigma^2.
inline GaussianReturnParams lqr_return_params(const LqrSystem& sys, const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& a, int h) {
    sys.validate();
    if (h < 1 || h > sys.horizon) throw std::invalid_argument("lqr_return_params: step out of range");
    if (x.size() != sys.state_dim() || a.size() != sys.action_dim())
        throw std::invalid_argument("lqr_return_params: dimension mismatch");
    const auto U = sys.cost_matrices();
    const Eigen::VectorXd x_next = sys.A * x + sys.B * a;
    GaussianReturnParams out;
    out.mean = -x_next.dot(U[static_cast<std::size_t>(h) + 1] * x_next) - x.dot(sys.Q * x) - a.dot(sys.R * a);
    out.variance = static_cast<double>(sys.horizon - h + 1) * sys.sigma * sys.sigma;
    return out;
}

/// One sampled return from (x, a) at step h under a = Kx thereafter.
inline double lqr_rollout_return(const LqrSystem& sys, Eigen::VectorXd x, Eigen::VectorXd a, int h,
                                 RngStream& rng) {
    double z = 0.0;
    for (int j = h; j <= sys.horizon; ++j) {
        z += -(x.dot(sys.Q * x) + a.dot(sys.R * a)) + rng.normal(0.0, sys.sigma);
        x = (sys.A * x + sys.B * a).eval();
        a = (sys.K * x).eval();
    }
    return z;
}

} // namespace dope::env
