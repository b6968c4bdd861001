#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"

namespace dope::env {

enum class LockRewardMode { ScalarGaussian, Ring2d };

/**
 * Rich-observation combination lock: two latent chains over horizon H. The
 * good chain (w = 0) survives only under the per-step optimal action; any
 * other action drops to the absorbing bad chain (w = 1). Reward arrives at
 * step H only and depends on the terminal latent state.
 *
 * Observations are 30-dimensional: one-hot latent state on [0, 2), one-hot
 * step on [2, 2 + H), and i.i.d. N(0, noise_std^2) entries on the rest.
 */
struct CombinationLock {
    int horizon = 20;
    int num_actions = 2;
    int obs_dim = 30;
    double noise_std = 0.1;
    LockRewardMode reward_mode = LockRewardMode::ScalarGaussian;
    std::vector<int> optimal_actions; // empty means all zero

    CombinationLock() = default;
    CombinationLock(int H, LockRewardMode mode) : horizon(H), reward_mode(mode) { validate(); }

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("CombinationLock: horizon must be >= 1");
        if (horizon > obs_dim - 2)
            throw std::invalid_argument("CombinationLock: horizon too large for obs_dim (need H <= " +
                                        std::to_string(obs_dim - 2) + ")");
        if (!optimal_actions.empty() && static_cast<int>(optimal_actions.size()) != horizon)
            throw std::invalid_argument("CombinationLock: optimal_actions size must equal horizon");
    }

    int reward_dim() const { return reward_mode == LockRewardMode::Ring2d ? 2 : 1; }

    int optimal_action(int h) const {
        return optimal_actions.empty() ? 0 : optimal_actions[static_cast<std::size_t>(h - 1)];
    }

    /// Deterministic latent transition from step h to h + 1.
    int transition(int w, int h, ActionId a) const {
        if (w == 1) return 1;
        return a == optimal_action(h) ? 0 : 1;
    }

    Observation observe(int w, int h, RngStream& rng) const {
        Observation x = Observation::Zero(obs_dim);
        x[w] = 1.0;
        x[2 + (h - 1)] = 1.0;
        for (int j = 2 + horizon; j < obs_dim; ++j)
            x[j] = rng.normal(0.0, noise_std);
        return x;
    }

    int latent_of(const Observation& x) const { return x[1] > x[0] ? 1 : 0; }

    int step_of(const Observation& x) const {
        int best = 0;
        for (int h = 1; h < horizon; ++h)
            if (x[2 + h] > x[2 + best]) best = h;
        return best + 1;
    }

    /// Terminal reward draw given the latent state at step H.
    Reward terminal_reward(int w_terminal, RngStream& rng) const {
        if (reward_mode == LockRewardMode::ScalarGaussian) {
            Reward r(1);
            r[0] = rng.normal(w_terminal == 0 ? 1.0 : -1.0, 0.1);
            return r;
        }
        // 2-d: good chain r = x + 2 x / ||x||, x ~ N(0, 0.05 I); bad chain r = x.
        const double std_dev = std::sqrt(0.05);
        Reward x(2);
        x[0] = rng.normal(0.0, std_dev);
        x[1] = rng.normal(0.0, std_dev);
        if (w_terminal != 0) return x;
        double norm = x.norm();
        while (norm < 1e-12) { // measure-zero guard: resample
            x[0] = rng.normal(0.0, std_dev);
            x[1] = rng.normal(0.0, std_dev);
            norm = x.norm();
        }
        return x + 2.0 * x / norm;
    }
};

/**
 * Test policy: optimal action with probability 1 - eps, and with
 * probability eps a uniformly random action (which may again be the
 * optimal one), so P(a = a*_h) = 1 - eps + eps / A.
 */
class LockTestPolicy : public Policy {
  public:
    LockTestPolicy(const CombinationLock& lock, double eps) : lock_(lock), eps_(eps) {}

    int num_actions() const override { return lock_.num_actions; }

    Eigen::VectorXd probs(const Observation& x) const override {
        const int h = lock_.step_of(x);
        return probs_at_step(h);
    }

    Eigen::VectorXd probs_at_step(int h) const {
        const int A = lock_.num_actions;
        Eigen::VectorXd p = Eigen::VectorXd::Constant(A, eps_ / A);
        p[lock_.optimal_action(h)] += 1.0 - eps_;
        return p;
    }

    double optimal_prob() const { return 1.0 - eps_ + eps_ / lock_.num_actions; }

  private:
    CombinationLock lock_;
    double eps_;
};

/**
 * Uniform offline data: for every step h and latent state w, `per_cell`
 * observations are drawn from psi(w, h) with fresh noise, a uniformly
 * random action is taken, and one step is simulated. Step-H tuples carry
 * the terminal reward and a zero next observation (the episode ends).
 */
inline OfflineDataset generate_offline_dataset(const CombinationLock& lock, int per_cell, RngStream& rng) {
    if (per_cell < 1) throw std::invalid_argument("generate_offline_dataset: per_cell must be >= 1");
    std::vector<TransitionTuple> tuples;
    tuples.reserve(static_cast<std::size_t>(per_cell) * 2 * static_cast<std::size_t>(lock.horizon));
    const int d = lock.reward_dim();
    for (int h = 1; h <= lock.horizon; ++h) {
        for (int w = 0; w <= 1; ++w) {
            for (int i = 0; i < per_cell; ++i) {
                TransitionTuple t;
                t.step = h;
                t.x = lock.observe(w, h, rng);
                t.action = static_cast<ActionId>(rng.uniform_index(static_cast<std::size_t>(lock.num_actions)));
                if (h < lock.horizon) {
                    t.reward = Reward::Zero(d);
                    const int w_next = lock.transition(w, h, t.action);
                    t.x_next = lock.observe(w_next, h + 1, rng);
                } else {
                    t.reward = lock.terminal_reward(w, rng);
                    t.x_next = Observation::Zero(lock.obs_dim);
                }
                tuples.push_back(std::move(t));
            }
        }
    }
    DatasetMeta meta;
    meta.env_id = lock.reward_mode == LockRewardMode::Ring2d ? "comb_lock_2d" : "comb_lock_1d";
    meta.reward_dim = d;
    meta.obs_dim = lock.obs_dim;
    meta.num_actions = lock.num_actions;
    meta.horizon = lock.horizon;
    return OfflineDataset(std::move(tuples), std::move(meta));
}

/// Full-episode rollouts of `policy` from the initial state (w = 0, h = 1);
/// returns m samples of the episodic return z = sum_h r_h.
inline EmpiricalDistribution monte_carlo_returns(const CombinationLock& lock, const Policy& policy, int m,
                                                 RngStream& rng) {
    if (m < 1) throw std::invalid_argument("monte_carlo_returns: m must be >= 1");
    Eigen::MatrixXd samples(m, lock.reward_dim());
    for (int i = 0; i < m; ++i) {
        int w = 0;
        for (int h = 1; h < lock.horizon; ++h) {
            const Observation x = lock.observe(w, h, rng);
            const ActionId a = policy.sample(x, rng);
            w = lock.transition(w, h, a);
        }
        samples.row(i) = lock.terminal_reward(w, rng).transpose();
    }
    return EmpiricalDistribution(std::move(samples));
}

/**
 * Ground-truth conditional return sampler for E_{x ~ psi(0, h)} Z^pi_h(x, a*_h):
 * start on the good chain at step h, force the optimal action there, then
 * follow the policy (queried on freshly observed states) to the end.
 */
inline EmpiricalDistribution conditional_truth_samples(const CombinationLock& lock, const Policy& policy,
                                                       int h, int m, RngStream& rng) {
    if (h < 1 || h > lock.horizon) throw std::invalid_argument("conditional_truth_samples: bad step");
    Eigen::MatrixXd samples(m, lock.reward_dim());
    for (int i = 0; i < m; ++i) {
        int w = 0;
        if (h < lock.horizon) w = lock.transition(w, h, lock.optimal_action(h));
        for (int j = h + 1; j < lock.horizon; ++j) {
            const Observation x = lock.observe(w, j, rng);
            const ActionId a = policy.sample(x, rng);
            w = lock.transition(w, j, a);
        }
        samples.row(i) = lock.terminal_reward(w, rng).transpose();
    }
    return EmpiricalDistribution(std::move(samples));
}

} // namespace dope::env
