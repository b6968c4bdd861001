#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"
#include "dope/univariate.hpp"

namespace dope::env {

/// Policy over a finite state space; reads the state index from a 1-d
/// observation holding the index.
class TabularPolicy : public Policy {
  public:
    /// probs(x, a): one row per state, rows sum to 1.
    explicit TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
        for (Eigen::Index x = 0; x < probs_.rows(); ++x)
            validate_probs(probs_.row(x).transpose());
    }

    int num_actions() const override { return static_cast<int>(probs_.cols()); }
    int num_states() const { return static_cast<int>(probs_.rows()); }

    Eigen::VectorXd probs(const Observation& obs) const override {
        return probs_.row(state_of(obs)).transpose();
    }

    double prob(int x, int a) const { return probs_(x, a); }

    static int state_of(const Observation& obs) { return static_cast<int>(std::lround(obs[0])); }
    static Observation obs_of(int state) {
        Observation o(1);
        o[0] = static_cast<double>(state);
        return o;
    }

  private:
    Eigen::MatrixXd probs_;
};

/**
 * Finite-horizon tabular MDP with sparse rewards: zero reward before step H
 * and a known 1-d terminal reward density r_H(x, a) per state-action pair.
 * Under any policy the conditional return distribution at every (h, x, a)
 * is then an exact finite mixture over the terminal reward dictionary,
 * which serves as the ground-truth oracle.
 */
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<Eigen::MatrixXd> transition; // transition[a](x, x')
    std::vector<Density1d> terminal_reward;  // indexed x * A + a
    Eigen::VectorXd initial_dist;            // mu over states

    int pair_index(int x, int a) const { return x * num_actions + a; }
    int num_pairs() const { return num_states * num_actions; }

    void validate() const {
        if (num_states < 1 || num_actions < 1 || horizon < 1)
            throw std::invalid_argument("TabularMdp: empty dimensions");
        if (static_cast<int>(transition.size()) != num_actions)
            throw std::invalid_argument("TabularMdp: transition tensor has wrong action count");
        for (const auto& P : transition) {
            if (P.rows() != num_states || P.cols() != num_states)
                throw std::invalid_argument("TabularMdp: transition matrix shape mismatch");
            for (Eigen::Index x = 0; x < P.rows(); ++x) {
                if (P.row(x).minCoeff() < -1e-12 || std::abs(P.row(x).sum() - 1.0) > 1e-9)
                    throw std::invalid_argument("TabularMdp: transition rows must be probability vectors");
            }
        }
        if (static_cast<int>(terminal_reward.size()) != num_pairs())
            throw std::invalid_argument("TabularMdp: terminal reward dictionary size mismatch");
        if (initial_dist.size() != num_states || std::abs(initial_dist.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("TabularMdp: initial distribution invalid");
    }

    int sample_next(int x, int a, RngStream& rng) const {
        return rng.categorical(transition[static_cast<std::size_t>(a)].row(x).transpose());
    }

    double sample_terminal_reward(int x, int a, RngStream& rng) const {
        return sample(terminal_reward[static_cast<std::size_t>(pair_index(x, a))], rng);
    }
};

/**
 * Per-(h, x, a) mixture weights over terminal (x', a') pairs. weights[h - 1]
 * has one row per (x, a) pair and one column per terminal pair; every row is
 * a probability vector.
 */
struct MixtureWeights {
    std::vector<Eigen::MatrixXd> weights;

    const Eigen::MatrixXd& at_step(int h) const { return weights[static_cast<std::size_t>(h - 1)]; }
};

/// Exact backward dynamic program for the conditional return mixture:
/// w(H, x, a) is the indicator of (x, a); for h < H,
/// w(h, x, a) = sum_{x', a'} P(x' | x, a) pi(a' | x') w(h + 1, x', a').
inline MixtureWeights tabular_exact_return_dist(const TabularMdp& mdp, const TabularPolicy& policy) {
    mdp.validate();
    if (policy.num_states() != mdp.num_states || policy.num_actions() != mdp.num_actions)
        throw std::invalid_argument("tabular_exact_return_dist: policy shape mismatch");
    const int pairs = mdp.num_pairs();
    MixtureWeights out;
    out.weights.assign(static_cast<std::size_t>(mdp.horizon), Eigen::MatrixXd::Zero(pairs, pairs));
    out.weights.back() = Eigen::MatrixXd::Identity(pairs, pairs);
    for (int h = mdp.horizon - 1; h >= 1; --h) {
        Eigen::MatrixXd& w = out.weights[static_cast<std::size_t>(h - 1)];
        const Eigen::MatrixXd& w_next = out.weights[static_cast<std::size_t>(h)];
        for (int x = 0; x < mdp.num_states; ++x) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(pairs);
                for (int xn = 0; xn < mdp.num_states; ++xn) {
                    const double p_next = mdp.transition[static_cast<std::size_t>(a)](x, xn);
                    if (p_next == 0.0) continue;
                    for (int an = 0; an < mdp.num_actions; ++an) {
                        const double pa = policy.prob(xn, an);
                        if (pa == 0.0) continue;
                        row += p_next * pa * w_next.row(mdp.pair_index(xn, an));
                    }
                }
                w.row(mdp.pair_index(x, a)) = row;
            }
        }
    }
    return out;
}

/// Mixture weights of Z^pi itself: sum_x mu(x) sum_a pi(a | x) w(1, x, a).
inline Eigen::VectorXd initial_mixture_weights(const TabularMdp& mdp, const TabularPolicy& policy,
                                               const MixtureWeights& mw) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mdp.num_pairs());
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a)
            w += mdp.initial_dist[x] * policy.prob(x, a) *
                 mw.at_step(1).row(mdp.pair_index(x, a)).transpose();
    return w;
}

/// Offline data for the sparse-reward tabular MDP: step labels stratified
/// evenly over [1, H], (x, a) ~ rho (a matrix over pairs), x' ~ P, and the
/// reward drawn from r_H only on step-H tuples.
inline OfflineDataset generate_tabular_dataset(const TabularMdp& mdp, const Eigen::MatrixXd& rho, int n,
                                               RngStream& rng) {
    mdp.validate();
    if (n < mdp.horizon) throw std::invalid_argument("generate_tabular_dataset: n < horizon");
    if (rho.rows() != mdp.num_states || rho.cols() != mdp.num_actions)
        throw std::invalid_argument("generate_tabular_dataset: rho shape mismatch");
    Eigen::VectorXd rho_flat(mdp.num_pairs());
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a)
            rho_flat[mdp.pair_index(x, a)] = rho(x, a);
    if (std::abs(rho_flat.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("generate_tabular_dataset: rho must sum to 1");

    std::vector<TransitionTuple> tuples;
    tuples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int h = 1 + static_cast<int>(i % static_cast<std::size_t>(mdp.horizon));
        const int pair = rng.categorical(rho_flat);
        const int x = pair / mdp.num_actions;
        const int a = pair % mdp.num_actions;
        TransitionTuple t;
        t.step = h;
        t.x = TabularPolicy::obs_of(x);
        t.action = a;
        t.reward = Reward::Constant(1, h == mdp.horizon ? mdp.sample_terminal_reward(x, a, rng) : 0.0);
        t.x_next = TabularPolicy::obs_of(h == mdp.horizon ? 0 : mdp.sample_next(x, a, rng));
        tuples.push_back(std::move(t));
    }
    DatasetMeta meta;
    meta.env_id = "tabular";
    meta.reward_dim = 1;
    meta.obs_dim = 1;
    meta.num_actions = mdp.num_actions;
    meta.horizon = mdp.horizon;
    return OfflineDataset(std::move(tuples), std::move(meta));
}

/// Forward state-action occupancy d^pi_h for h = 1..H; rows over steps,
/// columns over (x, a) pairs.
inline Eigen::MatrixXd state_action_occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
    Eigen::MatrixXd occ(mdp.horizon, mdp.num_pairs());
    Eigen::VectorXd state_dist = mdp.initial_dist;
    for (int h = 1; h <= mdp.horizon; ++h) {
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a)
                occ(h - 1, mdp.pair_index(x, a)) = state_dist[x] * policy.prob(x, a);
        if (h == mdp.horizon) break;
        Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.num_states);
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a)
                next += occ(h - 1, mdp.pair_index(x, a)) * mdp.transition[static_cast<std::size_t>(a)].row(x).transpose();
        state_dist = next;
    }
    return occ;
}

/// The fixed 4-state test instance used across the test and theory suites.
inline TabularMdp fixed_test_mdp() {
    TabularMdp mdp;
    mdp.num_states = 4;
    mdp.num_actions = 2;
    mdp.horizon = 4;
    Eigen::MatrixXd p0(4, 4), p1(4, 4);
    p0 << 0.55, 0.25, 0.15, 0.05, //
        0.10, 0.50, 0.30, 0.10,   //
        0.20, 0.20, 0.40, 0.20,   //
        0.05, 0.15, 0.30, 0.50;
    p1 << 0.20, 0.40, 0.25, 0.15, //
        0.35, 0.15, 0.35, 0.15,   //
        0.10, 0.30, 0.20, 0.40,   //
        0.40, 0.10, 0.20, 0.30;
    mdp.transition = {p0, p1};
    mdp.terminal_reward = {
        Gaussian1d{0.10, 0.040}, Gaussian1d{0.25, 0.050}, Gaussian1d{0.40, 0.045}, Uniform1d{0.45, 0.65},
        Gaussian1d{0.60, 0.050}, Gaussian1d{0.75, 0.040}, Uniform1d{0.78, 0.98},   Gaussian1d{0.90, 0.035},
    };
    mdp.initial_dist = Eigen::Vector4d(0.4, 0.3, 0.2, 0.1);
    mdp.validate();
    return mdp;
}

inline TabularPolicy fixed_test_policy() {
    Eigen::MatrixXd p(4, 2);
    p << 0.7, 0.3, //
        0.2, 0.8,  //
        0.5, 0.5,  //
        0.9, 0.1;
    return TabularPolicy(std::move(p));
}

} // namespace dope::env
