#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dope/env/tabular.hpp"
#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"
#include "dope/univariate.hpp"

namespace dope::env {

/// Discounted tabular MDP with a 1-d reward density per (x, a). Used for
/// the infinite-horizon algorithm and the contraction checks.
struct DiscountedMdp {
    int num_states = 0;
    int num_actions = 0;
    double gamma = 0.9;
    std::vector<Eigen::MatrixXd> transition; // transition[a](x, x')
    std::vector<Density1d> reward;           // indexed x * A + a
    Eigen::VectorXd initial_dist;

    int pair_index(int x, int a) const { return x * num_actions + a; }
    int num_pairs() const { return num_states * num_actions; }

    void validate() const {
        if (num_states < 1 || num_actions < 1) throw std::invalid_argument("DiscountedMdp: empty dimensions");
        if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("DiscountedMdp: gamma must be in [0, 1)");
        if (static_cast<int>(transition.size()) != num_actions)
            throw std::invalid_argument("DiscountedMdp: transition tensor shape mismatch");
        for (const auto& P : transition)
            for (Eigen::Index x = 0; x < P.rows(); ++x)
                if (std::abs(P.row(x).sum() - 1.0) > 1e-9)
                    throw std::invalid_argument("DiscountedMdp: transition rows must sum to 1");
        if (static_cast<int>(reward.size()) != num_pairs())
            throw std::invalid_argument("DiscountedMdp: reward dictionary size mismatch");
        if (initial_dist.size() != num_states || std::abs(initial_dist.sum() - 1.0) > 1e-9)
            throw std::invalid_argument("DiscountedMdp: initial distribution invalid");
    }

    int sample_next(int x, int a, RngStream& rng) const {
        return rng.categorical(transition[static_cast<std::size_t>(a)].row(x).transpose());
    }

    double sample_reward(int x, int a, RngStream& rng) const {
        return sample(reward[static_cast<std::size_t>(pair_index(x, a))], rng);
    }
};

/// Truncation length L with gamma^L * sqrt(d) / (1 - gamma) <= tol.
inline int truncation_length(double gamma, double tol, int reward_dim = 1) {
    if (gamma <= 0.0) return 1;
    const double target = tol * (1.0 - gamma) / std::sqrt(static_cast<double>(reward_dim));
    return std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(gamma))));
}

/// i.i.d. discounted returns of `policy` from mu, truncated at length L
/// chosen so the tail is below `tol`.
inline EmpiricalDistribution monte_carlo_returns(const DiscountedMdp& mdp, const TabularPolicy& policy,
                                                 int m, RngStream& rng, double tol = 1e-4) {
    if (m < 1) throw std::invalid_argument("monte_carlo_returns: m must be >= 1");
    const int L = truncation_length(mdp.gamma, tol);
    Eigen::MatrixXd samples(m, 1);
    for (int i = 0; i < m; ++i) {
        int x = rng.categorical(mdp.initial_dist);
        double z = 0.0;
        double discount = 1.0;
        for (int step = 0; step < L; ++step) {
            const int a = policy.sample(TabularPolicy::obs_of(x), rng);
            z += discount * mdp.sample_reward(x, a, rng);
            if (mdp.gamma == 0.0) break;
            x = mdp.sample_next(x, a, rng);
            discount *= mdp.gamma;
        }
        samples(i, 0) = z;
    }
    return EmpiricalDistribution(std::move(samples));
}

/// Conditional discounted returns started from a fixed (x, a).
inline EmpiricalDistribution monte_carlo_conditional_returns(const DiscountedMdp& mdp,
                                                             const TabularPolicy& policy, int x0, int a0,
                                                             int m, RngStream& rng, double tol = 1e-4) {
    const int L = truncation_length(mdp.gamma, tol);
    Eigen::MatrixXd samples(m, 1);
    for (int i = 0; i < m; ++i) {
        int x = x0;
        int a = a0;
        double z = 0.0;
        double discount = 1.0;
        for (int step = 0; step < L; ++step) {
            z += discount * mdp.sample_reward(x, a, rng);
            if (mdp.gamma == 0.0) break;
            x = mdp.sample_next(x, a, rng);
            a = policy.sample(TabularPolicy::obs_of(x), rng);
            discount *= mdp.gamma;
        }
        samples(i, 0) = z;
    }
    return EmpiricalDistribution(std::move(samples));
}

/// Normalized discounted occupancy d^pi = (1 - gamma) sum_h gamma^{h-1} d^pi_h
/// over (x, a) pairs, by power iteration to within 1e-14.
inline Eigen::VectorXd discounted_occupancy(const DiscountedMdp& mdp, const TabularPolicy& policy) {
    Eigen::VectorXd state_dist = mdp.initial_dist;
    Eigen::VectorXd acc_states = Eigen::VectorXd::Zero(mdp.num_states);
    double discount = 1.0 - mdp.gamma;
    for (int iter = 0; iter < 100000; ++iter) {
        acc_states += discount * state_dist;
        if (discount < 1e-16) break;
        Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.num_states);
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a)
                next += state_dist[x] * policy.prob(x, a) *
                        mdp.transition[static_cast<std::size_t>(a)].row(x).transpose();
        state_dist = next;
        discount *= mdp.gamma;
    }
    Eigen::VectorXd occ(mdp.num_pairs());
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a)
            occ[mdp.pair_index(x, a)] = acc_states[x] * policy.prob(x, a);
    return occ;
}

/// Offline data for the discounted MDP: (x, a) ~ rho, x' ~ P, r ~ r(x, a),
/// no step labels.
inline OfflineDataset generate_discounted_dataset(const DiscountedMdp& mdp, const Eigen::MatrixXd& rho,
                                                  int n, RngStream& rng) {
    mdp.validate();
    Eigen::VectorXd rho_flat(mdp.num_pairs());
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a)
            rho_flat[mdp.pair_index(x, a)] = rho(x, a);
    if (std::abs(rho_flat.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("generate_discounted_dataset: rho must sum to 1");
    std::vector<TransitionTuple> tuples;
    tuples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int pair = rng.categorical(rho_flat);
        const int x = pair / mdp.num_actions;
        const int a = pair % mdp.num_actions;
        TransitionTuple t;
        t.x = TabularPolicy::obs_of(x);
        t.action = a;
        t.reward = Reward::Constant(1, sample(mdp.reward[static_cast<std::size_t>(pair)], rng));
        t.x_next = TabularPolicy::obs_of(mdp.sample_next(x, a, rng));
        tuples.push_back(std::move(t));
    }
    DatasetMeta meta;
    meta.env_id = "discounted";
    meta.reward_dim = 1;
    meta.obs_dim = 1;
    meta.num_actions = mdp.num_actions;
    meta.gamma = mdp.gamma;
    return OfflineDataset(std::move(tuples), std::move(meta));
}

/// Fixed 2-state instance for the infinite-horizon tests.
inline DiscountedMdp fixed_two_state_mdp(double gamma) {
    DiscountedMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.gamma = gamma;
    Eigen::MatrixXd p0(2, 2), p1(2, 2);
    p0 << 0.8, 0.2, //
        0.3, 0.7;
    p1 << 0.4, 0.6, //
        0.6, 0.4;
    mdp.transition = {p0, p1};
    mdp.reward = {
        Gaussian1d{0.15, 0.2},
        Gaussian1d{0.85, 0.2},
        Gaussian1d{0.50, 0.2},
        Gaussian1d{0.30, 0.2},
    };
    mdp.initial_dist = Eigen::Vector2d(0.6, 0.4);
    mdp.validate();
    return mdp;
}

inline TabularPolicy fixed_two_state_policy() {
    Eigen::MatrixXd p(2, 2);
    p << 0.75, 0.25, //
        0.35, 0.65;
    return TabularPolicy(std::move(p));
}

/// Fixed 3-state instance for the contraction suite.
inline DiscountedMdp fixed_three_state_mdp(double gamma) {
    DiscountedMdp mdp;
    mdp.num_states = 3;
    mdp.num_actions = 2;
    mdp.gamma = gamma;
    Eigen::MatrixXd p0(3, 3), p1(3, 3);
    p0 << 0.6, 0.3, 0.1, //
        0.2, 0.5, 0.3,   //
        0.25, 0.25, 0.5;
    p1 << 0.1, 0.6, 0.3, //
        0.4, 0.2, 0.4,   //
        0.3, 0.4, 0.3;
    mdp.transition = {p0, p1};
    mdp.reward = {
        Gaussian1d{0.2, 0.05}, Gaussian1d{0.7, 0.05}, Gaussian1d{0.4, 0.05},
        Gaussian1d{0.9, 0.05}, Gaussian1d{0.1, 0.05}, Gaussian1d{0.6, 0.05},
    };
    mdp.initial_dist = Eigen::Vector3d(0.5, 0.3, 0.2);
    mdp.validate();
    return mdp;
}

inline TabularPolicy fixed_three_state_policy() {
    Eigen::MatrixXd p(3, 2);
    p << 0.6, 0.4, //
        0.3, 0.7,  //
        0.5, 0.5;
    return TabularPolicy(std::move(p));
}

} // namespace dope::env
