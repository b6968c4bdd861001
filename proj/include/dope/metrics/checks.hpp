#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "dope/env/discounted.hpp"
#include "dope/metrics/metrics.hpp"
#include "dope/rng.hpp"

namespace dope::metrics {

struct CheckResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
};

/// Scalar conditional law evaluable per (x, a) through sampling.
using ScalarConditionalSampler = std::function<double(int x, int a, RngStream&)>;

/**
 * Monte-Carlo check of the Bellman contraction inequality
 *   ( E_{x,a ~ d^pi} d_wp^{2p}(T f, T f') )^{1/2p}
 *     <= gamma^{1 - 1/(2p)} ( E_{x,a ~ d^pi} d_wp^{2p}(f, f') )^{1/2p} (1 + tol)
 * on a small discounted tabular MDP. Both Bellman images are sampled with
 * common random numbers so the comparison noise largely cancels; the
 * Wasserstein distances are exact on the m-sample empirical measures.
 */
inline CheckResult check_contraction(const env::DiscountedMdp& mdp, const env::TabularPolicy& policy,
                                     const ScalarConditionalSampler& f, const ScalarConditionalSampler& f_alt,
                                     double order, int m, RngStream& rng, double tol = 0.1) {
    const Eigen::VectorXd occupancy = env::discounted_occupancy(mdp, policy);
    const double exponent = 2.0 * order;
    double lhs_acc = 0.0;
    double rhs_acc = 0.0;
    for (int x = 0; x < mdp.num_states; ++x) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const double weight = occupancy[mdp.pair_index(x, a)];
            if (weight == 0.0) continue;

            Eigen::MatrixXd left(m, 1), right(m, 1), base_left(m, 1), base_right(m, 1);
            for (int i = 0; i < m; ++i) {
                // common draws for the coupled Bellman images
                const double r = mdp.sample_reward(x, a, rng);
                const int x_next = mdp.sample_next(x, a, rng);
                const int a_next = policy.sample(env::TabularPolicy::obs_of(x_next), rng);
                left(i, 0) = r + mdp.gamma * f(x_next, a_next, rng);
                right(i, 0) = r + mdp.gamma * f_alt(x_next, a_next, rng);
                base_left(i, 0) = f(x, a, rng);
                base_right(i, 0) = f_alt(x, a, rng);
            }
            const double d_bellman = exact_wasserstein_p(EmpiricalDistribution(left),
                                                         EmpiricalDistribution(right), order);
            const double d_base = exact_wasserstein_p(EmpiricalDistribution(base_left),
                                                      EmpiricalDistribution(base_right), order);
            lhs_acc += weight * std::pow(d_bellman, exponent);
            rhs_acc += weight * std::pow(d_base, exponent);
        }
    }
    CheckResult out;
    out.lhs = std::pow(lhs_acc, 1.0 / exponent);
    out.rhs = std::pow(rhs_acc, 1.0 / exponent);
    const double factor = std::pow(mdp.gamma, 1.0 - 1.0 / exponent);
    out.pass = out.lhs <= factor * out.rhs * (1.0 + tol) + 1e-12;
    return out;
}

/**
 * Exact check of the dominance inequality d_wp^p <= diam^p * d_tv for 1-d
 * discrete laws: both sides are computed exactly (north-west coupling and
 * L1 weight difference over the union support).
 */
inline CheckResult check_tv_dominance(const Eigen::VectorXd& atoms_p, const Eigen::VectorXd& weights_p,
                                      const Eigen::VectorXd& atoms_q, const Eigen::VectorXd& weights_q,
                                      double order, double diam) {
    CheckResult out;
    out.lhs = exact_ot_cost_weighted_1d(atoms_p, weights_p, atoms_q, weights_q, order);

    std::map<double, double> diff;
    for (Eigen::Index i = 0; i < atoms_p.size(); ++i)
        diff[atoms_p[i]] += weights_p[i];
    for (Eigen::Index i = 0; i < atoms_q.size(); ++i)
        diff[atoms_q[i]] -= weights_q[i];
    double tv = 0.0;
    for (const auto& [atom, delta] : diff)
        tv += std::abs(delta);
    tv *= 0.5;

    out.rhs = std::pow(diam, order) * tv;
    out.pass = out.lhs <= out.rhs + 1e-9;
    return out;
}

namespace detail {

/// Exact CVaR of a discrete 1-d law: the Rockafellar objective is concave
/// and piecewise linear in b, so the max over [0, h_max] is attained at an
/// atom or an endpoint.
inline double cvar_discrete_exact(const std::map<double, double>& law, double tau, double h_max) {
    std::vector<double> candidates{0.0, h_max};
    for (const auto& [atom, weight] : law)
        if (atom >= 0.0 && atom <= h_max) candidates.push_back(atom);
    double best = -std::numeric_limits<double>::infinity();
    for (double b : candidates) {
        double shortfall = 0.0;
        for (const auto& [atom, weight] : law)
            shortfall += weight * std::max(b - atom, 0.0);
        best = std::max(best, b - shortfall / tau);
    }
    return best;
}

inline std::map<double, double> law_of_samples(const EmpiricalDistribution& samples) {
    std::map<double, double> law;
    const double w = 1.0 / static_cast<double>(samples.size());
    for (Eigen::Index i = 0; i < samples.size(); ++i)
        law[samples.samples()(i, 0)] += w;
    return law;
}

} // namespace detail

/**
 * Exact check of the CVaR Lipschitz bound
 *   |CVaR_tau(f) - CVaR_tau(g)| <= (2 h_max / tau) d_tv(f, g)
 * for two 1-d sample multisets, both treated as exact discrete laws.
 */
inline CheckResult check_cvar_lipschitz(const EmpiricalDistribution& f_samples,
                                        const EmpiricalDistribution& g_samples, double tau, double h_max) {
    if (f_samples.dim() != 1 || g_samples.dim() != 1)
        throw std::invalid_argument("check_cvar_lipschitz: needs 1-d samples");
    const auto law_f = detail::law_of_samples(f_samples);
    const auto law_g = detail::law_of_samples(g_samples);
    for (const auto* law : {&law_f, &law_g})
        for (const auto& [atom, weight] : *law)
            if (atom < 0.0 || atom > h_max)
                throw std::invalid_argument("check_cvar_lipschitz: samples must lie in [0, h_max]");

    CheckResult out;
    out.lhs = std::abs(detail::cvar_discrete_exact(law_f, tau, h_max) -
                       detail::cvar_discrete_exact(law_g, tau, h_max));

    std::map<double, double> diff = law_f;
    for (const auto& [atom, weight] : law_g)
        diff[atom] -= weight;
    double tv = 0.0;
    for (const auto& [atom, delta] : diff)
        tv += std::abs(delta);
    tv *= 0.5;

    out.rhs = (2.0 * h_max / tau) * tv;
    out.pass = out.lhs <= out.rhs + 1e-9;
    return out;
}

} // namespace dope::metrics
