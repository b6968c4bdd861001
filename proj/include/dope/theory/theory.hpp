#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dope/density/tabular_mixture.hpp"
#include "dope/env/discounted.hpp"
#include "dope/env/tabular.hpp"
#include "dope/fle/fle.hpp"
#include "dope/metrics/checks.hpp"
#include "dope/metrics/metrics.hpp"

namespace dope::theory {

/// Density-ratio coverage constant: sup_{h,x,a} d^pi_h(x,a) / rho(x,a),
/// with infinity when rho misses visited support. This upper-bounds the
/// function-class-relative constant the analysis actually needs.
struct CoverageEstimate {
    double constant = 1.0;
    bool infinite = false;
};

inline CoverageEstimate coverage_constant_tabular(const env::TabularMdp& mdp,
                                                  const env::TabularPolicy& policy,
                                                  const Eigen::MatrixXd& rho) {
    const Eigen::MatrixXd occ = env::state_action_occupancy(mdp, policy);
    CoverageEstimate out;
    out.constant = 0.0;
    for (int h = 1; h <= mdp.horizon; ++h) {
        for (int x = 0; x < mdp.num_states; ++x) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double visit = occ(h - 1, mdp.pair_index(x, a));
                if (visit <= 0.0) continue;
                const double offline = rho(x, a);
                if (offline <= 0.0) {
                    out.infinite = true;
                    out.constant = std::numeric_limits<double>::infinity();
                    return out;
                }
                out.constant = std::max(out.constant, visit / offline);
            }
        }
    }
    return out;
}

/// Per-step offline distributions rho_h; the ratio is taken stepwise.
inline CoverageEstimate coverage_constant_tabular(const env::TabularMdp& mdp,
                                                  const env::TabularPolicy& policy,
                                                  const std::vector<Eigen::MatrixXd>& rho_per_step) {
    const Eigen::MatrixXd occ = env::state_action_occupancy(mdp, policy);
    CoverageEstimate out;
    out.constant = 0.0;
    for (int h = 1; h <= mdp.horizon; ++h) {
        const Eigen::MatrixXd& rho = rho_per_step[static_cast<std::size_t>(h - 1)];
        for (int x = 0; x < mdp.num_states; ++x) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double visit = occ(h - 1, mdp.pair_index(x, a));
                if (visit <= 0.0) continue;
                const double offline = rho(x, a);
                if (offline <= 0.0) {
                    out.infinite = true;
                    out.constant = std::numeric_limits<double>::infinity();
                    return out;
                }
                out.constant = std::max(out.constant, visit / offline);
            }
        }
    }
    return out;
}

/// Default optimizer settings for the exact mixture class.
inline density::OptimizerConfig tabular_mixture_opt() {
    density::OptimizerConfig opt;
    opt.step_size = 0.5;
    opt.iterations = 500;
    return opt;
}

/// Return box wide enough for the tabular test dictionaries.
inline density::Box tabular_return_box() { return density::Box::cube(1, -0.5, 1.5); }

/**
 * One finite-horizon FLE run on a sparse-reward tabular MDP with the exact
 * mixture class, evaluated by quadrature: TV between the estimator mixture
 * E_{mu, pi} f_1(x, a) and the DP-exact Z^pi over the shared dictionary.
 */
inline double fle_tabular_tv(const env::TabularMdp& mdp, const env::TabularPolicy& policy, int n,
                             std::uint64_t seed, const density::OptimizerConfig& opt = tabular_mixture_opt()) {
    RngStream root(seed);
    const Eigen::MatrixXd rho =
        Eigen::MatrixXd::Constant(mdp.num_states, mdp.num_actions, 1.0 / mdp.num_pairs());
    RngStream data_rng = root.substream("data");
    const OfflineDataset data = env::generate_tabular_dataset(mdp, rho, n, data_rng);

    auto fmap = std::make_shared<density::TabularFeatureMap>(mdp.num_states);
    const density::Box box = tabular_return_box();
    fle::FleFiniteConfig config;
    config.horizon = mdp.horizon;
    config.opt = opt;
    config.seed = root.substream("fle").seed();

    auto factory = [&](int) {
        return std::make_unique<density::TabularMixtureModel>(fmap, mdp.num_actions, box,
                                                              mdp.terminal_reward);
    };
    auto initial = [&mdp, &policy](RngStream& rng) {
        const int x = rng.categorical(mdp.initial_dist);
        const Observation obs = env::TabularPolicy::obs_of(x);
        return std::make_pair(obs, policy.sample(obs, rng));
    };
    const fle::FleRun run = fle_finite(data, config, factory, policy, initial);

    // estimator mixture weights: sum_x mu(x) sum_a pi(a | x) w_hat(x, a)
    const auto& f1 = dynamic_cast<const density::TabularMixtureModel&>(run.estimator.model_at_step(1));
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(mdp.num_pairs());
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a)
            fitted += mdp.initial_dist[x] * policy.prob(x, a) *
                      f1.weights_of_block(x * mdp.num_actions + a);

    const auto mw = env::tabular_exact_return_dist(mdp, policy);
    const Eigen::VectorXd exact = env::initial_mixture_weights(mdp, policy, mw);
    return mixture_tv_quadrature(mdp.terminal_reward, fitted, exact, box.lo[0], box.hi[0]);
}

struct SweepRow {
    int n = 0;
    std::vector<double> errors; // per seed
    double median = 0.0;
};

/// Median-over-seeds TV error against the exact oracle per dataset size.
inline std::vector<SweepRow> error_rate_sweep(const env::TabularMdp& mdp, const env::TabularPolicy& policy,
                                              const std::vector<int>& n_list,
                                              const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepRow> rows;
    for (int n : n_list) {
        SweepRow row;
        row.n = n;
        for (std::uint64_t seed : seeds)
            row.errors.push_back(fle_tabular_tv(mdp, policy, n, seed));
        std::vector<double> sorted = row.errors;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t mid = sorted.size() / 2;
        row.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct TheoryRow {
    std::string check;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    bool pass = false;
};

/**
 * The bundled executable checks: contraction, dominance, CVaR Lipschitz,
 * Bellman fixed point, coverage report, and the error-vs-n monotonicity.
 * Each entry compares a measured lhs against its bound rhs.
 */
inline std::vector<TheoryRow> run_theory_suite(std::uint64_t seed = 2024) {
    std::vector<TheoryRow> rows;
    RngStream root(seed);

    // contraction: >= 95/100 random point-mass pairs per (p, gamma)
    {
        const env::TabularPolicy policy = env::fixed_three_state_policy();
        for (double gamma : {0.5, 0.9}) {
            const env::DiscountedMdp mdp = env::fixed_three_state_mdp(gamma);
            for (double order : {1.0, 2.0}) {
                RngStream rng = root.substream("contraction/" + std::to_string(gamma) + "/" +
                                               std::to_string(order));
                int passes = 0;
                for (int trial = 0; trial < 100; ++trial) {
                    Eigen::MatrixXd va(3, 2), vb(3, 2);
                    for (int x = 0; x < 3; ++x)
                        for (int a = 0; a < 2; ++a) {
                            va(x, a) = rng.uniform(0.0, 1.0 / (1.0 - gamma));
                            vb(x, a) = rng.uniform(0.0, 1.0 / (1.0 - gamma));
                        }
                    auto f = [&va](int x, int a, RngStream&) { return va(x, a); };
                    auto g = [&vb](int x, int a, RngStream&) { return vb(x, a); };
                    if (metrics::check_contraction(mdp, policy, f, g, order, 128, rng).pass) ++passes;
                }
                TheoryRow row;
                row.check = "contraction_p" + std::to_string(static_cast<int>(order)) + "_gamma" +
                            std::to_string(gamma).substr(0, 3);
                row.lhs = passes;
                row.rhs = 95;
                row.margin = passes - 95;
                row.pass = passes >= 95;
                rows.push_back(row);
            }
        }
    }

    // dominance: 200/200 exact discrete pairs per order
    for (double order : {1.0, 2.0, 3.0}) {
        RngStream rng = root.substream("dominance/" + std::to_string(order));
        int passes = 0;
        for (int trial = 0; trial < 200; ++trial) {
            const int atoms_n = 8;
            Eigen::VectorXd support(atoms_n), wp(atoms_n), wq(atoms_n);
            for (int i = 0; i < atoms_n; ++i) {
                support[i] = rng.uniform(0.0, 2.0);
                wp[i] = rng.uniform() + 1e-3;
                wq[i] = rng.uniform() + 1e-3;
            }
            wp /= wp.sum();
            wq /= wq.sum();
            const double diam = support.maxCoeff() - support.minCoeff();
            if (metrics::check_tv_dominance(support, wp, support, wq, order, diam).pass) ++passes;
        }
        TheoryRow row;
        row.check = "dominance_p" + std::to_string(static_cast<int>(order));
        row.lhs = passes;
        row.rhs = 200;
        row.margin = passes - 200;
        row.pass = passes == 200;
        rows.push_back(row);
    }

    // CVaR Lipschitz: 100/100 exact discrete pairs per tau
    for (double tau : {0.1, 0.5, 1.0}) {
        RngStream rng = root.substream("cvar/" + std::to_string(tau));
        const double h_max = 4.0;
        int passes = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const int n = 32;
            Eigen::VectorXd f(n), g(n);
            for (int i = 0; i < n; ++i) {
                f[i] = rng.uniform(0.0, h_max);
                g[i] = rng.uniform(0.0, h_max);
            }
            if (metrics::check_cvar_lipschitz(EmpiricalDistribution::from_scalars(f),
                                              EmpiricalDistribution::from_scalars(g), tau, h_max)
                    .pass)
                ++passes;
        }
        TheoryRow row;
        row.check = "cvar_lipschitz_tau" + std::to_string(tau).substr(0, 3);
        row.lhs = passes;
        row.rhs = 100;
        row.margin = passes - 100;
        row.pass = passes == 100;
        rows.push_back(row);
    }

    // Bellman fixed point: TV(T Z_{h+1}, Z_h) <= 0.02 at m = 1e5 for every h
    {
        const env::TabularMdp mdp = env::fixed_test_mdp();
        const env::TabularPolicy policy = env::fixed_test_policy();
        const auto mw = env::tabular_exact_return_dist(mdp, policy);
        const auto spec = metrics::HistogramSpec::uniform(1, 100, -0.3, 1.3);
        const int m = 100000;
        RngStream rng = root.substream("bellman_fixed_point");
        for (int h = 1; h < mdp.horizon; ++h) {
            double worst = 0.0;
            for (int x = 0; x < mdp.num_states; ++x) {
                for (int a = 0; a < mdp.num_actions; ++a) {
                    metrics::BellmanApplication app;
                    app.step = [&mdp](const Observation& ox, ActionId oa, RngStream& r) {
                        const int xi = env::TabularPolicy::state_of(ox);
                        return std::make_pair(Reward::Zero(1),
                                              env::TabularPolicy::obs_of(mdp.sample_next(xi, oa, r)));
                    };
                    app.policy = &policy;
                    const Eigen::MatrixXd& next_weights = mw.at_step(h + 1);
                    app.base = [&](const Observation& ox, ActionId oa, RngStream& r) {
                        const int xi = env::TabularPolicy::state_of(ox);
                        const int pair = r.categorical(next_weights.row(mdp.pair_index(xi, oa)).transpose());
                        return Eigen::VectorXd::Constant(
                            1, sample(mdp.terminal_reward[static_cast<std::size_t>(pair)], r));
                    };
                    auto image = metrics::apply_bellman(app, env::TabularPolicy::obs_of(x), a, m, rng);

                    Eigen::MatrixXd truth(m, 1);
                    const Eigen::VectorXd weights = mw.at_step(h).row(mdp.pair_index(x, a)).transpose();
                    for (int i = 0; i < m; ++i) {
                        const int pair = rng.categorical(weights);
                        truth(i, 0) = sample(mdp.terminal_reward[static_cast<std::size_t>(pair)], rng);
                    }
                    worst = std::max(
                        worst, metrics::empirical_tv(image, EmpiricalDistribution(std::move(truth)), spec));
                }
            }
            TheoryRow row;
            row.check = "bellman_fixed_point_h" + std::to_string(h);
            row.lhs = worst;
            row.rhs = 0.02;
            row.margin = 0.02 - worst;
            row.pass = worst <= 0.02;
            rows.push_back(row);
        }
    }

    // coverage constant under the uniform offline distribution (reported)
    {
        const env::TabularMdp mdp = env::fixed_test_mdp();
        const env::TabularPolicy policy = env::fixed_test_policy();
        const Eigen::MatrixXd rho =
            Eigen::MatrixXd::Constant(mdp.num_states, mdp.num_actions, 1.0 / mdp.num_pairs());
        const CoverageEstimate cov = coverage_constant_tabular(mdp, policy, rho);
        TheoryRow row;
        row.check = "coverage_constant";
        row.lhs = cov.constant;
        row.rhs = std::numeric_limits<double>::infinity();
        row.margin = 0.0;
        row.pass = !cov.infinite; // uniform rho has full support
        rows.push_back(row);
    }

    // error-vs-n monotonicity: median TV non-increasing over {5k, 20k, 80k}
    {
        const env::TabularMdp mdp = env::fixed_test_mdp();
        const env::TabularPolicy policy = env::fixed_test_policy();
        const std::vector<std::uint64_t> seeds{11, 12, 13, 14, 15};
        const auto sweep = error_rate_sweep(mdp, policy, {5000, 20000, 80000}, seeds);
        bool monotone = true;
        for (std::size_t i = 0; i + 1 < sweep.size(); ++i)
            monotone = monotone && sweep[i + 1].median <= sweep[i].median + 1e-12;
        for (const auto& row : sweep) {
            TheoryRow r;
            r.check = "error_sweep_n" + std::to_string(row.n);
            r.lhs = row.median;
            r.rhs = 1.0;
            r.margin = 1.0 - row.median;
            r.pass = row.median <= 1.0;
            rows.push_back(r);
        }
        TheoryRow r;
        r.check = "error_sweep_monotone";
        r.lhs = monotone ? 1.0 : 0.0;
        r.rhs = 1.0;
        r.margin = 0.0;
        r.pass = monotone;
        rows.push_back(r);
    }

    return rows;
}

} // namespace dope::theory
