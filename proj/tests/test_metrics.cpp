#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dope/env/discounted.hpp"
#include "dope/env/tabular.hpp"
#include "dope/metrics/checks.hpp"
#include "dope/metrics/metrics.hpp"

using namespace dope;
using namespace dope::metrics;

namespace {

EmpiricalDistribution scalars(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values)
        v[i++] = x;
    return EmpiricalDistribution::from_scalars(v);
}

EmpiricalDistribution gaussian_samples(double mean, double sd, int n, RngStream& rng) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = rng.normal(mean, sd);
    return EmpiricalDistribution::from_scalars(v);
}

} // namespace

TEST_CASE("empirical_tv basics") {
    auto spec = HistogramSpec::uniform(1, 100, -1.5, 1.5);
    auto p = scalars({0.1, 0.2, 0.3, -0.5});
    CHECK(empirical_tv(p, p, spec) == 0.0);

    auto q = scalars({1.0, 1.1, 1.2, 1.3});
    CHECK(empirical_tv(p, q, spec) == doctest::Approx(1.0));

    RngStream rng(1);
    auto a = gaussian_samples(0.0, 0.1, 20000, rng);
    auto b = gaussian_samples(1.0, 0.1, 20000, rng);
    CHECK(empirical_tv(a, b, spec) >= 0.99); // analytic overlap is ~0 at 10 sigma
}

TEST_CASE("empirical_tv is symmetric and bounded") {
    auto spec = HistogramSpec::uniform(1, 20, -2, 2);
    RngStream rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = gaussian_samples(rng.uniform(-1, 1), 0.3, 500, rng);
        auto q = gaussian_samples(rng.uniform(-1, 1), 0.3, 500, rng);
        const double pq = empirical_tv(p, q, spec);
        const double qp = empirical_tv(q, p, spec);
        CHECK(pq == doctest::Approx(qp));
        CHECK(pq >= 0.0);
        CHECK(pq <= 1.0);
    }
}

TEST_CASE("wasserstein1_1d basics") {
    auto p = scalars({0.4, 0.1, 0.9});
    CHECK(wasserstein1_1d(p, p) == 0.0);
    CHECK(wasserstein1_1d(scalars({0.2, 0.2}), scalars({0.9, 0.9})) == doctest::Approx(0.7));

    RngStream rng(3);
    auto base = gaussian_samples(0.0, 1.0, 1000, rng);
    Eigen::VectorXd shifted = base.samples().col(0).array() + 0.37;
    CHECK(wasserstein1_1d(base, EmpiricalDistribution::from_scalars(shifted)) ==
          doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("wasserstein1_1d subsamples the larger side deterministically") {
    RngStream rng(4);
    auto p = gaussian_samples(0.0, 1.0, 2000, rng);
    auto q = gaussian_samples(0.0, 1.0, 500, rng);
    const double d1 = wasserstein1_1d(p, q);
    const double d2 = wasserstein1_1d(p, q);
    CHECK(d1 == d2);
    CHECK(d1 < 0.2);
}

TEST_CASE("exact_wasserstein_p agrees with the sorted coupling in 1-d") {
    RngStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 2 + static_cast<int>(rng.uniform_index(30));
        Eigen::MatrixXd a(m, 1), b(m, 1);
        for (int i = 0; i < m; ++i) {
            a(i, 0) = rng.uniform(-2, 2);
            b(i, 0) = rng.uniform(-2, 2);
        }
        EmpiricalDistribution p(a), q(b);
        CHECK(exact_wasserstein_p(p, q, 1.0) == doctest::Approx(wasserstein1_1d(p, q)).epsilon(1e-9));
    }
}

TEST_CASE("exact_wasserstein_p solves the 2-point 2-d instance by brute force") {
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0, 0, //
        1, 0;
    b << 0, 0, //
        0, 1;
    EmpiricalDistribution p(a), q(b);
    // both permutations enumerated: identity costs 0 + sqrt(2), swap costs 1 + 1
    const double expected = std::min(std::sqrt(2.0), 2.0) / 2.0;
    CHECK(exact_wasserstein_p(p, q, 1.0) == doctest::Approx(expected));
    CHECK(exact_wasserstein_p(p, p, 1.0) == 0.0);
}

TEST_CASE("exact_wasserstein_p matches brute-force assignment on random small 2-d sets") {
    RngStream rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 3;
        Eigen::MatrixXd a(m, 2), b(m, 2);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < 2; ++j) {
                a(i, j) = rng.uniform(-1, 1);
                b(i, j) = rng.uniform(-1, 1);
            }
        // brute force over all 6 permutations
        std::vector<int> perm{0, 1, 2};
        double best = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (int i = 0; i < m; ++i)
                cost += (a.row(i) - b.row(perm[static_cast<std::size_t>(i)])).norm();
            best = std::min(best, cost / m);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(exact_wasserstein_p(EmpiricalDistribution(a), EmpiricalDistribution(b), 1.0) ==
              doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("exact_wasserstein_p triangle inequality on random discrete triples") {
    RngStream rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 8;
        Eigen::MatrixXd a(m, 1), b(m, 1), c(m, 1);
        for (int i = 0; i < m; ++i) {
            a(i, 0) = rng.uniform(0, 1);
            b(i, 0) = rng.uniform(0, 1);
            c(i, 0) = rng.uniform(0, 1);
        }
        EmpiricalDistribution p(a), q(b), r(c);
        for (double order : {1.0, 2.0}) {
            const double pq = exact_wasserstein_p(p, q, order);
            const double qr = exact_wasserstein_p(q, r, order);
            const double pr = exact_wasserstein_p(p, r, order);
            CHECK(pr <= pq + qr + 1e-9);
        }
    }
}

TEST_CASE("exact_wasserstein_p refuses oversized inputs") {
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(300, 1);
    EmpiricalDistribution p(big), q(big);
    CHECK_THROWS_AS(exact_wasserstein_p(p, q, 1.0), std::invalid_argument);
}

TEST_CASE("cvar: point mass, tau = 1, and the uniform law") {
    auto point = scalars({0.42, 0.42, 0.42});
    CHECK(cvar(point, 0.3) == doctest::Approx(0.42).epsilon(1e-3));

    RngStream rng(8);
    Eigen::VectorXd u(10000);
    for (int i = 0; i < u.size(); ++i)
        u[i] = rng.uniform();
    auto uniform = EmpiricalDistribution::from_scalars(u);
    // tau = 1: b* at the essential sup makes the objective the mean
    CHECK(cvar(uniform, 1.0) == doctest::Approx(u.mean()).epsilon(1e-3));
    // analytic objective for U[0,1], tau = 1/2: max_b b - b^2 = 1/4 at b = 1/2
    CHECK(std::abs(cvar(uniform, 0.5) - 0.25) < 0.02);
}

TEST_CASE("apply_bellman degenerate cases") {
    env::DiscountedMdp mdp = env::fixed_two_state_mdp(0.9);
    env::TabularPolicy policy = env::fixed_two_state_policy();

    BellmanApplication app;
    app.step = [&mdp](const Observation& x, ActionId a, RngStream& rng) {
        const int xi = env::TabularPolicy::state_of(x);
        Reward r = Reward::Constant(1, 0.25); // deterministic reward c
        return std::make_pair(r, env::TabularPolicy::obs_of(mdp.sample_next(xi, a, rng)));
    };
    app.policy = &policy;
    app.base = [](const Observation&, ActionId, RngStream&) { return Eigen::VectorXd::Zero(1); };
    app.gamma = 0.9;

    RngStream rng(9);
    auto out = apply_bellman(app, env::TabularPolicy::obs_of(0), 0, 500, rng);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        CHECK(out.samples()(i, 0) == doctest::Approx(0.25)); // f point mass at 0

    app.gamma = 0.0; // pure reward draws
    app.base = [](const Observation&, ActionId, RngStream&) {
        return Eigen::VectorXd::Constant(1, 123.0);
    };
    auto rewards_only = apply_bellman(app, env::TabularPolicy::obs_of(1), 1, 100, rng);
    for (Eigen::Index i = 0; i < rewards_only.size(); ++i)
        CHECK(rewards_only.samples()(i, 0) == doctest::Approx(0.25));
}

TEST_CASE("Bellman fixed point on the tabular DP oracle") {
    // T^pi Z^pi_{h+1} = Z^pi_h checked in TV at m = 1e5 for every h at a
    // fixed (x, a), exercising the mixture sampler machinery it relies on.
    const env::TabularMdp mdp = env::fixed_test_mdp();
    const env::TabularPolicy policy = env::fixed_test_policy();
    const auto mw = env::tabular_exact_return_dist(mdp, policy);
    const auto spec = HistogramSpec::uniform(1, 100, -0.3, 1.3);
    const int m = 100000;

    auto sample_mixture = [&mdp](const Eigen::VectorXd& weights, int count, RngStream& rng) {
        Eigen::MatrixXd out(count, 1);
        for (int i = 0; i < count; ++i) {
            const int pair = rng.categorical(weights);
            out(i, 0) = sample(mdp.terminal_reward[static_cast<std::size_t>(pair)], rng);
        }
        return EmpiricalDistribution(std::move(out));
    };

    RngStream rng(10);
    for (int h = 1; h < mdp.horizon; ++h) {
        BellmanApplication app;
        app.step = [&mdp](const Observation& x, ActionId a, RngStream& r) {
            const int xi = env::TabularPolicy::state_of(x);
            return std::make_pair(Reward::Zero(1), // reward only arrives at step H
                                  env::TabularPolicy::obs_of(mdp.sample_next(xi, a, r)));
        };
        app.policy = &policy;
        const Eigen::MatrixXd& next_weights = mw.at_step(h + 1);
        app.base = [&](const Observation& x, ActionId a, RngStream& r) {
            const int xi = env::TabularPolicy::state_of(x);
            const int pair = r.categorical(next_weights.row(mdp.pair_index(xi, a)).transpose());
            return Eigen::VectorXd::Constant(
                1, sample(mdp.terminal_reward[static_cast<std::size_t>(pair)], r));
        };
        app.gamma.reset(); // finite-horizon shift z = r + y

        const int x0 = 2, a0 = 1;
        auto image = apply_bellman(app, env::TabularPolicy::obs_of(x0), a0, m, rng);
        auto truth = sample_mixture(mw.at_step(h).row(mdp.pair_index(x0, a0)).transpose(), m, rng);
        CHECK(empirical_tv(image, truth, spec) <= 0.02);
    }
}

TEST_CASE("contraction check: identical laws give zero on both sides") {
    env::DiscountedMdp mdp = env::fixed_three_state_mdp(0.9);
    env::TabularPolicy policy = env::fixed_three_state_policy();
    Eigen::MatrixXd values(3, 2);
    values << 0.2, 0.8, //
        0.5, 0.1,       //
        0.9, 0.4;
    auto f = [&values](int x, int a, RngStream&) { return values(x, a); };
    RngStream rng(11);
    auto result = check_contraction(mdp, policy, f, f, 1.0, 64, rng);
    CHECK(result.lhs == 0.0);
    CHECK(result.rhs == 0.0);
    CHECK(result.pass);
}

TEST_CASE("contraction holds on random point-mass pairs") {
    env::TabularPolicy policy = env::fixed_three_state_policy();
    RngStream rng(12);
    for (double gamma : {0.5, 0.9}) {
        env::DiscountedMdp mdp = env::fixed_three_state_mdp(gamma);
        for (double order : {1.0, 2.0}) {
            int passes = 0;
            const int trials = 25;
            for (int trial = 0; trial < trials; ++trial) {
                Eigen::MatrixXd va(3, 2), vb(3, 2);
                for (int x = 0; x < 3; ++x)
                    for (int a = 0; a < 2; ++a) {
                        va(x, a) = rng.uniform(0, 10);
                        vb(x, a) = rng.uniform(0, 10);
                    }
                auto f = [&va](int x, int a, RngStream&) { return va(x, a); };
                auto g = [&vb](int x, int a, RngStream&) { return vb(x, a); };
                auto result = check_contraction(mdp, policy, f, g, order, 128, rng);
                if (result.pass) ++passes;
            }
            CHECK(passes >= trials - 1);
        }
    }
}

TEST_CASE("contraction ratio shrinks with gamma") {
    env::TabularPolicy policy = env::fixed_three_state_policy();
    env::DiscountedMdp mdp = env::fixed_three_state_mdp(0.1);
    RngStream rng(13);
    Eigen::MatrixXd va(3, 2), vb(3, 2);
    for (int x = 0; x < 3; ++x)
        for (int a = 0; a < 2; ++a) {
            va(x, a) = rng.uniform(0, 10);
            vb(x, a) = rng.uniform(0, 10);
        }
    auto f = [&va](int x, int a, RngStream&) { return va(x, a); };
    auto g = [&vb](int x, int a, RngStream&) { return vb(x, a); };
    auto result = check_contraction(mdp, policy, f, g, 1.0, 128, rng);
    CHECK(result.lhs / result.rhs <= std::sqrt(0.1) + 0.1);
}

TEST_CASE("tv dominance: trivial and extreme cases") {
    Eigen::VectorXd atoms(1), weights(1);
    atoms << 0.5;
    weights << 1.0;
    auto same = check_tv_dominance(atoms, weights, atoms, weights, 1.0, 1.0);
    CHECK(same.lhs == 0.0);
    CHECK(same.pass);

    Eigen::VectorXd a0(1), a1(1);
    a0 << 0.0;
    a1 << 3.0;
    auto extreme = check_tv_dominance(a0, weights, a1, weights, 1.0, 3.0);
    CHECK(extreme.lhs == doctest::Approx(3.0)); // saturates the bound
    CHECK(extreme.rhs == doctest::Approx(3.0));
    CHECK(extreme.pass);
}

TEST_CASE("tv dominance holds exactly on random 8-atom pairs") {
    RngStream rng(14);
    for (double order : {1.0, 2.0, 3.0}) {
        for (int trial = 0; trial < 70; ++trial) {
            const int atoms_n = 8;
            Eigen::VectorXd support(atoms_n), wp(atoms_n), wq(atoms_n);
            for (int i = 0; i < atoms_n; ++i) {
                support[i] = rng.uniform(0, 2);
                wp[i] = rng.uniform() + 1e-3;
                wq[i] = rng.uniform() + 1e-3;
            }
            wp /= wp.sum();
            wq /= wq.sum();
            const double diam = support.maxCoeff() - support.minCoeff();
            auto result = check_tv_dominance(support, wp, support, wq, order, diam);
            CHECK(result.pass);
        }
    }
}

TEST_CASE("cvar lipschitz: trivial cases") {
    auto f = scalars({0.5, 0.5});
    auto same = check_cvar_lipschitz(f, f, 0.5, 1.0);
    CHECK(same.lhs == 0.0);
    CHECK(same.pass);

    auto zero = scalars({0.0});
    auto top = scalars({2.0});
    auto extreme = check_cvar_lipschitz(zero, top, 0.5, 2.0);
    CHECK(extreme.lhs == doctest::Approx(2.0));
    CHECK(extreme.rhs == doctest::Approx(8.0)); // (2H / tau) * 1 with slack 4x
    CHECK(extreme.pass);
}

TEST_CASE("cvar lipschitz holds on random discrete pairs") {
    RngStream rng(15);
    const double h_max = 4.0;
    for (double tau : {0.1, 0.5, 1.0}) {
        for (int trial = 0; trial < 35; ++trial) {
            const int n = 32;
            Eigen::VectorXd f(n), g(n);
            for (int i = 0; i < n; ++i) {
                f[i] = rng.uniform(0, h_max);
                g[i] = rng.uniform(0, h_max);
            }
            auto result = check_cvar_lipschitz(EmpiricalDistribution::from_scalars(f),
                                               EmpiricalDistribution::from_scalars(g), tau, h_max);
            CHECK(result.pass);
        }
    }
}

TEST_CASE("metric input validation") {
    auto spec = HistogramSpec::uniform(1, 10, 0, 1);
    Eigen::MatrixXd two_d = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS(empirical_tv(EmpiricalDistribution(two_d), EmpiricalDistribution(two_d), spec));
    CHECK_THROWS(wasserstein1_1d(EmpiricalDistribution(two_d), EmpiricalDistribution(two_d)));
    CHECK_THROWS(cvar(EmpiricalDistribution(two_d), 0.5));
    CHECK_THROWS(cvar(scalars({0.1}), 0.0));
}
