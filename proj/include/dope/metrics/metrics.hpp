#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dope/metrics/assignment.hpp"
#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"

namespace dope::metrics {

/// Per-dimension histogram layout. Samples outside the range are clipped
/// into the edge bins.
struct HistogramSpec {
    std::vector<int> bins;
    std::vector<std::pair<double, double>> range;

    static HistogramSpec uniform(int dim, int bins_per_dim, double lo, double hi) {
        HistogramSpec spec;
        spec.bins.assign(static_cast<std::size_t>(dim), bins_per_dim);
        spec.range.assign(static_cast<std::size_t>(dim), {lo, hi});
        return spec;
    }

    int dim() const { return static_cast<int>(bins.size()); }

    std::size_t total_bins() const {
        std::size_t n = 1;
        for (int b : bins)
            n *= static_cast<std::size_t>(b);
        return n;
    }

    void validate() const {
        if (bins.empty() || bins.size() != range.size())
            throw std::invalid_argument("HistogramSpec: inconsistent layout");
        for (std::size_t j = 0; j < bins.size(); ++j) {
            if (bins[j] < 1) throw std::invalid_argument("HistogramSpec: bin count must be >= 1");
            if (!(range[j].second > range[j].first))
                throw std::invalid_argument("HistogramSpec: degenerate range");
        }
    }
};

namespace detail {

inline Eigen::VectorXd normalized_histogram(const EmpiricalDistribution& dist, const HistogramSpec& spec,
                                            std::size_t* clipped = nullptr) {
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.total_bins()));
    const auto& samples = dist.samples();
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        std::size_t flat = 0;
        for (int j = 0; j < spec.dim(); ++j) {
            const auto [lo, hi] = spec.range[static_cast<std::size_t>(j)];
            const int nb = spec.bins[static_cast<std::size_t>(j)];
            const double v = samples(i, j);
            int idx = static_cast<int>(std::floor((v - lo) / (hi - lo) * nb));
            if (idx < 0 || idx >= nb) {
                if (clipped) ++*clipped;
                idx = std::clamp(idx, 0, nb - 1);
            }
            flat = flat * static_cast<std::size_t>(nb) + static_cast<std::size_t>(idx);
        }
        hist[static_cast<Eigen::Index>(flat)] += 1.0;
    }
    return hist / static_cast<double>(samples.rows());
}

} // namespace detail

/// Histogram total variation distance: 0.5 * sum_b |p_b - q_b| over the
/// normalized histograms of the two sample clouds.
inline double empirical_tv(const EmpiricalDistribution& p, const EmpiricalDistribution& q,
                           const HistogramSpec& spec) {
    spec.validate();
    if (p.dim() != q.dim() || p.dim() != spec.dim())
        throw std::invalid_argument("empirical_tv: dimension mismatch");
    std::size_t clipped = 0;
    const Eigen::VectorXd hp = detail::normalized_histogram(p, spec, &clipped);
    const Eigen::VectorXd hq = detail::normalized_histogram(q, spec, &clipped);
    if (clipped > 0)
        std::cerr << "empirical_tv: " << clipped << " sample(s) outside histogram range were clipped\n";
    return 0.5 * (hp - hq).cwiseAbs().sum();
}

/**
 * Exact 1-Wasserstein distance between equal-size 1-d empirical measures:
 * the mean absolute difference of the sorted samples. If the sizes differ,
 * the larger side is subsampled without replacement under a seed derived
 * from the two sizes.
 */
inline double wasserstein1_1d(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
    if (p.dim() != 1 || q.dim() != 1) throw std::invalid_argument("wasserstein1_1d: needs 1-d samples");
    std::vector<double> a(p.samples().col(0).data(), p.samples().col(0).data() + p.size());
    std::vector<double> b(q.samples().col(0).data(), q.samples().col(0).data() + q.size());
    if (a.size() != b.size()) {
        RngStream rng(0x57315531ULL ^ (a.size() * 0x9E3779B9ULL) ^ b.size());
        auto shrink = [&rng](std::vector<double>& v, std::size_t target) {
            rng.shuffle(v);
            v.resize(target);
        };
        if (a.size() > b.size()) shrink(a, b.size());
        else shrink(b, a.size());
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

/**
 * Exact p-Wasserstein distance between equal-size empirical measures via
 * optimal assignment; cost is ||x - y||^p, distance the p-th root of the
 * mean matched cost. Capped at 256 samples; larger 1-d inputs should use
 * wasserstein1_1d.
 */
inline double exact_wasserstein_p(const EmpiricalDistribution& p, const EmpiricalDistribution& q,
                                  double order) {
    if (order < 1.0) throw std::invalid_argument("exact_wasserstein_p: order must be >= 1");
    if (p.dim() != q.dim()) throw std::invalid_argument("exact_wasserstein_p: dimension mismatch");
    if (p.size() != q.size()) throw std::invalid_argument("exact_wasserstein_p: sample counts must match");
    const Eigen::Index m = p.size();
    if (m > 256)
        throw std::invalid_argument(
            "exact_wasserstein_p: more than 256 samples; use wasserstein1_1d for large 1-d inputs");

    if (p.dim() == 1) {
        // sorted coupling is the optimal assignment in 1-d
        std::vector<double> a(p.samples().col(0).data(), p.samples().col(0).data() + m);
        std::vector<double> b(q.samples().col(0).data(), q.samples().col(0).data() + m);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        double acc = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
            acc += std::pow(std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]), order);
        return std::pow(acc / static_cast<double>(m), 1.0 / order);
    }

    Eigen::MatrixXd cost(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            cost(i, j) = std::pow((p.samples().row(i) - q.samples().row(j)).norm(), order);
    const double total = min_cost_assignment(cost);
    return std::pow(total / static_cast<double>(m), 1.0 / order);
}

/**
 * Exact p-Wasserstein cost d_wp^p between weighted 1-d discrete laws by the
 * north-west corner coupling on sorted atoms, which is optimal for convex
 * costs in one dimension. At most 64 atoms per side.
 */
inline double exact_ot_cost_weighted_1d(Eigen::VectorXd atoms_p, Eigen::VectorXd weights_p,
                                        Eigen::VectorXd atoms_q, Eigen::VectorXd weights_q, double order) {
    if (atoms_p.size() > 64 || atoms_q.size() > 64)
        throw std::invalid_argument("exact_ot_cost_weighted_1d: more than 64 atoms");
    if (std::abs(weights_p.sum() - 1.0) > 1e-9 || std::abs(weights_q.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("exact_ot_cost_weighted_1d: weights must sum to 1");
    auto sort_both = [](Eigen::VectorXd& atoms, Eigen::VectorXd& weights) {
        std::vector<int> idx(static_cast<std::size_t>(atoms.size()));
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&atoms](int i, int j) { return atoms[i] < atoms[j]; });
        Eigen::VectorXd a(atoms.size()), w(atoms.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            a[static_cast<Eigen::Index>(i)] = atoms[idx[i]];
            w[static_cast<Eigen::Index>(i)] = weights[idx[i]];
        }
        atoms = a;
        weights = w;
    };
    sort_both(atoms_p, weights_p);
    sort_both(atoms_q, weights_q);

    double cost = 0.0;
    Eigen::Index i = 0, j = 0;
    double remaining_p = weights_p[0], remaining_q = weights_q[0];
    while (true) {
        const double moved = std::min(remaining_p, remaining_q);
        cost += moved * std::pow(std::abs(atoms_p[i] - atoms_q[j]), order);
        remaining_p -= moved;
        remaining_q -= moved;
        if (remaining_p <= 1e-15) {
            if (++i >= atoms_p.size()) break;
            remaining_p = weights_p[i];
        }
        if (remaining_q <= 1e-15) {
            if (++j >= atoms_q.size()) break;
            remaining_q = weights_q[j];
        }
    }
    return cost;
}

/// CVaR query: tail level tau in (0, 1].
struct CvarQuery {
    double tau = 0.5;
};

/**
 * CVaR_tau of a 1-d sample set via the Rockafellar form
 *   max_b ( b - mean(max(b - z, 0)) / tau )
 * maximized over a uniform grid spanning the sample range padded by one
 * grid step on each side.
 */
inline double cvar(const EmpiricalDistribution& samples, double tau, int b_grid_size = 10001) {
    if (samples.dim() != 1) throw std::invalid_argument("cvar: needs 1-d samples");
    if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("cvar: tau must be in (0, 1]");
    if (b_grid_size < 2) throw std::invalid_argument("cvar: grid too small");
    std::vector<double> z(samples.samples().col(0).data(), samples.samples().col(0).data() + samples.size());
    std::sort(z.begin(), z.end());
    const double lo = z.front(), hi = z.back();
    const double pad = (hi > lo) ? (hi - lo) / (b_grid_size - 1) : 1.0 / (b_grid_size - 1);
    const double b_lo = lo - pad, b_hi = hi + pad;
    const double step = (b_hi - b_lo) / (b_grid_size - 1);
    const double n = static_cast<double>(z.size());

    // prefix sums let each grid value be evaluated in O(log n)
    std::vector<double> prefix(z.size() + 1, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i)
        prefix[i + 1] = prefix[i] + z[i];

    double best = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < b_grid_size; ++g) {
        const double b = b_lo + step * g;
        const auto it = std::upper_bound(z.begin(), z.end(), b);
        const auto k = static_cast<std::size_t>(it - z.begin()); // samples below b
        const double shortfall = (b * static_cast<double>(k) - prefix[k]) / n;
        best = std::max(best, b - shortfall / tau);
    }
    return best;
}

/// A conditional sampler (x, a, rng) -> z; the minimal interface a model
/// must expose for Bellman application and evaluation.
using ConditionalSampler = std::function<Eigen::VectorXd(const Observation&, ActionId, RngStream&)>;

/// One environment step (x, a, rng) -> (r, x').
using OneStepSampler = std::function<std::pair<Reward, Observation>(const Observation&, ActionId, RngStream&)>;

/// Distributional Bellman application T^pi f at one (x, a): samples
/// z = r + gamma * y (or r + y when gamma is absent, the finite-horizon
/// step shift), with x' from the environment, a' ~ pi(x'), y ~ f(x', a').
struct BellmanApplication {
    OneStepSampler step;
    const Policy* policy = nullptr;
    ConditionalSampler base;
    std::optional<double> gamma; // nullopt = finite-horizon shift
};

inline EmpiricalDistribution apply_bellman(const BellmanApplication& app, const Observation& x, ActionId a,
                                           int m, RngStream& rng) {
    if (m < 1) throw std::invalid_argument("apply_bellman: m must be >= 1");
    const double scale = app.gamma.value_or(1.0);
    Eigen::MatrixXd samples;
    for (int i = 0; i < m; ++i) {
        auto [r, x_next] = app.step(x, a, rng);
        if (samples.rows() == 0) samples.resize(m, r.size());
        if (scale == 0.0) {
            samples.row(i) = r.transpose();
            continue;
        }
        const ActionId a_next = app.policy->sample(x_next, rng);
        const Eigen::VectorXd y = app.base(x_next, a_next, rng);
        samples.row(i) = (r + scale * y).transpose();
    }
    return EmpiricalDistribution(std::move(samples));
}

} // namespace dope::metrics
