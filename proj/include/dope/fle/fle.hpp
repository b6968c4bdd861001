#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dope/density/model.hpp"
#include "dope/policy.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"

namespace dope::fle {

using density::ConditionalDensityModel;
using density::OptimizerConfig;
using density::TripleList;

/// Draws (x, a) with x ~ mu and a ~ pi(x).
using InitialSampler = std::function<std::pair<Observation, ActionId>(RngStream&)>;

/// Builds a fresh, unfitted model for step h (1-based) or iteration t.
using ModelFactory = std::function<std::unique_ptr<ConditionalDensityModel>(int)>;

struct FleFiniteConfig {
    int horizon = 1;
    OptimizerConfig opt;
    std::uint64_t seed = 0;
    /// Use the recorded step labels for splitting (the experimental
    /// protocol); false gives the plain random even split.
    bool stratify_by_step = true;
};

struct FleInfiniteConfig {
    double gamma = 0.9; // in [0, 1); gamma = 0 degenerates to reward fitting
    int iterations = 10;
    OptimizerConfig opt;
    std::uint64_t seed = 0;
};

/// Heuristic default for the iteration count T when none is configured;
/// the theory prescribes T only up to unknown constants.
inline int default_infinite_iterations(std::size_t n, double gamma) {
    if (gamma <= 0.0) return 1;
    const double t = std::log(static_cast<double>(n)) / (2.0 * std::log(1.0 / gamma));
    return std::max(1, static_cast<int>(std::ceil(t)));
}

/**
 * The final sampleable estimator: f-hat = E_{x ~ mu, a ~ pi(x)} f_1(x, a)
 * (finite horizon) or f_T (discounted). Kept lazy: all downstream metrics
 * are sample-based.
 */
struct ReturnEstimator {
    std::vector<std::shared_ptr<const ConditionalDensityModel>> models; // f_1..f_H or f_1..f_T
    int head = 0; // index of the model the estimator samples from: 0 or T-1
    InitialSampler initial_sampler;

    const ConditionalDensityModel& head_model() const { return *models[static_cast<std::size_t>(head)]; }
    const ConditionalDensityModel& model_at_step(int h) const {
        return *models[static_cast<std::size_t>(h - 1)];
    }
};

inline EmpiricalDistribution estimator_sample(const ReturnEstimator& est, int m, RngStream& rng) {
    if (m < 1) throw std::invalid_argument("estimator_sample: m must be >= 1");
    Eigen::MatrixXd samples(m, est.head_model().dim());
    for (int i = 0; i < m; ++i) {
        auto [x, a] = est.initial_sampler(rng);
        samples.row(i) = est.head_model().sample(x, a, rng).transpose();
    }
    return EmpiricalDistribution(std::move(samples));
}

/**
 * Regression targets for one backward step: z = r + y with a' ~ pi(x') and
 * y ~ f_next(. | x', a') when h < H, and z = r at the terminal step. One
 * target sample per tuple.
 */
inline TripleList build_targets_finite(const OfflineDataset& subset, int h, int horizon,
                                       const ConditionalDensityModel* f_next, const Policy& policy,
                                       RngStream& rng) {
    if ((f_next != nullptr) != (h < horizon))
        throw std::invalid_argument("build_targets_finite: next model required exactly when h < H");
    TripleList targets;
    targets.reserve(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const TransitionTuple& t = subset[i];
        density::Triple out;
        out.x = t.x;
        out.action = t.action;
        if (h < horizon) {
            try {
                const ActionId a_next = policy.sample(t.x_next, rng);
                out.z = t.reward + f_next->sample(t.x_next, a_next, rng);
            } catch (const std::exception& e) {
                throw std::runtime_error("build_targets_finite: tuple " + std::to_string(i) + ": " +
                                         e.what());
            }
        } else {
            out.z = t.reward;
        }
        targets.push_back(std::move(out));
    }
    return targets;
}

struct FleRun {
    ReturnEstimator estimator;
    std::vector<std::uint64_t> subset_hashes; // per fitted step/iteration
};

/**
 * Finite-horizon fitted likelihood estimation: split the data into H
 * subsets, sweep h = H..1 fitting f_h by MLE against the bootstrapped
 * targets of f_{h+1}, and return the estimator over (f_1, mu, pi).
 */
inline FleRun fle_finite(const OfflineDataset& dataset, const FleFiniteConfig& config,
                         const ModelFactory& make_model, const Policy& policy,
                         InitialSampler initial_sampler) {
    const int H = config.horizon;
    if (H < 1) throw std::invalid_argument("fle_finite: horizon must be >= 1");
    RngStream root(config.seed);

    std::vector<OfflineDataset> subsets;
    subsets.reserve(static_cast<std::size_t>(H));
    if (config.stratify_by_step) {
        for (int h = 1; h <= H; ++h)
            subsets.push_back(dataset.filter_step(h));
    } else {
        RngStream split_rng = root.substream("split");
        subsets = split_dataset(dataset, H, split_rng);
    }

    std::vector<std::shared_ptr<const ConditionalDensityModel>> models(static_cast<std::size_t>(H));
    std::vector<std::uint64_t> hashes(static_cast<std::size_t>(H), 0);
    const ConditionalDensityModel* next = nullptr;
    for (int h = H; h >= 1; --h) {
        const OfflineDataset& subset = subsets[static_cast<std::size_t>(h - 1)];
        hashes[static_cast<std::size_t>(h - 1)] = subset.content_hash();
        RngStream target_rng = root.substream("targets/h=" + std::to_string(h));
        TripleList targets = build_targets_finite(subset, h, H, next, policy, target_rng);
        auto model = make_model(h);
        RngStream fit_rng = root.substream("fit/h=" + std::to_string(h));
        try {
            model->fit(targets, config.opt, fit_rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("fle_finite failed at step " + std::to_string(h) + ": " + e.what());
        }
        models[static_cast<std::size_t>(h - 1)] = std::move(model);
        next = models[static_cast<std::size_t>(h - 1)].get();
    }

    FleRun run;
    run.estimator.models = std::move(models);
    run.estimator.head = 0; // f_1
    run.estimator.initial_sampler = std::move(initial_sampler);
    run.subset_hashes = std::move(hashes);
    return run;
}

/**
 * Infinite-horizon fitted likelihood estimation: split the data into T
 * subsets and iterate t = 1..T fitting f_t against targets z = r + gamma y
 * with y ~ f_{t-1}; f_0 is the point mass at zero. The estimator samples
 * from f_T.
 */
inline FleRun fle_infinite(const OfflineDataset& dataset, const FleInfiniteConfig& config,
                           const ModelFactory& make_model, const Policy& policy,
                           InitialSampler initial_sampler) {
    if (config.gamma < 0.0 || config.gamma >= 1.0)
        throw std::invalid_argument("fle_infinite: gamma must be in [0, 1)");
    const int T = config.iterations;
    if (T < 1) throw std::invalid_argument("fle_infinite: need at least one iteration");

    RngStream root(config.seed);
    RngStream split_rng = root.substream("split");
    std::vector<OfflineDataset> subsets = split_dataset(dataset, T, split_rng);

    std::vector<std::shared_ptr<const ConditionalDensityModel>> models;
    std::vector<std::uint64_t> hashes;
    const ConditionalDensityModel* prev = nullptr; // f_0: point mass at zero
    for (int t = 1; t <= T; ++t) {
        const OfflineDataset& subset = subsets[static_cast<std::size_t>(t - 1)];
        hashes.push_back(subset.content_hash());
        RngStream target_rng = root.substream("targets/t=" + std::to_string(t));
        TripleList targets;
        targets.reserve(subset.size());
        for (std::size_t i = 0; i < subset.size(); ++i) {
            const TransitionTuple& tuple = subset[i];
            density::Triple out;
            out.x = tuple.x;
            out.action = tuple.action;
            if (prev == nullptr || config.gamma == 0.0) {
                out.z = tuple.reward; // gamma * f_0 == 0
            } else {
                const ActionId a_next = policy.sample(tuple.x_next, target_rng);
                out.z = tuple.reward + config.gamma * prev->sample(tuple.x_next, a_next, target_rng);
            }
            targets.push_back(std::move(out));
        }
        auto model = make_model(t);
        RngStream fit_rng = root.substream("fit/t=" + std::to_string(t));
        try {
            model->fit(targets, config.opt, fit_rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("fle_infinite failed at iteration " + std::to_string(t) + ": " +
                                     e.what());
        }
        models.push_back(std::move(model));
        prev = models.back().get();
    }

    FleRun run;
    run.estimator.models = std::move(models);
    run.estimator.head = T - 1; // the estimator reads f_T
    run.estimator.initial_sampler = std::move(initial_sampler);
    run.subset_hashes = std::move(hashes);
    return run;
}

} // namespace dope::fle
