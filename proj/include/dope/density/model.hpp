#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dope/density/feature_map.hpp"
#include "dope/rng.hpp"
#include "dope/types.hpp"

namespace dope::density {

/// Values below this are clamped in every log-density query; keeps MLE
/// targets finite for outlier z.
constexpr double kLogDensityFloor = -30.0;

/// Return-space bounding box. Fitting data is assumed to live inside it;
/// it also fixes grid ranges, quadrature domains and the std floor scale.
struct Box {
    Eigen::VectorXd lo, hi;

    static Box cube(int dim, double low, double high) {
        Box b;
        b.lo = Eigen::VectorXd::Constant(dim, low);
        b.hi = Eigen::VectorXd::Constant(dim, high);
        return b;
    }

    int dim() const { return static_cast<int>(lo.size()); }
    double diameter() const { return (hi - lo).norm(); }

    bool contains(const Eigen::VectorXd& z) const {
        for (Eigen::Index j = 0; j < lo.size(); ++j)
            if (z[j] < lo[j] || z[j] > hi[j]) return false;
        return true;
    }
};

/// One supervised example (x, a, z) for conditional density fitting.
struct Triple {
    Observation x;
    ActionId action = 0;
    Eigen::VectorXd z;
};

using TripleList = std::vector<Triple>;

/// Full-batch gradient ascent settings: fixed base step with a
/// monotone-accept halving rule, plus an early-stop tolerance.
struct OptimizerConfig {
    double step_size = 1e-2;
    int iterations = 5000;
    int max_halvings = 20;
    double tol = 1e-11;
    int patience = 30;
};

/**
 * Conditional distribution f(. | x, a) with the three capabilities every
 * estimator in this library builds on: sampling, log-density evaluation,
 * and maximum-likelihood fitting from (x, a, z) triples.
 */
class ConditionalDensityModel {
  public:
    ConditionalDensityModel(std::shared_ptr<const FeatureMap> fmap, int num_actions, Box box)
        : fmap_(std::move(fmap)), num_actions_(num_actions), box_(std::move(box)) {
        if (!fmap_) throw std::invalid_argument("model: missing feature map");
        if (num_actions_ < 1) throw std::invalid_argument("model: bad action count");
    }
    virtual ~ConditionalDensityModel() = default;

    const FeatureMap& feature_map() const { return *fmap_; }
    std::shared_ptr<const FeatureMap> feature_map_ptr() const { return fmap_; }
    int num_actions() const { return num_actions_; }
    int dim() const { return box_.dim(); }
    const Box& box() const { return box_; }

    int num_blocks() const { return fmap_->num_cells() * num_actions_; }
    int block_index(const Observation& x, ActionId a) const {
        if (a < 0 || a >= num_actions_) throw std::out_of_range("model: action out of range");
        return fmap_->cell(x) * num_actions_ + a;
    }

    virtual void fit(const TripleList& data, const OptimizerConfig& opt, RngStream& rng) = 0;
    virtual Eigen::VectorXd sample(const Observation& x, ActionId a, RngStream& rng) const = 0;
    virtual double log_density(const Observation& x, ActionId a, const Eigen::VectorXd& z) const = 0;

    virtual std::string family() const = 0;
    virtual nlohmann::json params_json() const = 0;
    virtual void load_params(const nlohmann::json& j) = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["family"] = family();
        j["feature_map"] = fmap_->id();
        j["num_actions"] = num_actions_;
        j["dim"] = dim();
        j["box_lo"] = std::vector<double>(box_.lo.data(), box_.lo.data() + box_.lo.size());
        j["box_hi"] = std::vector<double>(box_.hi.data(), box_.hi.data() + box_.hi.size());
        j["params"] = params_json();
        return j;
    }

  protected:
    /// Splits the triples into per-(cell, action) index groups.
    std::vector<std::vector<int>> group_by_block(const TripleList& data) const {
        std::vector<std::vector<int>> groups(static_cast<std::size_t>(num_blocks()));
        for (int i = 0; i < static_cast<int>(data.size()); ++i) {
            const auto& t = data[static_cast<std::size_t>(i)];
            if (t.z.size() != dim()) throw std::invalid_argument("model: target dimension mismatch");
            groups[static_cast<std::size_t>(block_index(t.x, t.action))].push_back(i);
        }
        return groups;
    }

  private:
    std::shared_ptr<const FeatureMap> fmap_;
    int num_actions_;
    Box box_;
};

namespace detail {

/**
 * Maximizes an objective by full-batch gradient ascent: propose a step of
 * the base size, halve on objective decrease (up to max_halvings), keep the
 * parameters on failure. Never returns a lower objective than the initial
 * one. `eval(theta, grad_out)` returns the objective and fills the average
 * gradient when grad_out is non-null; `project` is applied to every iterate
 * (parameter constraints).
 */
template <class Eval, class Project>
double monotone_ascent(Eigen::VectorXd& theta, Eval&& eval, Project&& project,
                       const OptimizerConfig& opt, const std::string& context) {
    project(theta);
    Eigen::VectorXd grad(theta.size());
    double value = eval(theta, &grad);
    if (!std::isfinite(value))
        throw std::runtime_error("fit aborted, non-finite loss at initialization (" + context + ")");
    int stalled = 0;
    Eigen::VectorXd candidate(theta.size());
    Eigen::VectorXd candidate_grad(theta.size());
    for (int iter = 0; iter < opt.iterations; ++iter) {
        if (!grad.allFinite())
            throw std::runtime_error("fit aborted, non-finite gradient (" + context + ")");
        double step = opt.step_size;
        bool accepted = false;
        double candidate_value = 0.0;
        for (int halving = 0; halving <= opt.max_halvings; ++halving) {
            candidate = theta + step * grad;
            project(candidate);
            candidate_value = eval(candidate, &candidate_grad);
            if (std::isfinite(candidate_value) && candidate_value >= value) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // gradient no longer improves at any scale
        const double improvement = candidate_value - value;
        theta.swap(candidate);
        grad.swap(candidate_grad);
        value = candidate_value;
        if (improvement < opt.tol * (1.0 + std::abs(value))) {
            if (++stalled >= opt.patience) break;
        } else {
            stalled = 0;
        }
    }
    return value;
}

inline void check_finite_loss(double value, const std::string& context) {
    if (!std::isfinite(value)) throw std::runtime_error("fit aborted, non-finite loss (" + context + ")");
}

} // namespace detail

} // namespace dope::density
