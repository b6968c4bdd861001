#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dope/density/model.hpp"

namespace dope::density {

/**
 * Regular atom grid over the return box: `counts[j]` atoms per dimension,
 * placed at linspace(lo, hi, counts[j]). Atoms are indexed row-major over
 * dimensions.
 */
struct AtomGrid {
    std::vector<int> counts;
    std::vector<double> lo, hi;

    static AtomGrid uniform(int dim, int atoms_per_dim, double low, double high) {
        AtomGrid g;
        g.counts.assign(static_cast<std::size_t>(dim), atoms_per_dim);
        g.lo.assign(static_cast<std::size_t>(dim), low);
        g.hi.assign(static_cast<std::size_t>(dim), high);
        return g;
    }

    int dim() const { return static_cast<int>(counts.size()); }

    int total() const {
        int n = 1;
        for (int c : counts)
            n *= c;
        return n;
    }

    double spacing(int j) const {
        const auto ju = static_cast<std::size_t>(j);
        return counts[ju] > 1 ? (hi[ju] - lo[ju]) / (counts[ju] - 1) : 0.0;
    }

    double position(int j, int idx) const { return lo[static_cast<std::size_t>(j)] + spacing(j) * idx; }

    Eigen::VectorXd atom_position(int flat) const {
        Eigen::VectorXd z(dim());
        for (int j = dim() - 1; j >= 0; --j) {
            const int c = counts[static_cast<std::size_t>(j)];
            z[j] = position(j, flat % c);
            flat /= c;
        }
        return z;
    }

    int flat_index(const std::vector<int>& idx) const {
        int flat = 0;
        for (int j = 0; j < dim(); ++j)
            flat = flat * counts[static_cast<std::size_t>(j)] + idx[static_cast<std::size_t>(j)];
        return flat;
    }

    /// Nearest atom to z after clipping into the grid range.
    int snap(const Eigen::VectorXd& z) const {
        int flat = 0;
        for (int j = 0; j < dim(); ++j) {
            const auto ju = static_cast<std::size_t>(j);
            int idx = 0;
            if (counts[ju] > 1) {
                const double t = (std::clamp(z[j], lo[ju], hi[ju]) - lo[ju]) / spacing(j);
                idx = std::clamp(static_cast<int>(std::lround(t)), 0, counts[ju] - 1);
            }
            flat = flat * counts[ju] + idx;
        }
        return flat;
    }
};

/**
 * Distributes `mass` at z multilinearly onto the 2^d nearest atoms (linear
 * in 1-d, bilinear in 2-d); z is clipped into the grid range first. The
 * output weights sum to `mass` exactly and preserve the mean of interior
 * points.
 */
inline void categorical_project(const AtomGrid& grid, const Eigen::VectorXd& z, double mass,
                                std::vector<std::pair<int, double>>& out) {
    const int d = grid.dim();
    // per-dim lower corner index and interpolation fraction
    int lower[8];
    double frac[8];
    if (d > 8) throw std::invalid_argument("categorical_project: dimension too large");
    for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (grid.counts[ju] == 1) {
            lower[j] = 0;
            frac[j] = 0.0;
            continue;
        }
        const double v = std::clamp(z[j], grid.lo[ju], grid.hi[ju]);
        double t = (v - grid.lo[ju]) / grid.spacing(j);
        int i0 = static_cast<int>(std::floor(t));
        i0 = std::clamp(i0, 0, grid.counts[ju] - 2);
        lower[j] = i0;
        frac[j] = std::clamp(t - i0, 0.0, 1.0);
    }
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = mass;
        int flat = 0;
        for (int j = 0; j < d; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const int hi_side = (c >> j) & 1;
            int idx = lower[j];
            if (grid.counts[ju] > 1) {
                w *= hi_side ? frac[j] : (1.0 - frac[j]);
                idx += hi_side;
            } else if (hi_side) {
                w = 0.0;
            }
            flat = flat * grid.counts[ju] + idx;
        }
        if (w != 0.0) out.emplace_back(flat, w);
    }
}

/**
 * Categorical model over a fixed atom grid, one softmax-parameterized
 * probability vector per (cell, action). The MLE fit minimizes the
 * cross-entropy between the multilinearly projected targets and the
 * parametric distribution.
 */
class CategoricalGridModel : public ConditionalDensityModel {
  public:
    CategoricalGridModel(std::shared_ptr<const FeatureMap> fmap, int num_actions, Box box, AtomGrid grid)
        : ConditionalDensityModel(std::move(fmap), num_actions, std::move(box)), grid_(std::move(grid)) {
        if (grid_.dim() != dim()) throw std::invalid_argument("CategoricalGridModel: grid dim mismatch");
        logits_.assign(static_cast<std::size_t>(num_blocks()), Eigen::VectorXd::Zero(grid_.total()));
    }

    const AtomGrid& grid() const { return grid_; }

    void fit(const TripleList& data, const OptimizerConfig& opt, RngStream&) override {
        const auto groups = group_by_block(data);
        std::vector<std::pair<int, double>> proj;
        for (int b = 0; b < num_blocks(); ++b) {
            const auto& rows = groups[static_cast<std::size_t>(b)];
            if (rows.empty()) continue; // empty cell keeps the uniform initialization
            Eigen::VectorXd target = Eigen::VectorXd::Zero(grid_.total());
            const double mass = 1.0 / static_cast<double>(rows.size());
            for (int row : rows) {
                proj.clear();
                categorical_project(grid_, data[static_cast<std::size_t>(row)].z, mass, proj);
                for (const auto& [atom, weight] : proj)
                    target[atom] += weight;
            }
            fit_block_to_target(b, target, opt);
        }
    }

    /// Cross-entropy fit of one block against an explicit target
    /// distribution (used directly by the distributional TD baseline).
    void fit_block_to_target(int block, const Eigen::VectorXd& target, const OptimizerConfig& opt) {
        Eigen::VectorXd theta = logits_[static_cast<std::size_t>(block)];
        detail::monotone_ascent(
            theta,
            [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) { // negative cross-entropy
                const Eigen::ArrayXd shifted = t.array() - t.maxCoeff();
                const double lse = std::log(shifted.exp().sum());
                if (grad) *grad = target - probs_of(t);
                return (target.array() * (shifted - lse)).sum();
            },
            [](Eigen::VectorXd&) {}, opt, "categorical block " + std::to_string(block));
        logits_[static_cast<std::size_t>(block)] = std::move(theta);
    }

    Eigen::VectorXd distribution(int block) const { return probs_of(logits_[static_cast<std::size_t>(block)]); }

    int block_of(const Observation& x, ActionId a) const { return block_index(x, a); }

    Eigen::VectorXd sample(const Observation& x, ActionId a, RngStream& rng) const override {
        const Eigen::VectorXd probs = distribution(block_index(x, a));
        return grid_.atom_position(rng.categorical(probs));
    }

    /// Log probability mass of the nearest atom (z clipped into the grid).
    double log_density(const Observation& x, ActionId a, const Eigen::VectorXd& z) const override {
        const Eigen::VectorXd probs = distribution(block_index(x, a));
        const double p = probs[grid_.snap(z)];
        return std::max(std::log(std::max(p, 0.0)), kLogDensityFloor);
    }

    std::string family() const override { return "categorical"; }

    nlohmann::json params_json() const override {
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& l : logits_)
            blocks.push_back(std::vector<double>(l.data(), l.data() + l.size()));
        nlohmann::json j;
        j["counts"] = grid_.counts;
        j["grid_lo"] = grid_.lo;
        j["grid_hi"] = grid_.hi;
        j["blocks"] = std::move(blocks);
        return j;
    }

    void load_params(const nlohmann::json& j) override {
        grid_.counts = j.at("counts").get<std::vector<int>>();
        grid_.lo = j.at("grid_lo").get<std::vector<double>>();
        grid_.hi = j.at("grid_hi").get<std::vector<double>>();
        const auto& blocks = j.at("blocks");
        if (static_cast<int>(blocks.size()) != num_blocks())
            throw std::invalid_argument("categorical load: block count mismatch");
        logits_.clear();
        for (const auto& jb : blocks) {
            const auto values = jb.get<std::vector<double>>();
            logits_.push_back(
                Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        }
    }

  private:
    static Eigen::VectorXd probs_of(const Eigen::VectorXd& logits) {
        const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
        Eigen::ArrayXd e = shifted.exp();
        return (e / e.sum()).matrix();
    }

    AtomGrid grid_;
    std::vector<Eigen::VectorXd> logits_;
};

} // namespace dope::density
