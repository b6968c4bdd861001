#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dope/density/model.hpp"

namespace dope::density {

/**
 * Gaussian with a fixed, non-learnable standard deviation and one learnable
 * mean vector per (cell, action). MLE of the mean under a fixed variance is
 * exactly the least-squares solution, i.e. the per-cell sample mean, so the
 * fit is computed in closed form.
 */
class FixedVarianceGaussian : public ConditionalDensityModel {
  public:
    FixedVarianceGaussian(std::shared_ptr<const FeatureMap> fmap, int num_actions, Box box, double sigma)
        : ConditionalDensityModel(std::move(fmap), num_actions, std::move(box)), sigma_(sigma) {
        if (sigma_ <= 0.0) throw std::invalid_argument("FixedVarianceGaussian: sigma must be > 0");
        means_.assign(static_cast<std::size_t>(num_blocks()), Eigen::VectorXd::Zero(dim()));
    }

    double sigma() const { return sigma_; }
    const Eigen::VectorXd& mean_of_block(int block) const { return means_[static_cast<std::size_t>(block)]; }

    void fit(const TripleList& data, const OptimizerConfig&, RngStream&) override {
        const auto groups = group_by_block(data);
        for (int b = 0; b < num_blocks(); ++b) {
            const auto& rows = groups[static_cast<std::size_t>(b)];
            if (rows.empty()) continue;
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
            for (int row : rows)
                acc += data[static_cast<std::size_t>(row)].z;
            means_[static_cast<std::size_t>(b)] = acc / static_cast<double>(rows.size());
        }
    }

    Eigen::VectorXd sample(const Observation& x, ActionId a, RngStream& rng) const override {
        const Eigen::VectorXd& g = means_[static_cast<std::size_t>(block_index(x, a))];
        Eigen::VectorXd z(dim());
        for (int j = 0; j < dim(); ++j)
            z[j] = rng.normal(g[j], sigma_);
        return z;
    }

    double log_density(const Observation& x, ActionId a, const Eigen::VectorXd& z) const override {
        if (!box().contains(z)) return kLogDensityFloor;
        const Eigen::VectorXd& g = means_[static_cast<std::size_t>(block_index(x, a))];
        const double sq = (z - g).squaredNorm() / (sigma_ * sigma_);
        const double ll =
            -0.5 * sq - dim() * (std::log(sigma_) + 0.5 * std::log(2.0 * M_PI));
        return std::max(ll, kLogDensityFloor);
    }

    std::string family() const override { return "fixed_gaussian"; }

    nlohmann::json params_json() const override {
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& g : means_)
            blocks.push_back(std::vector<double>(g.data(), g.data() + g.size()));
        return {{"sigma", sigma_}, {"blocks", std::move(blocks)}};
    }

    void load_params(const nlohmann::json& j) override {
        sigma_ = j.at("sigma").get<double>();
        const auto& blocks = j.at("blocks");
        if (static_cast<int>(blocks.size()) != num_blocks())
            throw std::invalid_argument("fixed_gaussian load: block count mismatch");
        means_.clear();
        for (const auto& jb : blocks) {
            const auto values = jb.get<std::vector<double>>();
            means_.push_back(
                Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        }
    }

  private:
    double sigma_;
    std::vector<Eigen::VectorXd> means_;
};

} // namespace dope::density
