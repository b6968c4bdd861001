#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dope/density/model.hpp"
#include "dope/univariate.hpp"

namespace dope::density {

/**
 * Mixture over a fixed dictionary of 1-d densities with one learnable
 * weight vector per (cell, action). With the dictionary set to the terminal
 * reward densities of a sparse-reward tabular MDP this class is closed
 * under the Bellman backup, so MLE can recover the exact return mixtures.
 * A dictionary of narrow grid Gaussians turns it into a smooth
 * histogram-style family for the discounted setting.
 */
class TabularMixtureModel : public ConditionalDensityModel {
  public:
    TabularMixtureModel(std::shared_ptr<const FeatureMap> fmap, int num_actions, Box box,
                        std::vector<Density1d> dictionary)
        : ConditionalDensityModel(std::move(fmap), num_actions, std::move(box)),
          dictionary_(std::move(dictionary)) {
        if (dim() != 1) throw std::invalid_argument("TabularMixtureModel: only 1-d targets supported");
        if (dictionary_.empty()) throw std::invalid_argument("TabularMixtureModel: empty dictionary");
        logits_.assign(static_cast<std::size_t>(num_blocks()),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dictionary_.size())));
    }

    /// Dictionary of evenly spaced Gaussians whose std equals the spacing.
    static std::vector<Density1d> grid_gaussian_dictionary(double lo, double hi, int count) {
        std::vector<Density1d> dict;
        const double spacing = (hi - lo) / (count - 1);
        for (int k = 0; k < count; ++k)
            dict.push_back(Gaussian1d{lo + spacing * k, spacing});
        return dict;
    }

    const std::vector<Density1d>& dictionary() const { return dictionary_; }

    Eigen::VectorXd weights_of_block(int block) const {
        return softmax(logits_[static_cast<std::size_t>(block)]);
    }

    void fit(const TripleList& data, const OptimizerConfig& opt, RngStream&) override {
        const auto groups = group_by_block(data);
        const auto D = static_cast<Eigen::Index>(dictionary_.size());
        for (int b = 0; b < num_blocks(); ++b) {
            const auto& rows = groups[static_cast<std::size_t>(b)];
            if (rows.empty()) continue; // empty cell keeps the uniform initialization

            Eigen::MatrixXd densities(rows.size(), D);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const double z = data[static_cast<std::size_t>(rows[i])].z[0];
                for (Eigen::Index k = 0; k < D; ++k)
                    densities(static_cast<Eigen::Index>(i), k) = pdf(dictionary_[static_cast<std::size_t>(k)], z);
            }

            // data-driven start: weights proportional to the mean normalized
            // dictionary responsibilities under uniform weights
            Eigen::VectorXd init = Eigen::VectorXd::Zero(D);
            for (Eigen::Index i = 0; i < densities.rows(); ++i) {
                const double row_sum = densities.row(i).sum();
                if (row_sum > 0.0) init += densities.row(i).transpose() / row_sum;
            }
            init.array() += 1e-6 * static_cast<double>(densities.rows());
            Eigen::VectorXd theta = (init / init.sum()).array().log().matrix();
            detail::monotone_ascent(
                theta,
                [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) {
                    const Eigen::VectorXd p = softmax(t);
                    const Eigen::ArrayXd mix = (densities * p).array();
                    const double floor_value = std::exp(kLogDensityFloor);
                    if (grad) {
                        Eigen::VectorXd acc = Eigen::VectorXd::Zero(D);
                        double active = 0.0;
                        for (Eigen::Index i = 0; i < densities.rows(); ++i) {
                            if (mix[i] <= floor_value) continue; // floored point, no gradient
                            acc += (densities.row(i).transpose().array() / mix[i]).matrix();
                            active += 1.0;
                        }
                        const double n = static_cast<double>(densities.rows());
                        *grad = (p.array() * (acc.array() - active) / n).matrix();
                    }
                    return mix.max(floor_value).log().mean();
                },
                [](Eigen::VectorXd&) {}, opt, "tabular mixture block " + std::to_string(b));
            logits_[static_cast<std::size_t>(b)] = std::move(theta);
        }
    }

    Eigen::VectorXd sample(const Observation& x, ActionId a, RngStream& rng) const override {
        const Eigen::VectorXd w = weights_of_block(block_index(x, a));
        const int k = rng.categorical(w);
        return Eigen::VectorXd::Constant(1, dope::sample(dictionary_[static_cast<std::size_t>(k)], rng));
    }

    double log_density(const Observation& x, ActionId a, const Eigen::VectorXd& z) const override {
        if (!box().contains(z)) return kLogDensityFloor;
        const Eigen::VectorXd w = weights_of_block(block_index(x, a));
        const double density = mixture_pdf(dictionary_, w, z[0]);
        return std::max(std::log(std::max(density, 0.0)), kLogDensityFloor);
    }

    std::string family() const override { return "tabular_mixture"; }

    nlohmann::json params_json() const override {
        nlohmann::json dict = nlohmann::json::array();
        for (const auto& d : dictionary_) {
            if (const auto* g = std::get_if<Gaussian1d>(&d))
                dict.push_back({{"type", "gaussian"}, {"mean", g->mean}, {"std", g->stddev}});
            else {
                const auto& u = std::get<Uniform1d>(d);
                dict.push_back({{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}});
            }
        }
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& l : logits_)
            blocks.push_back(std::vector<double>(l.data(), l.data() + l.size()));
        return {{"dictionary", std::move(dict)}, {"blocks", std::move(blocks)}};
    }

    void load_params(const nlohmann::json& j) override {
        dictionary_.clear();
        for (const auto& jd : j.at("dictionary")) {
            const auto type = jd.at("type").get<std::string>();
            if (type == "gaussian")
                dictionary_.push_back(Gaussian1d{jd.at("mean").get<double>(), jd.at("std").get<double>()});
            else
                dictionary_.push_back(Uniform1d{jd.at("lo").get<double>(), jd.at("hi").get<double>()});
        }
        const auto& blocks = j.at("blocks");
        if (static_cast<int>(blocks.size()) != num_blocks())
            throw std::invalid_argument("tabular_mixture load: block count mismatch");
        logits_.clear();
        for (const auto& jb : blocks) {
            const auto values = jb.get<std::vector<double>>();
            logits_.push_back(
                Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
        }
    }

  private:
    static Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
        const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
        Eigen::ArrayXd e = shifted.exp();
        return (e / e.sum()).matrix();
    }

    std::vector<Density1d> dictionary_;
    std::vector<Eigen::VectorXd> logits_;
};

} // namespace dope::density
