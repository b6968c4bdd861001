#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dope/density/model.hpp"

namespace dope::density {

/**
 * Conditional Gaussian mixture with diagonal covariance: one K-component
 * mixture per (cell, action) block. Weights are softmax logits and scales
 * live in log space, so the MLE objective is maximized by unconstrained
 * gradient ascent; standard deviations are floored at 1e-3 of the box
 * diameter to keep the likelihood bounded.
 */
class ConditionalGmm : public ConditionalDensityModel {
  public:
    struct Block {
        Eigen::VectorXd logits;   // K
        Eigen::MatrixXd means;    // K x d
        Eigen::MatrixXd log_stds; // K x d
    };

    ConditionalGmm(std::shared_ptr<const FeatureMap> fmap, int num_actions, Box box, int components)
        : ConditionalDensityModel(std::move(fmap), num_actions, std::move(box)), components_(components) {
        if (components_ < 1) throw std::invalid_argument("ConditionalGmm: need at least one component");
        blocks_.assign(static_cast<std::size_t>(num_blocks()), uniform_block());
    }

    int components() const { return components_; }
    double std_floor() const { return 1e-3 * box().diameter(); }

    const Block& block(int index) const { return blocks_[static_cast<std::size_t>(index)]; }
    Block& block(int index) { return blocks_[static_cast<std::size_t>(index)]; }

    void fit(const TripleList& data, const OptimizerConfig& opt, RngStream& rng) override {
        const auto groups = group_by_block(data);
        for (int b = 0; b < num_blocks(); ++b) {
            const auto& rows = groups[static_cast<std::size_t>(b)];
            if (rows.empty()) continue; // empty cell keeps its initialization
            Eigen::MatrixXd Z(rows.size(), dim());
            for (std::size_t i = 0; i < rows.size(); ++i)
                Z.row(static_cast<Eigen::Index>(i)) = data[static_cast<std::size_t>(rows[i])].z.transpose();
            fit_block(blocks_[static_cast<std::size_t>(b)], Z, opt, rng, "gmm block " + std::to_string(b));
        }
    }

    Eigen::VectorXd sample(const Observation& x, ActionId a, RngStream& rng) const override {
        const Block& blk = blocks_[static_cast<std::size_t>(block_index(x, a))];
        const Eigen::VectorXd probs = softmax(blk.logits);
        const int k = rng.categorical(probs);
        Eigen::VectorXd z(dim());
        for (int j = 0; j < dim(); ++j)
            z[j] = rng.normal(blk.means(k, j), std::exp(blk.log_stds(k, j)));
        return z;
    }

    double log_density(const Observation& x, ActionId a, const Eigen::VectorXd& z) const override {
        if (!box().contains(z)) return kLogDensityFloor;
        const Block& blk = blocks_[static_cast<std::size_t>(block_index(x, a))];
        return std::max(block_log_density(blk, z), kLogDensityFloor);
    }

    std::string family() const override { return "gmm"; }

    nlohmann::json params_json() const override {
        nlohmann::json blocks = nlohmann::json::array();
        for (const Block& blk : blocks_) {
            nlohmann::json jb;
            jb["logits"] = std::vector<double>(blk.logits.data(), blk.logits.data() + blk.logits.size());
            jb["means"] = std::vector<double>(blk.means.data(), blk.means.data() + blk.means.size());
            jb["log_stds"] =
                std::vector<double>(blk.log_stds.data(), blk.log_stds.data() + blk.log_stds.size());
            blocks.push_back(std::move(jb));
        }
        return {{"components", components_}, {"blocks", std::move(blocks)}};
    }

    void load_params(const nlohmann::json& j) override {
        components_ = j.at("components").get<int>();
        const auto& jblocks = j.at("blocks");
        if (static_cast<int>(jblocks.size()) != num_blocks())
            throw std::invalid_argument("gmm load: block count mismatch");
        blocks_.clear();
        for (const auto& jb : jblocks) {
            Block blk;
            const auto logits = jb.at("logits").get<std::vector<double>>();
            const auto means = jb.at("means").get<std::vector<double>>();
            const auto log_stds = jb.at("log_stds").get<std::vector<double>>();
            blk.logits = Eigen::Map<const Eigen::VectorXd>(logits.data(), static_cast<Eigen::Index>(logits.size()));
            blk.means = Eigen::Map<const Eigen::MatrixXd>(means.data(), components_, dim());
            blk.log_stds = Eigen::Map<const Eigen::MatrixXd>(log_stds.data(), components_, dim());
            blocks_.push_back(std::move(blk));
        }
    }

    // --- block math, exposed for the finite-difference gradient check ---

    static Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
        const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
        Eigen::ArrayXd e = shifted.exp();
        return (e / e.sum()).matrix();
    }

    /// theta layout: [logits (K)] [means (K*d, column-major)] [log_stds (K*d)]
    static Eigen::VectorXd pack(const Block& blk) {
        const Eigen::Index K = blk.logits.size();
        const Eigen::Index d = blk.means.cols();
        Eigen::VectorXd theta(K + 2 * K * d);
        theta.head(K) = blk.logits;
        theta.segment(K, K * d) = Eigen::Map<const Eigen::VectorXd>(blk.means.data(), K * d);
        theta.tail(K * d) = Eigen::Map<const Eigen::VectorXd>(blk.log_stds.data(), K * d);
        return theta;
    }

    static Block unpack(const Eigen::VectorXd& theta, int K, int d) {
        Block blk;
        blk.logits = theta.head(K);
        blk.means = Eigen::Map<const Eigen::MatrixXd>(theta.data() + K, K, d);
        blk.log_stds = Eigen::Map<const Eigen::MatrixXd>(theta.data() + K + K * d, K, d);
        return blk;
    }

    /// Reusable buffers for the fused likelihood/gradient evaluation.
    struct Workspace {
        Eigen::MatrixXd comp; // n x K: log joint, then exp'd shifted values
        Eigen::MatrixXd u;    // n x (K*d): standardized residuals
        Eigen::VectorXd row_max, row_sum, ll;
    };

    /**
     * Average per-point log-likelihood, floored at kLogDensityFloor; fills
     * the average-gradient vector when grad_out is non-null. Floored points
     * contribute zero gradient.
     */
    static double evaluate(const Eigen::VectorXd& theta, int K, const Eigen::MatrixXd& Z,
                           Eigen::VectorXd* grad_out, Workspace& ws) {
        const Eigen::Index n = Z.rows();
        const int d = static_cast<int>(Z.cols());
        const Block blk = unpack(theta, K, d);
        const Eigen::VectorXd probs = softmax(blk.logits);
        const Eigen::VectorXd log_probs = probs.array().max(1e-300).log().matrix();

        ws.comp.resize(n, K);
        ws.u.resize(n, static_cast<Eigen::Index>(K) * d);
        for (int k = 0; k < K; ++k) {
            double constant = log_probs[k] - 0.5 * d * std::log(2.0 * M_PI);
            for (int j = 0; j < d; ++j)
                constant -= blk.log_stds(k, j);
            ws.comp.col(k).setConstant(constant);
            for (int j = 0; j < d; ++j) {
                const double inv_s = std::exp(-blk.log_stds(k, j));
                auto u_col = ws.u.col(static_cast<Eigen::Index>(k) * d + j);
                u_col = ((Z.col(j).array() - blk.means(k, j)) * inv_s).matrix();
                ws.comp.col(k).array() -= 0.5 * u_col.array().square();
            }
        }

        ws.row_max = ws.comp.rowwise().maxCoeff();
        ws.comp.colwise() -= ws.row_max;
        ws.comp = ws.comp.array().exp().matrix(); // single bulk exp
        ws.row_sum = ws.comp.rowwise().sum();
        ws.ll = (ws.row_sum.array().log() + ws.row_max.array()).matrix();
        const double value = ws.ll.array().max(kLogDensityFloor).mean();

        if (grad_out) {
            // responsibilities in place: comp(i, k) /= row_sum(i)
            ws.comp.array().colwise() /= ws.row_sum.array();
            if ((ws.ll.array() < kLogDensityFloor).any())
                for (Eigen::Index i = 0; i < n; ++i)
                    if (ws.ll[i] < kLogDensityFloor) ws.comp.row(i).setZero();

            grad_out->resize(theta.size());
            const double scale = 1.0 / static_cast<double>(n);
            const Eigen::VectorXd resp_sums = ws.comp.colwise().sum().transpose();
            grad_out->head(K) = (resp_sums - resp_sums.sum() * probs) * scale;
            for (int k = 0; k < K; ++k) {
                for (int j = 0; j < d; ++j) {
                    const auto u_col = ws.u.col(static_cast<Eigen::Index>(k) * d + j);
                    const double inv_s = std::exp(-blk.log_stds(k, j));
                    const double g_mean = ws.comp.col(k).dot(u_col) * inv_s * scale;
                    const double g_lstd =
                        ((ws.comp.col(k).array() * (u_col.array().square() - 1.0)).sum()) * scale;
                    (*grad_out)[K + k + K * j] = g_mean;
                    (*grad_out)[K + K * d + k + K * j] = g_lstd;
                }
            }
        }
        return value;
    }

    static double objective(const Eigen::VectorXd& theta, int K, const Eigen::MatrixXd& Z) {
        Workspace ws;
        return evaluate(theta, K, Z, nullptr, ws);
    }

    static Eigen::VectorXd gradient(const Eigen::VectorXd& theta, int K, const Eigen::MatrixXd& Z) {
        Workspace ws;
        Eigen::VectorXd grad;
        evaluate(theta, K, Z, &grad, ws);
        return grad;
    }

    /// Mixture log density of a single point under one parameter block.
    static double block_log_density(const Block& blk, const Eigen::VectorXd& z) {
        const int K = static_cast<int>(blk.logits.size());
        const int d = static_cast<int>(blk.means.cols());
        const Eigen::VectorXd log_probs = softmax(blk.logits).array().max(1e-300).log().matrix();
        double best = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd comp(K);
        for (int k = 0; k < K; ++k) {
            double acc = log_probs[k] - 0.5 * d * std::log(2.0 * M_PI);
            for (int j = 0; j < d; ++j) {
                const double s = std::exp(blk.log_stds(k, j));
                const double uu = (z[j] - blk.means(k, j)) / s;
                acc += -0.5 * uu * uu - blk.log_stds(k, j);
            }
            comp[k] = acc;
            best = std::max(best, acc);
        }
        return std::log((comp.array() - best).exp().sum()) + best;
    }

  private:
    Block uniform_block() const {
        Block blk;
        blk.logits = Eigen::VectorXd::Zero(components_);
        blk.means.resize(components_, dim());
        blk.log_stds.resize(components_, dim());
        const Eigen::VectorXd spread =
            ((box().hi - box().lo) / (2.0 * components_)).array().max(std_floor()).log().matrix();
        for (int k = 0; k < components_; ++k) {
            const double t = (k + 0.5) / components_;
            blk.means.row(k) = (box().lo + t * (box().hi - box().lo)).transpose();
            blk.log_stds.row(k) = spread.transpose();
        }
        return blk;
    }

    void fit_block(Block& blk, const Eigen::MatrixXd& Z, const OptimizerConfig& opt, RngStream& rng,
                   const std::string& context) {
        initialize_block(blk, Z, rng);
        const double floor_log = std::log(std_floor());
        const int K = components_;
        const int d = dim();
        Eigen::VectorXd theta = pack(blk);
        Workspace ws;
        detail::monotone_ascent(
            theta,
            [&](const Eigen::VectorXd& t, Eigen::VectorXd* grad) { return evaluate(t, K, Z, grad, ws); },
            [&](Eigen::VectorXd& t) {
                t.tail(K * d) = t.tail(K * d).cwiseMax(floor_log); // std floor
            },
            opt, context);
        blk = unpack(theta, K, d);
    }

    /// Seeded k-means++-style init: means at spread-out data points, stds at
    /// the per-dimension data standard deviation, uniform weights.
    void initialize_block(Block& blk, const Eigen::MatrixXd& Z, RngStream& rng) {
        const Eigen::Index n = Z.rows();
        const int d = dim();
        blk.logits = Eigen::VectorXd::Zero(components_);
        blk.means.resize(components_, d);
        blk.log_stds.resize(components_, d);

        std::vector<Eigen::Index> seeds;
        seeds.push_back(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n))));
        Eigen::MatrixXd diff = Z.rowwise() - Z.row(seeds[0]);
        Eigen::ArrayXd dist2 = diff.rowwise().squaredNorm().array();
        while (static_cast<int>(seeds.size()) < components_) {
            const double total = dist2.sum();
            Eigen::Index pick;
            if (total <= 0.0) {
                pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
            } else {
                double u = rng.uniform() * total;
                pick = n - 1;
                for (Eigen::Index i = 0; i < n; ++i) {
                    u -= dist2[i];
                    if (u <= 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
            seeds.push_back(pick);
            diff = Z.rowwise() - Z.row(pick);
            dist2 = dist2.min(diff.rowwise().squaredNorm().array());
        }
        for (int k = 0; k < components_; ++k)
            blk.means.row(k) = Z.row(seeds[static_cast<std::size_t>(k)]);

        for (int j = 0; j < d; ++j) {
            double sd;
            if (n > 1) {
                const double m = Z.col(j).mean();
                sd = std::sqrt((Z.col(j).array() - m).square().sum() / static_cast<double>(n - 1));
            } else {
                sd = 0.05 * (box().hi[j] - box().lo[j]);
            }
            sd = std::max(sd, std_floor());
            blk.log_stds.col(j).setConstant(std::log(sd));
        }
    }

    int components_;
    std::vector<Block> blocks_;
};

} // namespace dope::density
