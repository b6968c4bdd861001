#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dope/rng.hpp"

namespace dope {

/// Observation vector x. Dimension is fixed per environment instance.
using Observation = Eigen::VectorXd;

/// Reward vector r, d-dimensional.
using Reward = Eigen::VectorXd;

/// Discrete action index in [0, A).
using ActionId = int;

/// One interaction record (x, a, r, x'). `step` is set for finite-horizon
/// data and empty for discounted data.
struct TransitionTuple {
    Observation x;
    ActionId action = 0;
    Reward reward;
    Observation x_next;
    std::optional<int> step;
};

struct DatasetMeta {
    std::string env_id;
    int reward_dim = 1;
    int obs_dim = 1;
    int num_actions = 1;
    std::optional<int> horizon;
    std::optional<double> gamma;
};

/**
 * Immutable offline dataset of i.i.d. tuples. Splits share the underlying
 * tuple storage and only copy index vectors, so memory stays linear in the
 * original size.
 */
class OfflineDataset {
  public:
    OfflineDataset(std::vector<TransitionTuple> tuples, DatasetMeta meta)
        : storage_(std::make_shared<const std::vector<TransitionTuple>>(std::move(tuples))),
          meta_(std::move(meta)) {
        if (storage_->empty()) throw std::invalid_argument("OfflineDataset: empty tuple list");
        indices_.resize(storage_->size());
        for (std::size_t i = 0; i < indices_.size(); ++i)
            indices_[i] = static_cast<std::uint32_t>(i);
    }

    const DatasetMeta& meta() const { return meta_; }
    std::size_t size() const { return indices_.size(); }

    const TransitionTuple& operator[](std::size_t i) const { return (*storage_)[indices_[i]]; }

    /// FNV-1a over the tuple payloads, order-sensitive. Used for audit
    /// trails in run manifests.
    std::uint64_t content_hash() const {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        auto mix_double = [&h](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xFFULL;
                h *= 0x100000001B3ULL;
            }
        };
        for (std::size_t i = 0; i < size(); ++i) {
            const TransitionTuple& t = (*this)[i];
            for (Eigen::Index j = 0; j < t.x.size(); ++j)
                mix_double(t.x[j]);
            mix_double(static_cast<double>(t.action));
            for (Eigen::Index j = 0; j < t.reward.size(); ++j)
                mix_double(t.reward[j]);
            for (Eigen::Index j = 0; j < t.x_next.size(); ++j)
                mix_double(t.x_next[j]);
            mix_double(t.step ? static_cast<double>(*t.step) : -1.0);
        }
        return h;
    }

    /// Random even split into k disjoint parts whose multiset union is the
    /// input; part sizes differ by at most one.
    std::vector<OfflineDataset> split(int k, RngStream& rng) const {
        if (k <= 0 || static_cast<std::size_t>(k) > size())
            throw std::invalid_argument("split: need 1 <= k <= dataset size");
        std::vector<std::uint32_t> perm = indices_;
        rng.shuffle(perm);
        std::vector<OfflineDataset> parts;
        parts.reserve(static_cast<std::size_t>(k));
        const std::size_t n = perm.size();
        const std::size_t base = n / static_cast<std::size_t>(k);
        const std::size_t extra = n % static_cast<std::size_t>(k);
        std::size_t offset = 0;
        for (int part = 0; part < k; ++part) {
            const std::size_t len = base + (static_cast<std::size_t>(part) < extra ? 1 : 0);
            std::vector<std::uint32_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                           perm.begin() + static_cast<std::ptrdiff_t>(offset + len));
            parts.push_back(OfflineDataset(storage_, meta_, std::move(idx)));
            offset += len;
        }
        return parts;
    }

    /// View of the tuples whose step label equals h (1-based).
    OfflineDataset filter_step(int h) const {
        std::vector<std::uint32_t> idx;
        for (std::uint32_t i : indices_) {
            const auto& t = (*storage_)[i];
            if (t.step && *t.step == h) idx.push_back(i);
        }
        if (idx.empty()) throw std::invalid_argument("filter_step: no tuples at step " + std::to_string(h));
        return OfflineDataset(storage_, meta_, std::move(idx));
    }

  private:
    OfflineDataset(std::shared_ptr<const std::vector<TransitionTuple>> storage, DatasetMeta meta,
                   std::vector<std::uint32_t> indices)
        : storage_(std::move(storage)), meta_(std::move(meta)), indices_(std::move(indices)) {}

    std::shared_ptr<const std::vector<TransitionTuple>> storage_;
    DatasetMeta meta_;
    std::vector<std::uint32_t> indices_;
};

inline std::vector<OfflineDataset> split_dataset(const OfflineDataset& dataset, int k, RngStream& rng) {
    return dataset.split(k, rng);
}

/// Multiset of return vectors, stored one sample per row.
class EmpiricalDistribution {
  public:
    explicit EmpiricalDistribution(Eigen::MatrixXd samples) : samples_(std::move(samples)) {
        if (samples_.rows() == 0) throw std::invalid_argument("EmpiricalDistribution: no samples");
    }

    static EmpiricalDistribution from_scalars(const Eigen::VectorXd& values) {
        Eigen::MatrixXd m(values.size(), 1);
        m.col(0) = values;
        return EmpiricalDistribution(std::move(m));
    }

    Eigen::Index size() const { return samples_.rows(); }
    Eigen::Index dim() const { return samples_.cols(); }
    const Eigen::MatrixXd& samples() const { return samples_; }
    Eigen::VectorXd scalars() const {
        if (dim() != 1) throw std::invalid_argument("scalars: distribution is not 1-d");
        return samples_.col(0);
    }

  private:
    Eigen::MatrixXd samples_;
};

} // namespace dope
