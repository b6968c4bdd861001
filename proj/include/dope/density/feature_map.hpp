#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "dope/types.hpp"

namespace dope::density {

/**
 * Deterministic conditioning mechanism: maps an observation to a discrete
 * cell index. Models hold one parameter block per (cell, action). This is
 * the tabular-over-latent-features stand-in for a learned conditioner.
 */
class FeatureMap {
  public:
    virtual ~FeatureMap() = default;
    virtual int num_cells() const = 0;
    virtual int cell(const Observation& x) const = 0;
    virtual std::string id() const = 0;
};

/// Reads the combination lock's exact one-hot blocks: cell = w + 2 (h - 1).
class LockFeatureMap : public FeatureMap {
  public:
    explicit LockFeatureMap(int horizon) : horizon_(horizon) {
        if (horizon_ < 1) throw std::invalid_argument("LockFeatureMap: bad horizon");
    }

    int num_cells() const override { return 2 * horizon_; }

    int cell(const Observation& x) const override {
        const int w = x[1] > x[0] ? 1 : 0;
        int best = 0;
        for (int h = 1; h < horizon_; ++h)
            if (x[2 + h] > x[2 + best]) best = h;
        return w + 2 * best;
    }

    std::string id() const override { return "lock:" + std::to_string(horizon_); }

  private:
    int horizon_;
};

/// Observation holds the state index directly (tabular MDPs).
class TabularFeatureMap : public FeatureMap {
  public:
    explicit TabularFeatureMap(int num_states) : num_states_(num_states) {
        if (num_states_ < 1) throw std::invalid_argument("TabularFeatureMap: bad state count");
    }

    int num_cells() const override { return num_states_; }

    int cell(const Observation& x) const override {
        const int s = static_cast<int>(std::lround(x[0]));
        if (s < 0 || s >= num_states_) throw std::out_of_range("TabularFeatureMap: state out of range");
        return s;
    }

    std::string id() const override { return "tabular:" + std::to_string(num_states_); }

  private:
    int num_states_;
};

/// Single cell; conditions on nothing (marginal fitting).
class ConstFeatureMap : public FeatureMap {
  public:
    int num_cells() const override { return 1; }
    int cell(const Observation&) const override { return 0; }
    std::string id() const override { return "const"; }
};

inline std::shared_ptr<const FeatureMap> feature_map_from_id(const std::string& id) {
    if (id == "const") return std::make_shared<ConstFeatureMap>();
    const auto colon = id.find(':');
    if (colon != std::string::npos) {
        const std::string kind = id.substr(0, colon);
        const int arg = std::stoi(id.substr(colon + 1));
        if (kind == "lock") return std::make_shared<LockFeatureMap>(arg);
        if (kind == "tabular") return std::make_shared<TabularFeatureMap>(arg);
    }
    throw std::invalid_argument("unknown feature map id: " + id);
}

} // namespace dope::density
