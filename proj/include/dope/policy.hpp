#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

#include <Eigen/Dense>

#include "dope/rng.hpp"
#include "dope/types.hpp"

namespace dope {

/**
 * A policy maps an observation to a distribution over the A actions.
 * Implementations must return probability vectors summing to 1 within 1e-9
 * for every queried observation.
 */
class Policy {
  public:
    virtual ~Policy() = default;

    virtual int num_actions() const = 0;

    /// Action probabilities at x; length equals num_actions().
    virtual Eigen::VectorXd probs(const Observation& x) const = 0;

    virtual ActionId sample(const Observation& x, RngStream& rng) const {
        return rng.categorical(probs(x));
    }
};

inline void validate_probs(const Eigen::VectorXd& p, double tol = 1e-9) {
    if (p.minCoeff() < -tol) throw std::invalid_argument("policy probabilities must be nonnegative");
    if (std::abs(p.sum() - 1.0) > tol)
        throw std::invalid_argument("policy probabilities must sum to 1");
}

} // namespace dope
