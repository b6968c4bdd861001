#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "dope/rng.hpp"

namespace dope {

/// Scalar Gaussian with analytic density. `stddev == 0` is allowed for
/// sampling-only use (point mass); density queries then throw.
struct Gaussian1d {
    double mean = 0.0;
    double stddev = 1.0;

    double sample(RngStream& rng) const { return stddev == 0.0 ? mean : rng.normal(mean, stddev); }

    double log_pdf(double z) const {
        if (stddev <= 0.0) throw std::invalid_argument("Gaussian1d: log_pdf needs stddev > 0");
        const double u = (z - mean) / stddev;
        return -0.5 * u * u - std::log(stddev) - 0.5 * std::log(2.0 * M_PI);
    }

    double pdf(double z) const { return std::exp(log_pdf(z)); }
};

/// Uniform density on [lo, hi].
struct Uniform1d {
    double lo = 0.0;
    double hi = 1.0;

    double sample(RngStream& rng) const { return rng.uniform(lo, hi); }

    double log_pdf(double z) const {
        if (hi <= lo) throw std::invalid_argument("Uniform1d: needs hi > lo");
        if (z < lo || z > hi) return -std::numeric_limits<double>::infinity();
        return -std::log(hi - lo);
    }

    double pdf(double z) const { return (z < lo || z > hi) ? 0.0 : 1.0 / (hi - lo); }
};

using Density1d = std::variant<Gaussian1d, Uniform1d>;

inline double sample(const Density1d& density, RngStream& rng) {
    return std::visit([&rng](const auto& d) { return d.sample(rng); }, density);
}

inline double pdf(const Density1d& density, double z) {
    return std::visit([z](const auto& d) { return d.pdf(z); }, density);
}

inline double log_pdf(const Density1d& density, double z) {
    return std::visit([z](const auto& d) { return d.log_pdf(z); }, density);
}

inline double mean(const Density1d& density) {
    if (const auto* g = std::get_if<Gaussian1d>(&density)) return g->mean;
    const auto& u = std::get<Uniform1d>(density);
    return 0.5 * (u.lo + u.hi);
}

/// Density of the mixture sum_k weights[k] * dict[k] at z.
inline double mixture_pdf(const std::vector<Density1d>& dict, const Eigen::VectorXd& weights, double z) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < weights.size(); ++k)
        acc += weights[k] * pdf(dict[static_cast<std::size_t>(k)], z);
    return acc;
}

/// 0.5 * integral |p - q| over [lo, hi] by composite Simpson quadrature,
/// for two mixtures over the same dictionary.
inline double mixture_tv_quadrature(const std::vector<Density1d>& dict, const Eigen::VectorXd& w_p,
                                    const Eigen::VectorXd& w_q, double lo, double hi, int points = 8001) {
    if (points % 2 == 0) ++points;
    const double step = (hi - lo) / (points - 1);
    double acc = 0.0;
    for (int i = 0; i < points; ++i) {
        const double z = lo + step * i;
        const double diff = std::abs(mixture_pdf(dict, w_p, z) - mixture_pdf(dict, w_q, z));
        const double coeff = (i == 0 || i == points - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += coeff * diff;
    }
    return 0.5 * acc * step / 3.0;
}

} // namespace dope
