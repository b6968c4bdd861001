#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dope::metrics {

/**
 * Exact minimum-cost perfect matching on a square cost matrix (Hungarian
 * algorithm with potentials, O(n^3)). Returns the optimal total cost;
 * `assignment`, when given, receives the matched column of each row.
 */
inline double min_cost_assignment(const Eigen::MatrixXd& cost, std::vector<int>* assignment = nullptr) {
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw std::invalid_argument("min_cost_assignment: matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // column -> row (1-based, 0 = free)
    std::vector<int> parent(static_cast<std::size_t>(n) + 1, 0);

    for (int row = 1; row <= n; ++row) {
        match[0] = row;
        int j0 = 0;
        std::vector<double> min_slack(static_cast<std::size_t>(n) + 1, inf);
        std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double slack = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (slack < min_slack[static_cast<std::size_t>(j)]) {
                    min_slack[static_cast<std::size_t>(j)] = slack;
                    parent[static_cast<std::size_t>(j)] = j0;
                }
                if (min_slack[static_cast<std::size_t>(j)] < delta) {
                    delta = min_slack[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    min_slack[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        // augment along the alternating path
        while (j0 != 0) {
            const int j1 = parent[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        }
    }

    double total = 0.0;
    if (assignment) assignment->assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        const int i = match[static_cast<std::size_t>(j)];
        total += cost(i - 1, j - 1);
        if (assignment) (*assignment)[static_cast<std::size_t>(i - 1)] = j - 1;
    }
    return total;
}

} // namespace dope::metrics
