#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dope/types.hpp"

namespace dope {

// Dataset file format: header `step,x_0..x_{D-1},a,r_0..r_{d-1},xp_0..xp_{D-1}`,
// floats with 17 significant digits, empty step column for discounted data.

namespace detail {

inline void append_double(std::string& out, double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

inline double parse_double(const char* begin, const char* end) {
    double v = 0.0;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc()) throw std::runtime_error("dataset csv: bad float field");
    return v;
}

} // namespace detail

inline void write_dataset_csv(const OfflineDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    const int D = dataset.meta().obs_dim;
    const int d = dataset.meta().reward_dim;
    std::string line = "step";
    for (int j = 0; j < D; ++j)
        line += ",x_" + std::to_string(j);
    line += ",a";
    for (int j = 0; j < d; ++j)
        line += ",r_" + std::to_string(j);
    for (int j = 0; j < D; ++j)
        line += ",xp_" + std::to_string(j);
    line += "\n";
    out << line;

    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const TransitionTuple& t = dataset[i];
        line.clear();
        if (t.step) line += std::to_string(*t.step);
        for (Eigen::Index j = 0; j < t.x.size(); ++j) {
            line += ',';
            detail::append_double(line, t.x[j]);
        }
        line += ',';
        line += std::to_string(t.action);
        for (Eigen::Index j = 0; j < t.reward.size(); ++j) {
            line += ',';
            detail::append_double(line, t.reward[j]);
        }
        for (Eigen::Index j = 0; j < t.x_next.size(); ++j) {
            line += ',';
            detail::append_double(line, t.x_next[j]);
        }
        line += '\n';
        out << line;
    }
}

/// Reads a dataset CSV. Dimensions come from the header; action count and
/// horizon in the returned meta are inferred from the data.
inline OfflineDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("dataset csv: missing header");

    int D = 0, d = 0;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ',')) {
            if (col.rfind("x_", 0) == 0) ++D;
            else if (col.rfind("r_", 0) == 0) ++d;
        }
        if (D == 0 || d == 0) throw std::runtime_error("dataset csv: malformed header");
    }
    const std::size_t fields_expected = 2 + 2 * static_cast<std::size_t>(D) + static_cast<std::size_t>(d);

    std::vector<TransitionTuple> tuples;
    int max_action = 0;
    int max_step = 0;
    bool any_step = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        TransitionTuple t;
        t.x.resize(D);
        t.reward.resize(d);
        t.x_next.resize(D);
        const char* p = line.data();
        const char* line_end = line.data() + line.size();
        std::size_t field = 0;
        const char* field_begin = p;
        auto handle_field = [&](const char* begin, const char* end) {
            if (field == 0) {
                if (begin != end) {
                    int step = 0;
                    std::from_chars(begin, end, step);
                    t.step = step;
                    any_step = true;
                    if (step > max_step) max_step = step;
                }
            } else if (field <= static_cast<std::size_t>(D)) {
                t.x[static_cast<Eigen::Index>(field - 1)] = detail::parse_double(begin, end);
            } else if (field == static_cast<std::size_t>(D) + 1) {
                int a = 0;
                std::from_chars(begin, end, a);
                t.action = a;
                if (a > max_action) max_action = a;
            } else if (field <= static_cast<std::size_t>(D) + 1 + static_cast<std::size_t>(d)) {
                t.reward[static_cast<Eigen::Index>(field - D - 2)] = detail::parse_double(begin, end);
            } else {
                t.x_next[static_cast<Eigen::Index>(field - D - d - 2)] = detail::parse_double(begin, end);
            }
            ++field;
        };
        for (const char* q = p; q != line_end; ++q) {
            if (*q == ',') {
                handle_field(field_begin, q);
                field_begin = q + 1;
            }
        }
        handle_field(field_begin, line_end);
        if (field != fields_expected) throw std::runtime_error("dataset csv: wrong field count in row");
        tuples.push_back(std::move(t));
    }
    if (tuples.empty()) throw std::runtime_error("dataset csv: no rows");

    DatasetMeta meta;
    meta.env_id = "csv";
    meta.obs_dim = D;
    meta.reward_dim = d;
    meta.num_actions = max_action + 1;
    if (any_step) meta.horizon = max_step;
    return OfflineDataset(std::move(tuples), std::move(meta));
}

} // namespace dope
