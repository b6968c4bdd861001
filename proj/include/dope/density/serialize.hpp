#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "dope/density/categorical.hpp"
#include "dope/density/fixed_gaussian.hpp"
#include "dope/density/gmm.hpp"
#include "dope/density/model.hpp"
#include "dope/density/tabular_mixture.hpp"

namespace dope::density {

inline std::unique_ptr<ConditionalDensityModel> model_from_json(const nlohmann::json& j) {
    const auto family = j.at("family").get<std::string>();
    const auto fmap = feature_map_from_id(j.at("feature_map").get<std::string>());
    const int num_actions = j.at("num_actions").get<int>();
    Box box;
    const auto lo = j.at("box_lo").get<std::vector<double>>();
    const auto hi = j.at("box_hi").get<std::vector<double>>();
    box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));

    std::unique_ptr<ConditionalDensityModel> model;
    const auto& params = j.at("params");
    if (family == "gmm") {
        model = std::make_unique<ConditionalGmm>(fmap, num_actions, box, params.at("components").get<int>());
    } else if (family == "categorical") {
        AtomGrid grid;
        grid.counts = params.at("counts").get<std::vector<int>>();
        grid.lo = params.at("grid_lo").get<std::vector<double>>();
        grid.hi = params.at("grid_hi").get<std::vector<double>>();
        model = std::make_unique<CategoricalGridModel>(fmap, num_actions, box, grid);
    } else if (family == "fixed_gaussian") {
        model = std::make_unique<FixedVarianceGaussian>(fmap, num_actions, box,
                                                        params.at("sigma").get<double>());
    } else if (family == "tabular_mixture") {
        std::vector<Density1d> dict;
        for (const auto& jd : params.at("dictionary")) {
            const auto type = jd.at("type").get<std::string>();
            if (type == "gaussian")
                dict.push_back(Gaussian1d{jd.at("mean").get<double>(), jd.at("std").get<double>()});
            else
                dict.push_back(Uniform1d{jd.at("lo").get<double>(), jd.at("hi").get<double>()});
        }
        model = std::make_unique<TabularMixtureModel>(fmap, num_actions, box, std::move(dict));
    } else {
        throw std::invalid_argument("model_from_json: unknown family " + family);
    }
    model->load_params(params);
    return model;
}

inline void save_model(const ConditionalDensityModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << model.to_json().dump(2) << "\n";
}

inline std::unique_ptr<ConditionalDensityModel> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

} // namespace dope::density
