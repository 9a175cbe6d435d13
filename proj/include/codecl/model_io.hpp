#pragma once

// Model checkpoint format: a JSON container of layer shapes, row-major
// 64-bit weight arrays and any attached adapter records.
//
//   { "format": "codecl-model", "version": 1,
//     "layers": [ { "rows": R, "cols": C, "weights": [...],
//                   "adapter": { "k": K, "u": [...], "m": [...] }? } ] }

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <vector>

#include "codecl/errors.hpp"
#include "codecl/network.hpp"

namespace codecl {

namespace detail {

inline std::vector<double> to_row_major(const Matrix& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

inline Matrix from_row_major(const std::vector<double>& v, Eigen::Index rows,
                             Eigen::Index cols) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw DataError("checkpoint: weight array size does not match shape");
    Matrix m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[i++];
    return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const MlpModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const LinearLayer& layer = model.layer(l);
        nlohmann::json j{{"rows", layer.w.rows()},
                         {"cols", layer.w.cols()},
                         {"weights", detail::to_row_major(layer.w)}};
        if (layer.adapter) {
            j["adapter"] = {{"k", layer.adapter->u.cols()},
                            {"u", detail::to_row_major(layer.adapter->u)},
                            {"m", detail::to_row_major(layer.adapter->m)}};
        }
        layers.push_back(std::move(j));
    }
    return nlohmann::json{{"format", "codecl-model"}, {"version", 1}, {"layers", layers}};
}

inline MlpModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "codecl-model")
        throw DataError("checkpoint: unrecognized format tag");
    std::vector<LinearLayer> layers;
    for (const auto& lj : j.at("layers")) {
        const Eigen::Index rows = lj.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = lj.at("cols").get<Eigen::Index>();
        LinearLayer layer{detail::from_row_major(lj.at("weights").get<std::vector<double>>(),
                                                 rows, cols),
                          std::nullopt};
        if (lj.contains("adapter")) {
            const auto& aj = lj["adapter"];
            const Eigen::Index k = aj.at("k").get<Eigen::Index>();
            layer.adapter =
                Adapter{detail::from_row_major(aj.at("u").get<std::vector<double>>(), cols, k),
                        detail::from_row_major(aj.at("m").get<std::vector<double>>(), k, k)};
        }
        layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers));
}

inline void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    out << model_to_json(model).dump();
}

inline MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace codecl
