#pragma once

#include <json.hpp>

#include "locenc/encoders.hpp"
#include "locenc/errors.hpp"

namespace locenc {

using ordered_json = nlohmann::ordered_json;

inline ordered_json encoder_spec_to_json(const EncoderSpec& spec) {
    ordered_json j;
    j["kind"] = encoder_kind_name(spec.kind);
    j["S"] = spec.S;
    j["r_min"] = spec.r_min;
    j["r_max"] = spec.r_max;
    j["W_dim"] = spec.W_dim;
    j["sigma"] = spec.sigma;
    j["delta"] = spec.delta;
    j["L"] = spec.L;
    j["cell_deg"] = spec.cell_deg;
    j["seed"] = spec.seed;
    return j;
}

inline EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
    EncoderSpec spec = EncoderSpec::defaults(encoder_kind_from_name(j.at("kind")));
    spec.S = j.at("S").get<int>();
    spec.r_min = j.at("r_min").get<double>();
    spec.r_max = j.at("r_max").get<double>();
    spec.W_dim = j.at("W_dim").get<int>();
    spec.sigma = j.at("sigma").get<double>();
    spec.delta = j.at("delta").get<double>();
    spec.L = j.at("L").get<int>();
    spec.cell_deg = j.at("cell_deg").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    validate_spec(spec);
    return spec;
}

inline ordered_json encoder_aux_to_json(const EncoderAux& aux) {
    if (const auto* rbf = std::get_if<RbfAnchors>(&aux)) {
        ordered_json pts = ordered_json::array();
        for (const auto& a : rbf->anchors) pts.push_back({a.lon, a.lat});
        return ordered_json{{"rbf_anchors", pts}};
    }
    if (const auto* rff = std::get_if<RffParams>(&aux)) {
        ordered_json omegas = ordered_json::array();
        for (Eigen::Index i = 0; i < rff->omegas.rows(); ++i) {
            omegas.push_back({rff->omegas(i, 0), rff->omegas(i, 1)});
        }
        ordered_json shifts = ordered_json::array();
        for (Eigen::Index i = 0; i < rff->shifts.size(); ++i) shifts.push_back(rff->shifts[i]);
        return ordered_json{{"rff_omegas", omegas}, {"rff_shifts", shifts}};
    }
    return ordered_json(nullptr);
}

inline EncoderAux encoder_aux_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.contains("rbf_anchors")) {
        RbfAnchors anchors;
        for (const auto& p : j.at("rbf_anchors")) {
            anchors.anchors.push_back(LocationDeg{p.at(0).get<double>(), p.at(1).get<double>()});
        }
        return anchors;
    }
    if (j.contains("rff_omegas")) {
        RffParams params;
        const auto& om = j.at("rff_omegas");
        const auto& sh = j.at("rff_shifts");
        params.omegas.resize(static_cast<Eigen::Index>(om.size()), 2);
        params.shifts.resize(static_cast<Eigen::Index>(sh.size()));
        for (std::size_t i = 0; i < om.size(); ++i) {
            params.omegas(static_cast<Eigen::Index>(i), 0) = om[i].at(0).get<double>();
            params.omegas(static_cast<Eigen::Index>(i), 1) = om[i].at(1).get<double>();
        }
        for (std::size_t i = 0; i < sh.size(); ++i) {
            params.shifts[static_cast<Eigen::Index>(i)] = sh[i].get<double>();
        }
        return params;
    }
    throw ParseError("unrecognized encoder aux payload");
}

} // namespace locenc
