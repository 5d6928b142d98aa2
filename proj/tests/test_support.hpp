#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinnet/network.hpp"

namespace thinnet::testing {

using nlohmann::json;

inline json const_expr(double c) { return json{{"const", c}}; }

// Star with one interior node (id 0) and outer ends 1..M.  Edge k leaves along
// dirs[k]; v1 is constant per edge (negative on inlets).
inline json star_json(const std::vector<double>& h, const std::vector<double>& v, const std::vector<std::string>& dirs,
                      double T = 1.0, int dim = 2, double ell0 = 0.25, std::vector<double> half = {}) {
    json j;
    j["options"] = {{"dimension_mode", dim}, {"T", T}, {"alpha", 1.0}};
    if (half.empty()) half = std::vector<double>(3, ell0);
    json ports = json::array();
    for (std::size_t k = 0; k < h.size(); ++k) ports.push_back({{"edge", k}, {"dir", dirs[k]}});
    j["vertices"] = json::array();
    j["vertices"].push_back({{"id", 0}, {"kind", "node"}, {"ell0", ell0}, {"half_extent", half}, {"ports", ports}});
    j["edges"] = json::array();
    j["velocity"] = json::array();
    j["inlet_data"] = json::array();
    for (std::size_t k = 0; k < h.size(); ++k) {
        j["vertices"].push_back({{"id", k + 1}, {"kind", "outer"}});
        j["edges"].push_back({{"id", k}, {"from", 0}, {"to", k + 1}, {"length", 1.0}, {"h", h[k]}});
        j["velocity"].push_back({{"edge", k}, {"v1", v[k]}, {"delta", 0.1}});
        if (v[k] < 0) j["inlet_data"].push_back({{"edge", k}, {"q", json{{"poly", {{"var", "t"}, {"coeffs", {0, 0, 1}}}}}}});
    }
    return j;
}

// Two-edge channel along x: edge 0 inlet (-x), edge 1 outlet (+x).
inline json channel_json(double T = 2.0, double h = 0.25, double v = 1.0) {
    return star_json({h, h}, {-v, v}, {"-x", "+x"}, T, 2, 0.25, {0.25, 2 * h, 2 * h});
}

inline Network star(const std::vector<double>& h, const std::vector<double>& v, const std::vector<std::string>& dirs,
                    double T = 1.0, int dim = 2) {
    return network_from_json(star_json(h, v, dirs, T, dim));
}

}  // namespace thinnet::testing
