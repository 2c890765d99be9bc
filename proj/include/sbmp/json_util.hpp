#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sbmp/errors.hpp"
#include "sbmp/types.hpp"

namespace sbmp::jsonu {

using nlohmann::json;

inline json workspace_to_json(const Workspace& w) {
    json obstacles = json::array();
    for (const Circle& c : w.obstacles) obstacles.push_back({{"center", c.center}, {"radius", c.radius}});
    return json{{"bounds", {{"min", w.lo}, {"max", w.hi}}}, {"obstacles", obstacles}};
}

inline std::vector<double> number_array(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.empty()) throw parse_error(ptr + ": expected a nonempty number array");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw parse_error(ptr + "/" + std::to_string(i) + ": expected a number");
        out.push_back(j[i].get<double>());
    }
    return out;
}

inline const json& require(const json& j, const char* key, const std::string& ptr) {
    if (!j.is_object() || !j.contains(key)) throw parse_error(ptr + ": missing required field \"" + key + "\"");
    return j.at(key);
}

inline Workspace workspace_from_json(const json& j, const std::string& ptr) {
    Workspace w;
    const json& bounds = require(j, "bounds", ptr);
    w.lo = number_array(require(bounds, "min", ptr + "/bounds"), ptr + "/bounds/min");
    w.hi = number_array(require(bounds, "max", ptr + "/bounds"), ptr + "/bounds/max");
    if (j.contains("obstacles")) {
        const json& obs = j.at("obstacles");
        if (!obs.is_array()) throw parse_error(ptr + "/obstacles: expected an array");
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const std::string optr = ptr + "/obstacles/" + std::to_string(i);
            Circle c;
            c.center = number_array(require(obs[i], "center", optr), optr + "/center");
            const json& r = require(obs[i], "radius", optr);
            if (!r.is_number()) throw parse_error(optr + "/radius: expected a number");
            c.radius = r.get<double>();
            w.obstacles.push_back(std::move(c));
        }
    }
    try {
        validate_workspace(w);
    } catch (const invalid_input_error& e) {
        throw parse_error(ptr + ": " + e.what());
    }
    return w;
}

}  // namespace sbmp::jsonu
