#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sbmp/errors.hpp"
#include "sbmp/json_util.hpp"
#include "sbmp/traj_ops.hpp"
#include "sbmp/types.hpp"

namespace sbmp::envs {

inline constexpr int kDatasetFormatVersion = 1;

// On-disk dataset schema:
// { "format_version": 1,
//   "workspace": {"bounds": {"min": [...], "max": [...]},
//                  "obstacles": [{"center": [...], "radius": r}]},
//   "trajectories": [{"dt": s, "q": [[...],...], "qd"?: ..., "qdd"?: ...}] }
// Derived derivatives are not stored; they are re-differenced on load.
inline nlohmann::json dataset_to_json(const Dataset& ds) {
    using nlohmann::json;
    json out;
    out["format_version"] = kDatasetFormatVersion;
    out["workspace"] = jsonu::workspace_to_json(ds.workspace);
    json trajs = json::array();
    for (const Trajectory& t : ds.trajectories) {
        json jt;
        jt["dt"] = t.dt;
        auto rows = [&](const std::vector<double>& a) {
            json r = json::array();
            for (int i = 0; i < t.length; ++i) {
                json row = json::array();
                for (int j = 0; j < t.dim; ++j) row.push_back(a[static_cast<std::size_t>(i) * t.dim + j]);
                r.push_back(std::move(row));
            }
            return r;
        };
        jt["q"] = rows(t.q);
        if (!t.derived_derivatives) {
            jt["qd"] = rows(t.qd);
            jt["qdd"] = rows(t.qdd);
        }
        trajs.push_back(std::move(jt));
    }
    out["trajectories"] = std::move(trajs);
    return out;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    validate_dataset(ds);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw invalid_input_error("cannot open dataset file for writing: " + path);
    os << dataset_to_json(ds).dump(1) << "\n";
    if (!os) throw invalid_input_error("dataset write failed: " + path);
}

namespace io_detail {

inline std::vector<double> matrix_rows(const nlohmann::json& j, int expect_cols, const std::string& ptr) {
    if (!j.is_array() || j.empty()) throw parse_error(ptr + ": expected a nonempty array of rows");
    std::vector<double> flat;
    int cols = expect_cols;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string rptr = ptr + "/" + std::to_string(i);
        const auto row = jsonu::number_array(j[i], rptr);
        if (cols < 0) cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != cols) throw parse_error(rptr + ": inconsistent row width");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
}

}  // namespace io_detail

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw parse_error("cannot open dataset file: " + path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw parse_error("/: file is not valid JSON");

    const auto& ver = jsonu::require(j, "format_version", "");
    if (!ver.is_number_integer() || ver.get<int>() != kDatasetFormatVersion)
        throw parse_error("/format_version: unsupported value");

    Dataset ds;
    ds.workspace = jsonu::workspace_from_json(jsonu::require(j, "workspace", ""), "/workspace");
    const int d = ds.workspace.dim();

    const auto& trajs = jsonu::require(j, "trajectories", "");
    if (!trajs.is_array() || trajs.empty()) throw parse_error("/trajectories: expected a nonempty array");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const std::string ptr = "/trajectories/" + std::to_string(i);
        const auto& jt = trajs[i];
        const auto& jdt = jsonu::require(jt, "dt", ptr);
        if (!jdt.is_number() || jdt.get<double>() <= 0.0) throw parse_error(ptr + "/dt: expected a positive number");
        Trajectory t;
        t.dt = jdt.get<double>();
        t.q = io_detail::matrix_rows(jsonu::require(jt, "q", ptr), d, ptr + "/q");
        t.dim = d;
        t.length = static_cast<int>(t.q.size()) / d;
        if (t.length < 3) throw parse_error(ptr + "/q: need at least 3 samples");
        const bool has_qd = jt.contains("qd");
        const bool has_qdd = jt.contains("qdd");
        if (has_qd != has_qdd) throw parse_error(ptr + ": qd and qdd must be given together");
        if (has_qd) {
            t.qd = io_detail::matrix_rows(jt.at("qd"), d, ptr + "/qd");
            t.qdd = io_detail::matrix_rows(jt.at("qdd"), d, ptr + "/qdd");
            if (t.qd.size() != t.q.size() || t.qdd.size() != t.q.size())
                throw parse_error(ptr + ": q/qd/qdd row counts differ");
            t.derived_derivatives = false;
        } else {
            auto [qd, qdd] = finite_differences(t.q, t.length, d, t.dt);
            t.qd = std::move(qd);
            t.qdd = std::move(qdd);
            t.derived_derivatives = true;
        }
        Task task;
        task.start = t.start();
        task.goal = t.goal();
        ds.tasks.push_back(std::move(task));
        ds.trajectories.push_back(std::move(t));
    }
    try {
        validate_dataset(ds);
    } catch (const invalid_input_error& e) {
        throw parse_error(std::string("/trajectories: ") + e.what());
    }
    return ds;
}

}  // namespace sbmp::envs
