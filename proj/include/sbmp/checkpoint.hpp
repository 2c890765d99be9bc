#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbmp/bridge.hpp"
#include "sbmp/errors.hpp"
#include "sbmp/json_util.hpp"
#include "sbmp/model.hpp"
#include "sbmp/types.hpp"

namespace sbmp {

// A trained planner: the field model plus everything needed to run it on
// raw workspace coordinates.
struct Planner {
    model::FieldModel field;
    bridge::BridgeSpec bridge;
    NormStats norm;
    Workspace workspace;  // original (unnormalized) units
    double traj_dt = 0.0;  // time step assigned to generated trajectories
    std::uint64_t train_seed = 0;
};

namespace ckpt_detail {

constexpr char kMagic[4] = {'X', 'F', 'M', 'P'};
constexpr std::uint16_t kVersion = 1;

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw checkpoint_format_error("checkpoint truncated");
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

inline nlohmann::json arch_to_json(const model::ArchSpec& a) {
    return {{"levels", a.levels},        {"widths", a.widths},
            {"time_embed_dim", a.time_embed_dim}, {"cond_dim", a.cond_dim},
            {"kernel", a.kernel},        {"two_networks", a.two_networks}};
}

inline model::ArchSpec arch_from_json(const nlohmann::json& j) {
    model::ArchSpec a;
    a.levels = j.at("levels").get<int>();
    a.widths = j.at("widths").get<std::vector<int>>();
    a.time_embed_dim = j.at("time_embed_dim").get<int>();
    a.cond_dim = j.at("cond_dim").get<int>();
    a.kernel = j.at("kernel").get<int>();
    a.two_networks = j.at("two_networks").get<bool>();
    return a;
}

inline nlohmann::json bridge_to_json(const bridge::BridgeSpec& b) {
    return {{"family", bridge::family_name(b.family)},
            {"sigma", b.sigma},
            {"order", b.order},
            {"t_clamp", b.t_clamp},
            {"sigma_min", b.sigma_min}};
}

inline bridge::BridgeSpec bridge_from_json(const nlohmann::json& j) {
    bridge::BridgeSpec b;
    b.family = bridge::family_from_name(j.at("family").get<std::string>());
    b.sigma = j.at("sigma").get<double>();
    b.order = j.at("order").get<int>();
    b.t_clamp = j.at("t_clamp").get<double>();
    b.sigma_min = j.at("sigma_min").get<double>();
    return b;
}

}  // namespace ckpt_detail

// Binary checkpoint: magic "XFMP", version u16, length-prefixed UTF-8 JSON
// metadata, then named tensors as (name, rank, dims, little-endian f32 data).
inline void save_planner(const Planner& planner, const std::string& path) {
    using namespace ckpt_detail;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw checkpoint_format_error("cannot open checkpoint for writing: " + path);
    write_bytes(os, kMagic, 4);
    write_pod<std::uint16_t>(os, kVersion);

    nlohmann::json meta;
    meta["arch"] = arch_to_json(planner.field.arch);
    meta["d"] = planner.field.d;
    meta["length"] = planner.field.L;
    meta["bridge"] = bridge_to_json(planner.bridge);
    meta["norm"] = {{"center", planner.norm.center}, {"half_extent", planner.norm.half_extent}};
    meta["workspace"] = jsonu::workspace_to_json(planner.workspace);
    meta["traj_dt"] = planner.traj_dt;
    meta["train_seed"] = planner.train_seed;
    const std::string meta_str = meta.dump();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(meta_str.size()));
    write_bytes(os, meta_str.data(), meta_str.size());

    const auto& entries = planner.field.layout.entries;
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    std::vector<float> buf;
    for (const auto& e : entries) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        write_bytes(os, e.name.data(), e.name.size());
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.dims.size()));
        for (int d : e.dims) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        buf.resize(e.count());
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(planner.field.params[e.offset + i]);
        write_bytes(os, buf.data(), buf.size() * sizeof(float));
    }
    if (!os) throw checkpoint_format_error("checkpoint write failed: " + path);
}

inline Planner load_planner(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw checkpoint_format_error("cannot open checkpoint: " + path);
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw checkpoint_format_error("bad checkpoint magic");
    const auto version = read_pod<std::uint16_t>(is);
    if (version != kVersion)
        throw checkpoint_format_error("unsupported checkpoint version " + std::to_string(version));
    const auto meta_len = read_pod<std::uint32_t>(is);
    std::string meta_str(meta_len, '\0');
    read_bytes(is, meta_str.data(), meta_len);
    nlohmann::json meta = nlohmann::json::parse(meta_str, nullptr, false);
    if (meta.is_discarded()) throw checkpoint_format_error("checkpoint metadata is not valid JSON");

    Planner planner;
    try {
        const model::ArchSpec arch = arch_from_json(meta.at("arch"));
        planner.field = model::FieldModel(arch, meta.at("d").get<int>(), meta.at("length").get<int>());
        planner.bridge = bridge_from_json(meta.at("bridge"));
        planner.norm.center = meta.at("norm").at("center").get<std::vector<double>>();
        planner.norm.half_extent = meta.at("norm").at("half_extent").get<std::vector<double>>();
        planner.workspace = jsonu::workspace_from_json(meta.at("workspace"), "/workspace");
        planner.traj_dt = meta.at("traj_dt").get<double>();
        planner.train_seed = meta.at("train_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw checkpoint_format_error(std::string("checkpoint metadata: ") + e.what());
    }

    const auto n_tensors = read_pod<std::uint32_t>(is);
    if (n_tensors != planner.field.layout.entries.size())
        throw checkpoint_format_error("checkpoint tensor count does not match architecture");
    std::vector<float> buf;
    for (std::uint32_t ti = 0; ti < n_tensors; ++ti) {
        const auto name_len = read_pod<std::uint32_t>(is);
        std::string name(name_len, '\0');
        read_bytes(is, name.data(), name_len);
        const auto rank = read_pod<std::uint32_t>(is);
        std::vector<int> dims(rank);
        for (auto& d : dims) d = static_cast<int>(read_pod<std::uint64_t>(is));
        const auto& expect = planner.field.layout.entries[ti];
        if (name != expect.name || dims != expect.dims)
            throw checkpoint_format_error("checkpoint tensor \"" + name + "\" does not match architecture");
        buf.resize(expect.count());
        read_bytes(is, buf.data(), buf.size() * sizeof(float));
        for (std::size_t i = 0; i < buf.size(); ++i)
            planner.field.params[expect.offset + i] = static_cast<double>(buf[i]);
    }
    return planner;
}

}  // namespace sbmp
