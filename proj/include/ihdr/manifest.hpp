#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ihdr/errors.hpp"

namespace ihdr {

// One JSON-lines record per simulated sample. The (seed, t, gamma,
// bit_depth, height, width) tuple is sufficient to regenerate every
// referenced image bit-identically.
struct ManifestRecord {
    std::uint64_t seed = 0;
    double t = 0.0;
    double gamma = 2.2;
    int bit_depth = 8;
    int height = 0;
    int width = 0;
    std::string ldr_png;
    std::string linear_pfm;
    std::string hdr_gt_pfm;
    std::string albedo_gt_pfm;
    std::string shading_gt_pfm;
    std::string albedo_ldr_pfm;
    std::string shading_ldr_pfm;
};

inline nlohmann::ordered_json to_json(const ManifestRecord& r) {
    nlohmann::ordered_json j;
    j["seed"] = r.seed;
    j["t"] = r.t;
    j["gamma"] = r.gamma;
    j["bit_depth"] = r.bit_depth;
    j["height"] = r.height;
    j["width"] = r.width;
    j["files"] = nlohmann::ordered_json{{"ldr_png", r.ldr_png},
                                        {"linear_pfm", r.linear_pfm},
                                        {"hdr_gt_pfm", r.hdr_gt_pfm},
                                        {"albedo_gt_pfm", r.albedo_gt_pfm},
                                        {"shading_gt_pfm", r.shading_gt_pfm},
                                        {"albedo_ldr_pfm", r.albedo_ldr_pfm},
                                        {"shading_ldr_pfm", r.shading_ldr_pfm}};
    return j;
}

inline ManifestRecord manifest_record_from_json(const nlohmann::json& j) {
    ManifestRecord r;
    try {
        r.seed = j.at("seed").get<std::uint64_t>();
        r.t = j.at("t").get<double>();
        r.gamma = j.at("gamma").get<double>();
        r.bit_depth = j.at("bit_depth").get<int>();
        r.height = j.at("height").get<int>();
        r.width = j.at("width").get<int>();
        const auto& f = j.at("files");
        r.ldr_png = f.at("ldr_png").get<std::string>();
        r.linear_pfm = f.at("linear_pfm").get<std::string>();
        r.hdr_gt_pfm = f.at("hdr_gt_pfm").get<std::string>();
        r.albedo_gt_pfm = f.at("albedo_gt_pfm").get<std::string>();
        r.shading_gt_pfm = f.at("shading_gt_pfm").get<std::string>();
        r.albedo_ldr_pfm = f.at("albedo_ldr_pfm").get<std::string>();
        r.shading_ldr_pfm = f.at("shading_ldr_pfm").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    return r;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<ManifestRecord>& records) {
    std::ofstream os(path);
    if (!os) throw ParseError("manifest: cannot open '" + path.string() + "' for writing");
    for (const ManifestRecord& r : records) os << to_json(r).dump() << '\n';
    if (!os) throw ParseError("manifest: write failed for '" + path.string() + "'");
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("manifest: cannot open '" + path.string() + "'");
    std::vector<ManifestRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(manifest_record_from_json(j));
    }
    return records;
}

} // namespace ihdr
