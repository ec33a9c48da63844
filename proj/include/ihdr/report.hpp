#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ihdr/errors.hpp"
#include "ihdr/eval.hpp"

namespace ihdr {

namespace report_detail {

// JSON cannot carry infinities; the identity-prediction PSNR is reported as
// the string "inf".
inline nlohmann::ordered_json metric_value(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double mean(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

} // namespace report_detail

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["scale"] = r.scale;
    nlohmann::ordered_json crf = nlohmann::ordered_json::array();
    for (const auto& channel : r.crf_coeffs) crf.push_back(channel);
    j["crf_coeffs"] = crf;
    j["pu21_psnr"] = report_detail::metric_value(r.pu21_psnr);
    j["rmse_linear"] = r.rmse_linear;
    j["pu21_clamped"] = r.pu21_clamped;
    return j;
}

// JSON report: one object per image (sorted by id) plus an aggregate block
// with mean and median per metric.
inline void write_report_json(const std::filesystem::path& path, std::vector<EvalReport> reports) {
    if (reports.empty()) throw InvalidArgument("report: nothing to write");
    std::sort(reports.begin(), reports.end(),
              [](const EvalReport& a, const EvalReport& b) { return a.id < b.id; });
    nlohmann::ordered_json j;
    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    std::vector<double> psnrs, rmses;
    for (const EvalReport& r : reports) {
        images.push_back(to_json(r));
        psnrs.push_back(r.pu21_psnr);
        rmses.push_back(r.rmse_linear);
    }
    j["images"] = images;
    j["aggregate"] = nlohmann::ordered_json{
        {"count", reports.size()},
        {"pu21_psnr_mean", report_detail::metric_value(report_detail::mean(psnrs))},
        {"pu21_psnr_median", report_detail::metric_value(report_detail::median(psnrs))},
        {"rmse_linear_mean", report_detail::mean(rmses)},
        {"rmse_linear_median", report_detail::median(rmses)}};
    std::ofstream os(path);
    if (!os) throw ParseError("report: cannot open '" + path.string() + "' for writing");
    os << j.dump(2) << '\n';
    if (!os) throw ParseError("report: write failed for '" + path.string() + "'");
}

inline void write_report_csv(const std::filesystem::path& path, std::vector<EvalReport> reports) {
    if (reports.empty()) throw InvalidArgument("report: nothing to write");
    std::sort(reports.begin(), reports.end(),
              [](const EvalReport& a, const EvalReport& b) { return a.id < b.id; });
    std::ofstream os(path);
    if (!os) throw ParseError("report: cannot open '" + path.string() + "' for writing");
    os << "id,scale";
    const char* ch = "rgb";
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 4; ++k) os << ",a_" << ch[c] << k;
    os << ",pu21_psnr,rmse_linear,pu21_clamped\n";
    os.precision(17);
    for (const EvalReport& r : reports) {
        os << r.id << ',' << r.scale;
        for (const auto& channel : r.crf_coeffs)
            for (double a : channel) os << ',' << a;
        if (std::isinf(r.pu21_psnr))
            os << ",inf";
        else
            os << ',' << r.pu21_psnr;
        os << ',' << r.rmse_linear << ',' << (r.pu21_clamped ? 1 : 0) << '\n';
    }
    if (!os) throw ParseError("report: write failed for '" + path.string() + "'");
}

} // namespace ihdr
