#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qepsd/phase_space.hpp"
#include "qepsd/vectors.hpp"

namespace qepsd {

/// Unreadable or malformed input file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kStageHeader = "stage,index,i,q";
inline constexpr const char* kStages[] = {"tx_plain", "tx_cipher", "rx_raw", "rx_dsp_attacker", "rx_decrypted"};

struct StageDump {
    std::string stage;
    std::vector<PhasePoint> points;
};

inline void append_stage_csv(std::string& out, const std::string& stage, std::span<const PhasePoint> pts) {
    for (std::size_t n = 0; n < pts.size(); ++n)
        out += stage + ',' + std::to_string(n) + ',' + format_double(pts[n].real()) + ',' +
               format_double(pts[n].imag()) + '\n';
}

inline std::string stage_csv(std::span<const StageDump> stages) {
    std::string out = std::string(kStageHeader) + '\n';
    for (const auto& s : stages) append_stage_csv(out, s.stage, s.points);
    return out;
}

/// Stage name -> points in file order. An empty file and a header-only file
/// both yield no stages.
inline std::map<std::string, std::vector<PhasePoint>> read_stage_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::map<std::string, std::vector<PhasePoint>> stages;
    std::string line;
    if (!std::getline(in, line)) return stages;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStageHeader) throw InputError(path.string() + ": expected header '" + kStageHeader + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 4 || f[0].empty())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
        try {
            std::size_t used_i = 0, used_q = 0;
            const double i = std::stod(f[2], &used_i);
            const double q = std::stod(f[3], &used_q);
            if (used_i != f[2].size() || used_q != f[3].size()) throw std::invalid_argument("trailing");
            stages[f[0]].emplace_back(i, q);
        } catch (const std::exception&) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return stages;
}

inline const char* stage_color(const std::string& stage) {
    if (stage == "tx_plain") return "#1f77b4";
    if (stage == "tx_cipher") return "#ff7f0e";
    if (stage == "rx_raw") return "#7f7f7f";
    if (stage == "rx_dsp_attacker") return "#d62728";
    if (stage == "rx_decrypted") return "#2ca02c";
    return "#9467bd";
}

/// Square, equal-aspect scatter of every stage in the CSV (or just `only`).
/// Axes are symmetric about the origin and cover all plotted points.
inline void emit_scatter(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
                         const std::optional<std::string>& only = std::nullopt) {
    auto stages = read_stage_csv(csv_path);
    if (only) {
        auto it = stages.find(*only);
        decltype(stages) kept;
        if (it != stages.end()) kept.insert(*it);
        stages = std::move(kept);
    }

    double extent = 0.0;
    for (const auto& [name, pts] : stages)
        for (auto p : pts) extent = std::max({extent, std::abs(p.real()), std::abs(p.imag())});
    const double range = extent > 0.0 ? std::ceil(extent * 1.1 * 2.0) / 2.0 : 1.0;

    constexpr double size = 640.0, margin = 40.0, plot = size - 2 * margin;
    auto sx = [&](double v) { return margin + (v + range) / (2 * range) * plot; };
    auto sy = [&](double v) { return margin + (range - v) / (2 * range) * plot; };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"640\" fill=\"white\"/>\n";
    svg += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(plot) + "\" height=\"" +
           num(plot) + "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(sx(-range)) + "\" y1=\"" + num(sy(0)) + "\" x2=\"" + num(sx(range)) + "\" y2=\"" +
           num(sy(0)) + "\" stroke=\"#bbbbbb\"/>\n";
    svg += "<line x1=\"" + num(sx(0)) + "\" y1=\"" + num(sy(-range)) + "\" x2=\"" + num(sx(0)) + "\" y2=\"" +
           num(sy(range)) + "\" stroke=\"#bbbbbb\"/>\n";
    svg += "<text x=\"" + num(size / 2) + "\" y=\"" + num(size - 10) + "\" font-size=\"12\" text-anchor=\"middle\">I  [" +
           num(-range) + ", " + num(range) + "]</text>\n";
    svg += "<text x=\"12\" y=\"" + num(size / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 " +
           num(size / 2) + ")\">Q</text>\n";

    double legend_y = margin + 14;
    for (const auto& [name, pts] : stages) {
        const char* color = stage_color(name);
        svg += "<g fill=\"" + std::string(color) + "\" fill-opacity=\"0.5\">\n";
        for (auto p : pts) svg += "<circle cx=\"" + num(sx(p.real())) + "\" cy=\"" + num(sy(p.imag())) + "\" r=\"1.2\"/>\n";
        svg += "</g>\n";
        svg += "<text x=\"" + num(margin + 6) + "\" y=\"" + num(legend_y) + "\" font-size=\"12\" fill=\"" + color + "\">" +
               name + "</text>\n";
        legend_y += 14;
    }
    svg += "</svg>\n";

    std::ofstream out(svg_path, std::ios::binary);
    if (!out || !(out << svg)) throw InputError("cannot write " + svg_path.string());
}

}  // namespace qepsd
