#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bimodal/errors.hpp"
#include "bimodal/metrics.hpp"

namespace bimodal {

struct MetricRow {
    std::string metric;   // e.g. fid, is, joint_fid, mid, classification_accuracy
    std::string modality; // "" for joint metrics
    GroupedScore score;
};

struct MetricReport {
    std::string name; // run label, e.g. "semi_supervised"
    std::vector<MetricRow> rows;

    const MetricRow* find(const std::string& metric, const std::string& modality = "") const {
        for (const auto& r : rows)
            if (r.metric == metric && r.modality == modality) return &r;
        return nullptr;
    }
};

inline void save_metric_report(const MetricReport& rep, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw InputError("cannot write report: " + csv_path);
    out << "metric,modality,mean,std,group_values\n";
    for (const auto& r : rep.rows) {
        out << r.metric << "," << r.modality << "," << std::setprecision(12) << r.score.mean << ","
            << r.score.std << ",";
        for (std::size_t i = 0; i < r.score.group_values.size(); ++i)
            out << (i ? ";" : "") << r.score.group_values[i];
        out << "\n";
    }
}

inline MetricReport load_metric_report(const std::string& csv_path, const std::string& name) {
    std::ifstream in(csv_path);
    if (!in) throw InputError("cannot open report: " + csv_path);
    MetricReport rep;
    rep.name = name;
    std::string line;
    if (!std::getline(in, line) || line.rfind("metric,modality,mean,std", 0) != 0)
        throw InputError("not a metric report: " + csv_path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                cols.push_back(cur);
                cur.clear();
            } else if (ch != '\r')
                cur += ch;
        }
        cols.push_back(cur);
        if (cols.size() < 5) throw InputError("malformed report row in " + csv_path);
        MetricRow r;
        r.metric = cols[0];
        r.modality = cols[1];
        r.score.metric_name = r.metric;
        r.score.mean = std::stod(cols[2]);
        r.score.std = std::stod(cols[3]);
        std::string v;
        for (char ch : cols[4] + ";") {
            if (ch == ';') {
                if (!v.empty()) r.score.group_values.push_back(std::stod(v));
                v.clear();
            } else
                v += ch;
        }
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

inline std::string render_report_table(const std::vector<MetricReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(26) << "metric";
    for (const auto& rep : reports) os << std::setw(22) << rep.name;
    os << "\n" << std::string(26 + 22 * reports.size(), '-') << "\n";
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& rep : reports)
        for (const auto& r : rep.rows) {
            const auto key = std::make_pair(r.metric, r.modality);
            bool seen = false;
            for (const auto& k : keys) seen = seen || k == key;
            if (!seen) keys.push_back(key);
        }
    for (const auto& [metric, modality] : keys) {
        std::string label = metric + (modality.empty() ? "" : "(" + modality + ")");
        os << std::setw(26) << label;
        for (const auto& rep : reports) {
            const MetricRow* r = rep.find(metric, modality);
            if (!r) {
                os << std::setw(22) << "-";
            } else {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(4) << r->score.mean << " +- "
                     << r->score.std;
                os << std::setw(22) << cell.str();
            }
        }
        os << "\n";
    }
    return os.str();
}

// Bar chart comparing one metric across reports; one PNG per metric.
inline void plot_metric_bars(const std::vector<MetricReport>& reports, const std::string& metric,
                             const std::string& modality, const std::string& png_path) {
    std::vector<std::pair<std::string, GroupedScore>> bars;
    for (const auto& rep : reports) {
        const MetricRow* r = rep.find(metric, modality);
        if (r) bars.push_back({rep.name, r->score});
    }
    if (bars.empty()) return;

    const int W = 720, H = 480, m_left = 70, m_bottom = 70, m_top = 50, m_right = 20;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double vmax = 0.0;
    for (const auto& [name, s] : bars) vmax = std::max(vmax, s.mean + s.std);
    if (vmax <= 0.0) vmax = 1.0;
    vmax *= 1.1;

    const int plot_w = W - m_left - m_right, plot_h = H - m_top - m_bottom;
    auto ypix = [&](double v) { return H - m_bottom - static_cast<int>(v / vmax * plot_h); };

    cv::line(img, {m_left, m_top}, {m_left, H - m_bottom}, {0, 0, 0}, 1);
    cv::line(img, {m_left, H - m_bottom}, {W - m_right, H - m_bottom}, {0, 0, 0}, 1);
    for (int tick = 0; tick <= 5; ++tick) {
        const double v = vmax * tick / 5.0;
        std::ostringstream lab;
        lab << std::setprecision(3) << v;
        cv::line(img, {m_left - 4, ypix(v)}, {m_left, ypix(v)}, {0, 0, 0}, 1);
        cv::putText(img, lab.str(), {6, ypix(v) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1);
    }

    const int n = static_cast<int>(bars.size());
    const int slot = plot_w / n;
    const int bw = std::max(20, slot * 6 / 10);
    const cv::Scalar palette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}};
    for (int i = 0; i < n; ++i) {
        const auto& [name, s] = bars[i];
        const int cx = m_left + slot * i + slot / 2;
        cv::rectangle(img, {cx - bw / 2, ypix(s.mean)}, {cx + bw / 2, H - m_bottom},
                      palette[i % 4], cv::FILLED);
        cv::line(img, {cx, ypix(s.mean - s.std)}, {cx, ypix(s.mean + s.std)}, {0, 0, 0}, 1);
        cv::line(img, {cx - 6, ypix(s.mean + s.std)}, {cx + 6, ypix(s.mean + s.std)}, {0, 0, 0}, 1);
        cv::line(img, {cx - 6, ypix(s.mean - s.std)}, {cx + 6, ypix(s.mean - s.std)}, {0, 0, 0}, 1);
        cv::putText(img, name, {cx - bw / 2, H - m_bottom + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                    {0, 0, 0}, 1);
    }
    const std::string title = metric + (modality.empty() ? "" : " (" + modality + ")");
    cv::putText(img, title, {m_left, 30}, cv::FONT_HERSHEY_SIMPLEX, 0.7, {0, 0, 0}, 2);
    std::filesystem::create_directories(std::filesystem::path(png_path).parent_path());
    if (!cv::imwrite(png_path, img)) throw InputError("cannot write plot: " + png_path);
}

} // namespace bimodal
