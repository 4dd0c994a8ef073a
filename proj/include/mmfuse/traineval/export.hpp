#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/io.hpp"
#include "mmfuse/traineval/metrics.hpp"
#include "mmfuse/traineval/train.hpp"

namespace mmfuse {

// Minimal deterministic SVG line plot: fixed canvas, one polyline per series,
// no timestamps or generator metadata.
inline std::string render_svg_lines(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                                    const std::vector<double>& x,
                                    const std::string& title) {
    const double width = 640, height = 400, margin = 50;
    double ymin = 0.0, ymax = 1e-12, xmin = x.empty() ? 0.0 : x.front(),
           xmax = x.empty() ? 1.0 : x.back();
    for (const auto& [_, ys] : series)
        for (double v : ys) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double v) { return margin + (v - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto py = [&](double v) { return height - margin - (v - ymin) / (ymax - ymin) * (height - 2 * margin); };

    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" + title + "</text>\n";
    svg += "<line x1=\"" + format_double(margin) + "\" y1=\"" + format_double(height - margin) +
           "\" x2=\"" + format_double(width - margin) + "\" y2=\"" + format_double(height - margin) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + format_double(margin) + "\" y1=\"" + format_double(margin) + "\" x2=\"" +
           format_double(margin) + "\" y2=\"" + format_double(height - margin) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + format_double(margin) + "\" y=\"" + format_double(height - margin + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + format_double(xmin) + "</text>\n";
    svg += "<text x=\"" + format_double(width - margin) + "\" y=\"" +
           format_double(height - margin + 16) + "\" text-anchor=\"end\" "
           "font-family=\"sans-serif\" font-size=\"10\">" + format_double(xmax) + "</text>\n";
    svg += "<text x=\"" + format_double(margin - 4) + "\" y=\"" + format_double(height - margin) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           format_double(ymin) + "</text>\n";
    svg += "<text x=\"" + format_double(margin - 4) + "\" y=\"" + format_double(margin) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           format_double(ymax) + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ys = series[s].second;
        std::string pts;
        for (std::size_t i = 0; i < ys.size() && i < x.size(); ++i) {
            if (i) pts += " ";
            pts += format_double(px(x[i])) + "," + format_double(py(ys[i]));
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(colors[s % 8]) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        svg += "<text x=\"" + format_double(width - margin) + "\" y=\"" +
               format_double(margin + 16 * static_cast<double>(s)) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" +
               colors[s % 8] + "\">" + series[s].first + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

inline void export_history(const TrainHistory& history, const EvalReport& report,
                           const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory: " + out_dir);

    {
        std::ofstream out(out_dir + "/history.csv");
        if (!out) throw std::runtime_error("cannot write history.csv in " + out_dir);
        out << "epoch,train_loss,train_acc,val_loss,val_acc,lr,seconds\n";
        for (const auto& r : history.records)
            out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_acc)
                << ',' << format_double(r.val_loss) << ',' << format_double(r.val_acc) << ','
                << format_double(r.lr) << ',' << format_double(r.seconds) << '\n';
    }
    {
        std::ofstream out(out_dir + "/confusion.csv");
        const std::size_t K = report.confusion.size();
        out << "true_class";
        for (std::size_t j = 0; j < K; ++j) out << ",pred_" << j;
        out << '\n';
        for (std::size_t i = 0; i < K; ++i) {
            out << i;
            for (std::size_t j = 0; j < K; ++j) out << ',' << report.confusion[i][j];
            out << '\n';
        }
    }
    for (std::size_t c = 0; c < report.roc.size(); ++c) {
        if (!report.auc_defined[c]) continue;
        std::ofstream out(out_dir + "/roc_" + std::to_string(c) + ".csv");
        out << "fpr,tpr,threshold\n";
        for (std::size_t i = 0; i < report.roc[c].fpr.size(); ++i)
            out << format_double(report.roc[c].fpr[i]) << ',' << format_double(report.roc[c].tpr[i])
                << ',' << format_double(report.roc[c].thresholds[i]) << '\n';
    }
    for (std::size_t c = 0; c < report.pr.size(); ++c) {
        if (!report.pr_defined[c]) continue;
        std::ofstream out(out_dir + "/pr_" + std::to_string(c) + ".csv");
        out << "recall,precision,threshold\n";
        for (std::size_t i = 0; i < report.pr[c].recall.size(); ++i)
            out << format_double(report.pr[c].recall[i]) << ',' << format_double(report.pr[c].precision[i])
                << ',' << format_double(report.pr[c].thresholds[i]) << '\n';
    }

    // SVG curves
    std::vector<double> epochs;
    std::vector<double> tl, vl, ta, va;
    for (const auto& r : history.records) {
        epochs.push_back(static_cast<double>(r.epoch));
        tl.push_back(r.train_loss);
        vl.push_back(r.val_loss);
        ta.push_back(r.train_acc);
        va.push_back(r.val_acc);
    }
    if (!epochs.empty()) {
        write_text_file(out_dir + "/loss_curve.svg",
                        render_svg_lines({{"train_loss", tl}, {"val_loss", vl}}, epochs, "Loss"));
        write_text_file(out_dir + "/accuracy_curve.svg",
                        render_svg_lines({{"train_acc", ta}, {"val_acc", va}}, epochs, "Accuracy"));
    }
    for (std::size_t c = 0; c < report.roc.size(); ++c) {
        if (!report.auc_defined[c]) continue;
        write_text_file(out_dir + "/roc_" + std::to_string(c) + ".svg",
                        render_svg_lines({{"tpr", report.roc[c].tpr}}, report.roc[c].fpr,
                                         "ROC class " + std::to_string(c)));
    }
    for (std::size_t c = 0; c < report.pr.size(); ++c) {
        if (!report.pr_defined[c]) continue;
        write_text_file(out_dir + "/pr_" + std::to_string(c) + ".svg",
                        render_svg_lines({{"precision", report.pr[c].precision}},
                                         report.pr[c].recall, "PR class " + std::to_string(c)));
    }
}

}  // namespace mmfuse
