#include "usps/report.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "usps/png_io.hpp"
#include "usps/util.hpp"

namespace usps {

namespace {

std::string fmt(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string svg_header(int w, int h) {
    std::ostringstream ss;
    ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return ss.str();
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

/// One line-chart panel: x = stage index, y = the chosen metric.
void append_panel(std::ostringstream& svg, const std::vector<CurveSeries>& curves,
                  double MetricsRow::*field, const std::string& title, int x0, int y0, int w, int h) {
    double lo = 1e30, hi = -1e30;
    size_t max_stages = 0;
    for (const auto& c : curves) {
        max_stages = std::max(max_stages, c.stages.size());
        for (const auto& r : c.stages) {
            lo = std::min(lo, r.*field);
            hi = std::max(hi, r.*field);
        }
    }
    if (max_stages == 0) return;
    if (hi <= lo) hi = lo + 1.0;
    const double pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;

    const int plot_x = x0 + 42, plot_y = y0 + 24;
    const int plot_w = w - 56, plot_h = h - 56;
    auto X = [&](double i) {
        return plot_x + (max_stages < 2 ? 0.0 : plot_w * i / static_cast<double>(max_stages - 1));
    };
    auto Y = [&](double v) { return plot_y + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    svg << "<text x=\"" << x0 + w / 2 << "\" y=\"" << y0 + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << title
        << "</text>\n";
    svg << "<rect x=\"" << plot_x << "\" y=\"" << plot_y << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int g = 0; g <= 4; ++g) {
        const double v = lo + (hi - lo) * g / 4.0;
        svg << "<text x=\"" << plot_x - 4 << "\" y=\"" << Y(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(v, 1)
            << "</text>\n";
    }
    for (size_t i = 0; i < max_stages; ++i)
        svg << "<text x=\"" << X(static_cast<double>(i)) << "\" y=\"" << plot_y + plot_h + 14
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << i
            << "</text>\n";

    for (size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = kSeriesColors[ci % 8];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (size_t i = 0; i < c.stages.size(); ++i)
            svg << X(static_cast<double>(i)) << "," << Y(c.stages[i].*field) << " ";
        svg << "\"/>\n";
        for (size_t i = 0; i < c.stages.size(); ++i)
            svg << "<circle cx=\"" << X(static_cast<double>(i)) << "\" cy=\""
                << Y(c.stages[i].*field) << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << x0 + w - 8 << "\" y=\"" << y0 + 26 + 13 * static_cast<int>(ci)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << color
            << "\">" << c.method << "</text>\n";
    }
}

void write_curves_svg(const std::vector<CurveSeries>& curves, const std::filesystem::path& path) {
    const int W = 560, H = 480;
    std::ostringstream svg;
    svg << svg_header(W, H);
    append_panel(svg, curves, &MetricsRow::f_score, "F-score (%) by pipeline stage", 0, 0, W, H / 2);
    append_panel(svg, curves, &MetricsRow::mae, "MAE (%) by pipeline stage", 0, H / 2, W, H / 2);
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

void write_scatter_svg(const ScatterData& scatter, const std::filesystem::path& path) {
    const int W = 460, H = 460;
    double hi = 1e-9;
    for (const auto& [id, x, y] : scatter.points) hi = std::max({hi, x, y});
    hi *= 1.1;
    const int plot_x = 52, plot_y = 30, plot_w = W - 72, plot_h = H - 80;
    auto X = [&](double v) { return plot_x + plot_w * v / hi; };
    auto Y = [&](double v) { return plot_y + plot_h * (1.0 - v / hi); };

    std::vector<double> xs, ys;
    for (const auto& [id, x, y] : scatter.points) {
        xs.push_back(x);
        ys.push_back(y);
    }
    const double rho = rank_correlation(xs, ys);

    std::ostringstream svg;
    svg << svg_header(W, H);
    svg << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">Per-image MAE: "
        << scatter.x_name << " vs " << scatter.y_name << " (rank corr " << fmt(rho, 3)
        << ")</text>\n";
    svg << "<rect x=\"" << plot_x << "\" y=\"" << plot_y << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(hi) << "\" y2=\"" << Y(hi)
        << "\" stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& [id, x, y] : scatter.points)
        svg << "<circle cx=\"" << X(x) << "\" cy=\"" << Y(y)
            << "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << scatter.x_name
        << " MAE</text>\n";
    svg << "<text x=\"14\" y=\"" << H / 2
        << "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 " << H / 2
        << ")\" text-anchor=\"middle\">" << scatter.y_name << " MAE</text>\n";
    svg << "</svg>\n";
    write_text_file(path, svg.str());
}

Image compose_failure(const FailureCase& f) {
    const int w = f.image.width, h = f.image.height, gap = 2;
    Image out(w * 3 + gap * 2, h);
    for (auto& v : out.data) v = 1.f;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out.at(c, y, x) = f.image.at(c, y, x);
                out.at(c, y, x + w + gap) = f.gt.at(y, x) ? 1.f : 0.f;
                out.at(c, y, x + 2 * (w + gap)) = f.pred.at(y, x);
            }
        }
    }
    return out;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report, const std::vector<CurveSeries>& curves,
                            const std::optional<ScatterData>& scatter) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row = {{"name", r.name},     {"dataset", r.dataset},
                              {"f_score", r.f_score}, {"mae", r.mae},
                              {"precision", r.precision}, {"recall", r.recall},
                              {"n_runs", r.n_runs}};
        if (r.f_std) row["f_std"] = *r.f_std;
        if (r.mae_std) row["mae_std"] = *r.mae_std;
        j["rows"].push_back(row);
    }
    j["curves"] = nlohmann::json::array();
    for (const auto& c : curves) {
        nlohmann::json jc;
        jc["method"] = c.method;
        jc["stages"] = nlohmann::json::array();
        for (const auto& r : c.stages)
            jc["stages"].push_back({{"name", r.name},
                                    {"f_score", r.f_score},
                                    {"mae", r.mae},
                                    {"precision", r.precision},
                                    {"recall", r.recall}});
        j["curves"].push_back(jc);
    }
    if (scatter) {
        nlohmann::json js;
        js["x_name"] = scatter->x_name;
        js["y_name"] = scatter->y_name;
        js["points"] = nlohmann::json::array();
        std::vector<double> xs, ys;
        for (const auto& [id, x, y] : scatter->points) {
            js["points"].push_back({{"id", id}, {"x", x}, {"y", y}});
            xs.push_back(x);
            ys.push_back(y);
        }
        js["rank_correlation"] = rank_correlation(xs, ys);
        j["scatter"] = js;
    }
    for (const auto& note : report.footnotes) j["footnotes"].push_back(note);
    return j.dump(2) + "\n";
}

ReportFiles emit_report(const MetricsReport& report, const std::vector<CurveSeries>& curves,
                        const std::optional<ScatterData>& scatter, std::vector<FailureCase> failures,
                        const std::filesystem::path& out_dir, int worst_k) {
    if (report.rows.empty() && curves.empty())
        throw InvalidArgumentError("emit_report: nothing to report");
    std::filesystem::create_directories(out_dir);
    ReportFiles files;

    std::ostringstream md;
    md << "# Saliency pipeline report\n\n";
    md << "## Model scores\n\n";
    md << "| Model | Dataset | F-score (%) | MAE (%) | Precision (%) | Recall (%) | Runs |\n";
    md << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : report.rows) {
        md << "| " << r.name << " | " << r.dataset << " | " << fmt(r.f_score);
        if (r.f_std) md << " ± " << fmt(*r.f_std);
        md << " | " << fmt(r.mae);
        if (r.mae_std) md << " ± " << fmt(*r.mae_std);
        md << " | " << fmt(r.precision) << " | " << fmt(r.recall) << " | " << r.n_runs << " |\n";
    }
    md << "\n";

    if (curves.empty()) {
        md << "_No label-quality curves available; curve plot skipped._\n\n";
    } else {
        md << "## Label quality by pipeline stage\n\n";
        md << "Stages: 0 = handcrafted pseudo-labels, 1 = inter-image-consistency (stage A MVA), "
              "then one column per self-supervision iteration.\n\n";
        md << "| Method | Stage | F-score (%) | MAE (%) | Precision (%) | Recall (%) |\n";
        md << "|---|---|---|---|---|---|\n";
        for (const auto& c : curves)
            for (size_t i = 0; i < c.stages.size(); ++i)
                md << "| " << c.method << " | " << i << " | " << fmt(c.stages[i].f_score) << " | "
                   << fmt(c.stages[i].mae) << " | " << fmt(c.stages[i].precision) << " | "
                   << fmt(c.stages[i].recall) << " |\n";
        md << "\n![label quality curves](curves.svg)\n\n";
        write_curves_svg(curves, out_dir / "curves.svg");
        files.written.push_back(out_dir / "curves.svg");
    }

    if (scatter && !scatter->points.empty()) {
        md << "## Per-image difficulty correlation\n\n";
        md << "![per-image MAE scatter](scatter.svg)\n\n";
        write_scatter_svg(*scatter, out_dir / "scatter.svg");
        files.written.push_back(out_dir / "scatter.svg");
    }

    if (!failures.empty() && worst_k > 0) {
        std::stable_sort(failures.begin(), failures.end(),
                         [](const FailureCase& a, const FailureCase& b) { return a.mae > b.mae; });
        const int k = std::min<int>(worst_k, static_cast<int>(failures.size()));
        md << "## Hardest test images (worst " << k << " by MAE)\n\n";
        md << "Each panel: input | ground truth | prediction.\n\n";
        for (int i = 0; i < k; ++i) {
            char name[128];
            std::snprintf(name, sizeof(name), "failures/%02d_%s.png", i + 1, failures[i].id.c_str());
            write_image_png(compose_failure(failures[i]), out_dir / name);
            files.written.push_back(out_dir / name);
            md << "- `" << failures[i].id << "` MAE " << fmt(100.0 * failures[i].mae) << "%: ![](" << name
               << ")\n";
        }
        md << "\n";
    }

    for (const auto& note : report.footnotes) md << "> " << note << "\n";

    write_text_file(out_dir / "report.md", md.str());
    files.written.push_back(out_dir / "report.md");
    write_text_file(out_dir / "metrics.json", metrics_to_json(report, curves, scatter));
    files.written.push_back(out_dir / "metrics.json");
    return files;
}

}  // namespace usps
