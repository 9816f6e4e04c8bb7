#include "vsnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vsnn/errors.hpp"

namespace vsnn {

namespace {

constexpr const char* kClassColors[3] = {"#4477aa", "#ee6677", "#228833"};
constexpr const char* kSpikeColor = "#1a9641";

std::string num(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

void write_svg(const std::string& path, const std::string& body, double width, double height) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
        << body << "</svg>\n";
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

void write_raster_svg(const std::string& path, const SpikeRaster& raster,
                      const std::vector<int>& labels) {
    if (!labels.empty() && static_cast<int>(labels.size()) != raster.n_points)
        throw DimensionMismatch("raster plot: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(raster.n_points) + " rows");

    const double margin_left = 70.0, margin_top = 40.0, margin_right = 20.0,
                 margin_bottom = 50.0;
    const double plot_w = 860.0, plot_h = std::max(220.0, 3.0 * raster.n_points);
    const double width = margin_left + plot_w + margin_right;
    const double height = margin_top + plot_h + margin_bottom;
    const double cell_w = plot_w / std::max(1, raster.n_nodes);
    const double cell_h = plot_h / std::max(1, raster.n_points);

    std::ostringstream body;
    body << "<text x=\"" << num(margin_left) << "\" y=\"24\" font-family=\"sans-serif\" "
            "font-size=\"16\">spike raster (" << raster.n_points << " points x "
         << raster.n_nodes << " nodes)</text>\n";
    body << "<rect x=\"" << num(margin_left) << "\" y=\"" << num(margin_top) << "\" width=\""
         << num(plot_w) << "\" height=\"" << num(plot_h)
         << "\" fill=\"#f4f4f4\" stroke=\"#444444\"/>\n";

    // Class sidebar: one colored band per contiguous label run.
    if (!labels.empty()) {
        int run_start = 0;
        for (int row = 1; row <= raster.n_points; ++row) {
            if (row == raster.n_points ||
                labels[static_cast<std::size_t>(row)] !=
                    labels[static_cast<std::size_t>(run_start)]) {
                const int cls = labels[static_cast<std::size_t>(run_start)];
                body << "<rect x=\"" << num(margin_left - 14.0) << "\" y=\""
                     << num(margin_top + run_start * cell_h) << "\" width=\"10\" height=\""
                     << num((row - run_start) * cell_h) << "\" fill=\""
                     << kClassColors[(cls - 1) % 3] << "\"/>\n";
                run_start = row;
            }
        }
        for (int cls = 0; cls < 3; ++cls) {
            const double x = margin_left + plot_w - 250.0 + 90.0 * cls;
            body << "<rect x=\"" << num(x) << "\" y=\"" << num(height - 22.0)
                 << "\" width=\"10\" height=\"10\" fill=\"" << kClassColors[cls] << "\"/>\n"
                 << "<text x=\"" << num(x + 14.0) << "\" y=\"" << num(height - 12.0)
                 << "\" font-family=\"sans-serif\" font-size=\"12\">"
                 << kSpeciesNames[static_cast<std::size_t>(cls)] << "</text>\n";
        }
    }

    // Spike cells, merging consecutive spiking nodes in a row into one rect.
    for (int row = 0; row < raster.n_points; ++row) {
        int node = 0;
        while (node < raster.n_nodes) {
            if (!raster.at(row, node)) {
                ++node;
                continue;
            }
            int end = node;
            while (end < raster.n_nodes && raster.at(row, end)) ++end;
            body << "<rect x=\"" << num(margin_left + node * cell_w) << "\" y=\""
                 << num(margin_top + row * cell_h) << "\" width=\"" << num((end - node) * cell_w)
                 << "\" height=\"" << num(cell_h) << "\" fill=\"" << kSpikeColor << "\"/>\n";
            node = end;
        }
    }

    body << "<text x=\"" << num(margin_left + plot_w / 2.0) << "\" y=\"" << num(height - 32.0)
         << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">virtual "
            "node</text>\n";
    body << "<text x=\"18\" y=\"" << num(margin_top + plot_h / 2.0)
         << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
            "transform=\"rotate(-90 18 "
         << num(margin_top + plot_h / 2.0) << ")\">data point</text>\n";

    write_svg(path, body.str(), width, height);
}

void write_error_curve_svg(const std::string& path, const ErrorCurve& curve) {
    if (curve.training_sizes.empty() || curve.mean_error.empty())
        throw EmptyInput("error curve plot: no data");

    const double margin_left = 60.0, margin_top = 30.0, margin_right = 20.0,
                 margin_bottom = 50.0;
    const double plot_w = 640.0, plot_h = 360.0;
    const double width = margin_left + plot_w + margin_right;
    const double height = margin_top + plot_h + margin_bottom;

    const double x_min = curve.training_sizes.front();
    const double x_max = std::max<double>(curve.training_sizes.back(), x_min + 1.0);
    double y_max = 0.0;
    for (const auto& run : curve.per_run_errors)
        for (double e : run) y_max = std::max(y_max, e);
    for (double e : curve.mean_error) y_max = std::max(y_max, e);
    y_max = std::max(0.1, std::ceil(y_max * 10.0) / 10.0);

    const auto to_x = [&](double size) {
        return margin_left + (size - x_min) / (x_max - x_min) * plot_w;
    };
    const auto to_y = [&](double error) { return margin_top + (1.0 - error / y_max) * plot_h; };

    std::ostringstream body;
    body << "<rect x=\"" << num(margin_left) << "\" y=\"" << num(margin_top) << "\" width=\""
         << num(plot_w) << "\" height=\"" << num(plot_h)
         << "\" fill=\"#fbfbfb\" stroke=\"#444444\"/>\n";

    // Horizontal grid and y tick labels every y_max/5.
    for (int tick = 0; tick <= 5; ++tick) {
        const double error = y_max * tick / 5.0;
        const double y = to_y(error);
        body << "<line x1=\"" << num(margin_left) << "\" y1=\"" << num(y) << "\" x2=\""
             << num(margin_left + plot_w) << "\" y2=\"" << num(y)
             << "\" stroke=\"#dddddd\"/>\n";
        body << "<text x=\"" << num(margin_left - 8.0) << "\" y=\"" << num(y + 4.0)
             << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
             << num(error) << "</text>\n";
    }
    for (int size : curve.training_sizes) {
        const double x = to_x(size);
        body << "<line x1=\"" << num(x) << "\" y1=\"" << num(margin_top + plot_h) << "\" x2=\""
             << num(x) << "\" y2=\"" << num(margin_top + plot_h + 5.0)
             << "\" stroke=\"#444444\"/>\n";
        body << "<text x=\"" << num(x) << "\" y=\"" << num(margin_top + plot_h + 18.0)
             << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << size
             << "</text>\n";
    }

    const auto polyline = [&](const std::vector<double>& errors, const char* style) {
        std::ostringstream points;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            if (i) points << ' ';
            points << num(to_x(curve.training_sizes[i])) << ',' << num(to_y(errors[i]));
        }
        return "<polyline fill=\"none\" points=\"" + points.str() + "\" " + style + "/>\n";
    };
    for (const auto& run : curve.per_run_errors)
        body << polyline(run, "stroke=\"#9db8d9\" stroke-width=\"1\" opacity=\"0.6\"");
    body << polyline(curve.mean_error, "stroke=\"#1f4e9c\" stroke-width=\"2.5\"");

    body << "<text x=\"" << num(margin_left + plot_w / 2.0) << "\" y=\"" << num(height - 14.0)
         << "\" font-family=\"sans-serif\" font-size=\"13\" "
            "text-anchor=\"middle\">training points per class</text>\n";
    body << "<text x=\"16\" y=\"" << num(margin_top + plot_h / 2.0)
         << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
            "transform=\"rotate(-90 16 "
         << num(margin_top + plot_h / 2.0) << ")\">test error</text>\n";

    write_svg(path, body.str(), width, height);
}

}  // namespace vsnn
