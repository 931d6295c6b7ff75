#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace racelmpc {

/// One polyline of an x-y chart.
struct PlotSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> x;
  std::vector<double> y;
};

/// Renders a fixed-size SVG line chart with axes, ticks and a legend.
std::string render_svg_chart(const std::string& title,
                             const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series);

void write_svg_chart(const std::filesystem::path& file,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label,
                     const std::vector<PlotSeries>& series);

/// Reads a finished run directory and writes summary plots next to it:
/// lap_times.svg, velocity_profile.svg, trajectory_xy.svg and
/// prediction_errors.svg.
void write_run_plots(const std::filesystem::path& run_dir);

}  // namespace racelmpc
