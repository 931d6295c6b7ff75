#include "racelmpc/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "racelmpc/config.hpp"
#include "racelmpc/harness.hpp"
#include "racelmpc/track.hpp"

namespace racelmpc {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      const double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::string trim_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string render_svg_chart(const std::string& title,
                             const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<PlotSeries>& series) {
  Range xr;
  Range yr;
  for (const PlotSeries& s : series) {
    for (double v : s.x) xr.expand(v);
    for (double v : s.y) yr.expand(v);
  }
  if (!std::isfinite(xr.lo) || !std::isfinite(yr.lo)) {
    xr = {0.0, 1.0};
    yr = {0.0, 1.0};
  }
  xr.pad();
  yr.pad();

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) {
    return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w;
  };
  auto py = [&](double y) {
    return kMarginTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";

  // Frame and ticks.
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop
      << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  constexpr int kTicks = 6;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    svg << "<line x1=\"" << px(fx) << "\" y1=\"" << kMarginTop + plot_h
        << "\" x2=\"" << px(fx) << "\" y2=\"" << kMarginTop + plot_h + 5
        << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kMarginTop + plot_h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << trim_number(fx) << "</text>\n";
    svg << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << py(fy)
        << "\" x2=\"" << kMarginLeft << "\" y2=\"" << py(fy)
        << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << kMarginLeft - 9 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << trim_number(fy) << "</text>\n";
  }
  svg << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\""
      << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";

  double legend_y = kMarginTop + 14.0;
  for (const PlotSeries& s : series) {
    if (s.x.empty()) {
      continue;
    }
    svg << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      svg << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    svg << "\"/>\n";
    if (!s.label.empty()) {
      const double lx = kMarginLeft + plot_w - 150.0;
      svg << "<line x1=\"" << lx << "\" y1=\"" << legend_y << "\" x2=\""
          << lx + 24 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
          << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << lx + 30 << "\" y=\"" << legend_y + 4
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
          << "</text>\n";
      legend_y += 18.0;
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg_chart(const std::filesystem::path& file,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  std::ofstream out(file);
  if (!out) {
    throw std::runtime_error("cannot write " + file.string());
  }
  out << render_svg_chart(title, x_label, y_label, series);
}

namespace {

int count_iterations(const std::filesystem::path& run_dir) {
  int count = 0;
  while (std::filesystem::exists(run_dir / ("iter_" + std::to_string(count)) /
                                 "trajectory.csv")) {
    ++count;
  }
  return count;
}

}  // namespace

void write_run_plots(const std::filesystem::path& run_dir) {
  const int iterations = count_iterations(run_dir);
  if (iterations == 0) {
    throw std::runtime_error("no iterations found under " +
                             run_dir.string());
  }
  const FullConfig config = [&] {
    const auto snapshot = run_dir / "config.snapshot";
    return std::filesystem::exists(snapshot) ? load_config(snapshot)
                                             : default_config();
  }();
  const Track track = config.make_track();

  // Lap time per iteration.
  {
    PlotSeries laps;
    laps.label = "lap time";
    for (int j = 0; j < iterations; ++j) {
      auto [states, inputs] = read_trajectory_csv(
          run_dir / ("iter_" + std::to_string(j)) / "trajectory.csv");
      std::size_t crossing = states.size();
      for (std::size_t t = 0; t < states.size(); ++t) {
        if (states[t].s > track.s_target()) {
          crossing = t;
          break;
        }
      }
      laps.x.push_back(j);
      laps.y.push_back(static_cast<double>(crossing) * config.lmpc.dt);
    }
    write_svg_chart(run_dir / "lap_times.svg", "Lap time per iteration",
                    "iteration", "lap time [s]", {laps});
  }

  auto lap_series = [&](int j, auto pick, const std::string& label,
                        const std::string& color) {
    PlotSeries s;
    s.label = label;
    s.color = color;
    auto [states, inputs] = read_trajectory_csv(
        run_dir / ("iter_" + std::to_string(j)) / "trajectory.csv");
    for (const VehicleState& x : states) {
      s.x.push_back(x.s);
      s.y.push_back(pick(x));
    }
    return s;
  };

  const int last = iterations - 1;
  write_svg_chart(
      run_dir / "velocity_profile.svg", "Velocity profile", "s [m]",
      "v_x [m/s]",
      {lap_series(
           0, [](const VehicleState& x) { return x.v_x; }, "first lap",
           "#888888"),
       lap_series(
           last, [](const VehicleState& x) { return x.v_x; }, "final lap",
           "#d62728")});

  // X-Y view: centerline, borders and the final lap.
  {
    PlotSeries center{"centerline", "#888888", {}, {}};
    PlotSeries left{"", "#cccccc", {}, {}};
    PlotSeries right{"", "#cccccc", {}, {}};
    for (double s = 0.0; s <= track.total_length(); s += 0.5) {
      const TrackPose c = track.centerline(s);
      center.x.push_back(c.x);
      center.y.push_back(c.y);
      const TrackPose l = track.frenet_to_cartesian(s, track.half_width(), 0);
      left.x.push_back(l.x);
      left.y.push_back(l.y);
      const TrackPose r =
          track.frenet_to_cartesian(s, -track.half_width(), 0);
      right.x.push_back(r.x);
      right.y.push_back(r.y);
    }
    PlotSeries path{"final lap", "#d62728", {}, {}};
    auto [states, inputs] = read_trajectory_csv(
        run_dir / ("iter_" + std::to_string(last)) / "trajectory.csv");
    for (const VehicleState& x : states) {
      const TrackPose p = track.frenet_to_cartesian(x.s, x.e_y, x.e_psi);
      path.x.push_back(p.x);
      path.y.push_back(p.y);
    }
    write_svg_chart(run_dir / "trajectory_xy.svg", "Trajectory", "X [m]",
                    "Y [m]", {left, right, center, path});
  }

  // One-step prediction errors of the final lap, when available.
  {
    const auto report_file =
        run_dir / ("iter_" + std::to_string(last)) / "report.json";
    if (std::filesystem::exists(report_file)) {
      std::ifstream in(report_file);
      const nlohmann::json j = nlohmann::json::parse(in);
      auto series_of = [&](const char* key, const std::string& label,
                           const std::string& color) {
        PlotSeries s;
        s.label = label;
        s.color = color;
        if (j.contains(key)) {
          const auto values = j.at(key).get<std::vector<double>>();
          for (std::size_t i = 0; i < values.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
            s.y.push_back(values[i]);
          }
        }
        return s;
      };
      write_svg_chart(run_dir / "prediction_errors.svg",
                      "One-step prediction errors (final lap)", "step",
                      "error",
                      {series_of("nabla_v_x", "v_x [m/s]", "#1f77b4"),
                       series_of("nabla_v_y", "v_y [m/s]", "#2ca02c"),
                       series_of("nabla_yaw_rate", "yaw rate [rad/s]",
                                 "#d62728")});
    }
  }
}

}  // namespace racelmpc
