#include "svgplot.hpp"

#include "motion6d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace motion6d::plot {

namespace {

constexpr int kWidth = 640, kHeight = 400;
constexpr int kLeft = 60, kRight = 170, kTop = 30, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

// Round the axis maximum up to 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (v <= m * p) return m * p;
  }
  return 10.0 * p;
}

struct Frame {
  double x_max, y_max;
  double px(double x) const { return kLeft + x / x_max * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - y / y_max * (kHeight - kTop - kBottom); }
};

void axes(std::ostream& os, const Frame& f, const std::string& title, const std::string& xlabel,
          const std::string& ylabel, bool x_ticks) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(0) << "\" x2=\"" << f.px(f.x_max) << "\" y2=\"" << f.py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(0) << "\" x2=\"" << kLeft << "\" y2=\"" << f.py(f.y_max)
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = f.y_max * i / 5;
    os << "<text x=\"" << kLeft - 5 << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">" << num(y)
       << "</text>\n";
    if (x_ticks) {
      const double x = f.x_max * i / 5;
      os << "<text x=\"" << num(f.px(x)) << "\" y=\"" << kHeight - kBottom + 15 << "\" text-anchor=\"middle\">"
         << static_cast<int>(std::lround(x)) << "</text>\n";
    }
  }
  os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n";
  os << "<text transform=\"translate(15," << kHeight / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
     << "</text>\n";
}

void legend(std::ostream& os, int i, const std::string& label) {
  const int y = kTop + 10 + 18 * i;
  const int x = kWidth - kRight + 15;
  os << "<rect x=\"" << x << "\" y=\"" << y - 8 << "\" width=\"12\" height=\"10\" fill=\"" << kPalette[i % 8]
     << "\"/>\n";
  os << "<text x=\"" << x + 18 << "\" y=\"" << y + 1 << "\">" << label << "</text>\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("short write on " + path);
}

}  // namespace

std::vector<std::string> error_curves(const std::vector<track::CurveRow>& rows, const std::string& out_dir) {
  // metric -> config -> rows sorted by frame
  std::map<std::string, std::map<std::string, std::vector<const track::CurveRow*>>> by_metric;
  for (const auto& r : rows) by_metric[r.metric][r.config].push_back(&r);
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (auto& [metric, configs] : by_metric) {
    if (metric == "low_confidence") continue;
    double x_max = 1.0, y_max = 0.0;
    for (auto& [config, series] : configs) {
      std::sort(series.begin(), series.end(), [](auto* a, auto* b) { return a->frame < b->frame; });
      for (const auto* r : series) {
        x_max = std::max(x_max, static_cast<double>(r->frame));
        y_max = std::max(y_max, r->mean + r->stderr_);
      }
    }
    const Frame f{x_max, nice_ceiling(y_max)};
    std::ostringstream os;
    axes(os, f, metric, "frame", metric, true);
    int i = 0;
    for (const auto& [config, series] : configs) {
      const char* color = kPalette[i % 8];
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (const auto* r : series) os << num(f.px(r->frame)) << ',' << num(f.py(r->mean + r->stderr_)) << ' ';
      for (auto it = series.rbegin(); it != series.rend(); ++it) {
        os << num(f.px((*it)->frame)) << ',' << num(f.py(std::max(0.0, (*it)->mean - (*it)->stderr_))) << ' ';
      }
      os << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto* r : series) os << num(f.px(r->frame)) << ',' << num(f.py(r->mean)) << ' ';
      os << "\"/>\n";
      legend(os, i++, config);
    }
    os << "</svg>\n";
    const std::string path = (fs::path(out_dir) / (metric + ".svg")).string();
    write_file(path, os.str());
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> convergence_bars(const std::vector<ctrl::ConvergenceRow>& rows, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Frame f{static_cast<double>(std::max<std::size_t>(rows.size(), 1)), 1.0};
  std::ostringstream os;
  axes(os, f, "success rate", "setting, perturbation steps", "fraction of trials", false);
  const double slot = f.px(1) - f.px(0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const double x0 = f.px(static_cast<double>(k)) + 0.15 * slot;
    const double w = 0.35 * slot;
    const double rates[2] = {r.open_loop_rate, r.corrected_rate};
    for (int j = 0; j < 2; ++j) {
      os << "<rect x=\"" << num(x0 + j * w) << "\" y=\"" << num(f.py(rates[j])) << "\" width=\"" << num(w)
         << "\" height=\"" << num(f.py(0) - f.py(rates[j])) << "\" fill=\"" << kPalette[j] << "\"/>\n";
    }
    os << "<text x=\"" << num(x0 + w) << "\" y=\"" << kHeight - kBottom + 15 << "\" text-anchor=\"middle\">"
       << r.setting << ' ' << r.perturb_steps << "</text>\n";
  }
  legend(os, 0, "open loop");
  legend(os, 1, "after corrections");
  os << "</svg>\n";
  const std::string path = (fs::path(out_dir) / "convergence.svg").string();
  write_file(path, os.str());
  return {path};
}

}  // namespace motion6d::plot
