#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensomap/consensus.hpp"
#include "sensomap/similarity.hpp"
#include "sensomap/stability.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

struct RenderSpec {
  int decile = 10;          // edge filter for consensus figures
  double threshold = 0.95;  // dashed reference level in stability figures
  int width = 800;
  int height = 600;
  double font_size = 13.0;
};

// Linear ramp from weak (red) to strong (green).
inline std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(220.0 + (30.0 - 220.0) * t));
  const int g = static_cast<int>(std::lround(30.0 + (160.0 - 30.0) * t));
  const int b = 30;
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

namespace detail {

// Fixed two-decimal output keeps figures byte-stable across runs.
inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline void svg_open(std::ostringstream& os, const RenderSpec& spec) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
     << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" fill=\"#ffffff\"/>\n";
}

inline void svg_text(std::ostringstream& os, double x, double y, const std::string& s,
                     double size, const std::string& anchor = "start",
                     const std::string& fill = "#000000") {
  os << "<text x=\"" << px(x) << "\" y=\"" << px(y) << "\" font-family=\"Helvetica,sans-serif\""
     << " font-size=\"" << px(size) << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill
     << "\">" << s << "</text>\n";
}

inline void svg_line(std::ostringstream& os, double x1, double y1, double x2, double y2,
                     const std::string& stroke, double width, const std::string& extra = "") {
  os << "<line x1=\"" << px(x1) << "\" y1=\"" << px(y1) << "\" x2=\"" << px(x2) << "\" y2=\""
     << px(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << px(width) << "\"" << extra
     << "/>\n";
}

struct PlaneMap {
  double scale;
  double ox, oy;
  double xmin, ymin;
  int height;

  double x(double v) const { return ox + (v - xmin) * scale; }
  double y(double v) const { return height - (oy + (v - ymin) * scale); }
};

inline PlaneMap fit_plane(const Eigen::MatrixXd& coords, const RenderSpec& spec, double margin) {
  PlaneMap map{};
  double xmin = coords.col(0).minCoeff();
  double xmax = coords.col(0).maxCoeff();
  double ymin = coords.col(1).minCoeff();
  double ymax = coords.col(1).maxCoeff();
  if (xmax - xmin <= 0.0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin <= 0.0) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double sw = (spec.width - 2.0 * margin) / (xmax - xmin);
  const double sh = (spec.height - 2.0 * margin) / (ymax - ymin);
  map.scale = std::min(sw, sh);
  map.ox = (spec.width - (xmax - xmin) * map.scale) / 2.0;
  map.oy = (spec.height - (ymax - ymin) * map.scale) / 2.0;
  map.xmin = xmin;
  map.ymin = ymin;
  map.height = spec.height;
  return map;
}

}  // namespace detail

// Consensus map: one node per sample; when a similarity matrix is given, the
// pairs that survive the decile filter are drawn as lines colored by
// normalized strength, weakest first. The data y-axis points up; the figure
// flips it for screen coordinates. Coincident node labels are shifted apart by
// a fixed step so both stay legible.
inline std::string render_consensus(const Configuration& config,
                                    const GlobalSimilarityMatrix* similarity,
                                    const RenderSpec& spec = {}) {
  if (config.dims() < 2) throw std::invalid_argument("need at least 2 dimensions");
  if (similarity && similarity->sample_count() != config.sample_count())
    throw std::invalid_argument("matrix size does not match configuration");

  std::ostringstream os;
  detail::svg_open(os, spec);
  const detail::PlaneMap map = detail::fit_plane(config.coords.leftCols(2), spec, 60.0);

  if (similarity) {
    EdgeSet edges = filter_deciles(*similarity, spec.decile);
    for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
      detail::svg_line(os, map.x(config.coords(it->i, 0)), map.y(config.coords(it->i, 1)),
                       map.x(config.coords(it->j, 0)), map.y(config.coords(it->j, 1)),
                       ramp_color(it->normalized), 2.5, " class=\"edge\"");
    }
  }

  std::map<std::pair<std::string, std::string>, int> seen;
  for (int i = 0; i < config.sample_count(); ++i) {
    const double cx = map.x(config.coords(i, 0));
    const double cy = map.y(config.coords(i, 1));
    os << "<circle cx=\"" << detail::px(cx) << "\" cy=\"" << detail::px(cy)
       << "\" r=\"5\" fill=\"#222222\"/>\n";
    const int bump = seen[{detail::px(cx), detail::px(cy)}]++;
    detail::svg_text(os, cx + 8.0, cy - 8.0 - 14.0 * bump, config.codes[i], spec.font_size + 2.0);
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string render_consensus(const Configuration& config, const RenderSpec& spec = {}) {
  return render_consensus(config, nullptr, spec);
}

// Strength heatmap in the given row/column order. `groups` (optional, one label
// per row, contiguous runs) adds a black frame around each diagonal block.
inline std::string render_heatmap(const GlobalSimilarityMatrix& g,
                                  const std::vector<std::string>& codes, const RenderSpec& spec = {},
                                  const std::vector<int>* groups = nullptr) {
  const int q = g.sample_count();
  if (static_cast<int>(codes.size()) != q)
    throw std::invalid_argument("code count does not match matrix size");
  if (groups && static_cast<int>(groups->size()) != q)
    throw std::invalid_argument("group count does not match matrix size");

  const Eigen::MatrixXd norm = normalize_strengths(g);

  std::ostringstream os;
  detail::svg_open(os, spec);
  const double left = 80.0, top = 70.0, pad = 30.0;
  const double cell =
      std::min((spec.width - left - pad) / q, (spec.height - top - pad - 20.0) / q);

  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      const std::string fill = i == j ? std::string("#f2f2f2") : ramp_color(norm(i, j));
      os << "<rect x=\"" << detail::px(left + j * cell) << "\" y=\"" << detail::px(top + i * cell)
         << "\" width=\"" << detail::px(cell) << "\" height=\"" << detail::px(cell) << "\" fill=\""
         << fill << "\"/>\n";
    }
  }
  for (int i = 0; i < q; ++i) {
    detail::svg_text(os, left + (i + 0.5) * cell, top - 10.0, codes[i], spec.font_size, "middle");
    detail::svg_text(os, left - 10.0, top + (i + 0.5) * cell + spec.font_size * 0.35, codes[i],
                     spec.font_size, "end");
  }

  if (groups) {
    int run_start = 0;
    for (int i = 1; i <= q; ++i) {
      if (i == q || (*groups)[i] != (*groups)[run_start]) {
        os << "<rect class=\"group-frame\" x=\"" << detail::px(left + run_start * cell)
           << "\" y=\"" << detail::px(top + run_start * cell) << "\" width=\""
           << detail::px((i - run_start) * cell) << "\" height=\""
           << detail::px((i - run_start) * cell)
           << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"3\"/>\n";
        run_start = i;
      }
    }
  }

  std::string provenance = std::string("variant=") + variant_name(g.variant) +
                           " n=" + std::to_string(g.n);
  if (g.p) provenance += " p=" + format_number(*g.p);
  detail::svg_text(os, left, top + q * cell + 24.0, provenance, spec.font_size, "start",
                   "#555555");
  os << "</svg>\n";
  return os.str();
}

// Rectangular dendrogram, leaves at the bottom in dendrogram order, merge
// height on the vertical axis.
inline std::string render_dendrogram(const Dendrogram& dend, const std::vector<std::string>& codes,
                                     const RenderSpec& spec = {}) {
  const int q = dend.leaf_count;
  if (static_cast<int>(codes.size()) != q)
    throw std::invalid_argument("code count does not match leaf count");

  std::ostringstream os;
  detail::svg_open(os, spec);
  const double left = 70.0, right = 30.0, top = 30.0, bottom = 60.0;
  const double baseline = spec.height - bottom;
  const double plot_h = baseline - top;
  const double dx = (spec.width - left - right) / q;

  double h_max = 0.0;
  for (const auto& m : dend.merges) h_max = std::max(h_max, m.height);
  const double h_scale = h_max > 0.0 ? plot_h / h_max : 0.0;

  std::vector<double> node_x(2 * q - 1, 0.0);
  std::vector<double> node_y(2 * q - 1, baseline);
  for (int i = 0; i < q; ++i) node_x[dend.leaf_order[i]] = left + (i + 0.5) * dx;

  for (int t = 0; t < static_cast<int>(dend.merges.size()); ++t) {
    const auto& m = dend.merges[t];
    const int node = q + t;
    node_y[node] = baseline - m.height * h_scale;
    node_x[node] = 0.5 * (node_x[m.left] + node_x[m.right]);
    detail::svg_line(os, node_x[m.left], node_y[m.left], node_x[m.left], node_y[node], "#333333",
                     1.5);
    detail::svg_line(os, node_x[m.right], node_y[m.right], node_x[m.right], node_y[node],
                     "#333333", 1.5);
    detail::svg_line(os, node_x[m.left], node_y[node], node_x[m.right], node_y[node], "#333333",
                     1.5);
  }

  for (int i = 0; i < q; ++i) {
    detail::svg_text(os, left + (i + 0.5) * dx, baseline + 20.0, codes[dend.leaf_order[i]],
                     spec.font_size, "middle");
  }

  // Height axis with three reference levels.
  detail::svg_line(os, left - 10.0, baseline, left - 10.0, top, "#000000", 1.0);
  for (int tick = 0; tick <= 2; ++tick) {
    const double h = h_max * tick / 2.0;
    const double y = baseline - h * h_scale;
    detail::svg_line(os, left - 14.0, y, left - 10.0, y, "#000000", 1.0);
    detail::svg_text(os, left - 18.0, y + spec.font_size * 0.35, format_number(h), spec.font_size,
                     "end");
  }
  os << "</svg>\n";
  return os.str();
}

// Mean agreement against panel size with +-sd error bars and a dashed
// reference level.
inline std::string render_stability(const StabilityCurve& curve, const RenderSpec& spec = {}) {
  if (curve.points.empty()) throw std::invalid_argument("empty stability curve");

  std::ostringstream os;
  detail::svg_open(os, spec);
  const double left = 70.0, right = 25.0, top = 30.0, bottom = 55.0;
  const double plot_w = spec.width - left - right;
  const double plot_h = spec.height - top - bottom;

  double y_min = 0.0;
  int x_max = 1;
  for (const auto& p : curve.points) {
    y_min = std::min(y_min, std::floor((p.mean - p.sd) * 10.0) / 10.0);
    x_max = std::max(x_max, p.m);
  }
  const double y_max = 1.0;

  auto X = [&](double m) { return left + m / x_max * plot_w; };
  auto Y = [&](double v) { return top + (y_max - v) / (y_max - y_min) * plot_h; };

  // Axes.
  detail::svg_line(os, left, top, left, top + plot_h, "#000000", 1.0);
  detail::svg_line(os, left, top + plot_h, left + plot_w, top + plot_h, "#000000", 1.0);

  const int x_step = std::max(1, static_cast<int>(std::ceil(x_max / 60.0)) * 10);
  for (int m = 0; m <= x_max; m += x_step) {
    detail::svg_line(os, X(m), top + plot_h, X(m), top + plot_h + 5.0, "#000000", 1.0);
    detail::svg_text(os, X(m), top + plot_h + 20.0, std::to_string(m), spec.font_size, "middle");
  }
  for (int k = static_cast<int>(std::ceil(y_min / 0.2 - 1e-9)); k <= 5; ++k) {
    const double v = k * 0.2;
    detail::svg_line(os, left - 5.0, Y(v), left, Y(v), "#000000", 1.0);
    detail::svg_text(os, left - 9.0, Y(v) + spec.font_size * 0.35, format_number(v),
                     spec.font_size, "end");
  }

  // Threshold level: the only dashed stroke in the figure.
  detail::svg_line(os, left, Y(spec.threshold), left + plot_w, Y(spec.threshold), "#cc0000", 1.5,
                   " stroke-dasharray=\"6,4\"");
  detail::svg_text(os, left + plot_w, Y(spec.threshold) - 5.0, format_number(spec.threshold),
                   spec.font_size, "end", "#cc0000");

  for (const auto& p : curve.points) {
    const double x = X(p.m);
    detail::svg_line(os, x, Y(p.mean - p.sd), x, Y(p.mean + p.sd), "#7599c7", 1.2);
    detail::svg_line(os, x - 3.0, Y(p.mean - p.sd), x + 3.0, Y(p.mean - p.sd), "#7599c7", 1.2);
    detail::svg_line(os, x - 3.0, Y(p.mean + p.sd), x + 3.0, Y(p.mean + p.sd), "#7599c7", 1.2);
  }

  os << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < curve.points.size(); ++i) {
    if (i) os << " ";
    os << detail::px(X(curve.points[i].m)) << "," << detail::px(Y(curve.points[i].mean));
  }
  os << "\"/>\n";

  for (const auto& p : curve.points) {
    os << "<circle cx=\"" << detail::px(X(p.m)) << "\" cy=\"" << detail::px(Y(p.mean))
       << "\" r=\"2.5\" fill=\"#1f5fa8\"/>\n";
  }

  detail::svg_text(os, left + plot_w / 2.0, spec.height - 12.0, "panel size m", spec.font_size,
                   "middle");
  detail::svg_text(os, left, top - 10.0, curve.method, spec.font_size, "start");
  os << "</svg>\n";
  return os.str();
}

}  // namespace sensomap
