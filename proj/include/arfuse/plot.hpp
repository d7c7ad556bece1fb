#pragma once

// Single-curve SVG of a sweep: ensemble metric against w, a circle at alpha
// and a dashed vertical line at D. All coordinates are printed with a fixed
// number of decimals so identical sweeps give identical bytes.

#include <algorithm>
#include <filesystem>
#include <string>

#include "arfuse/error.hpp"
#include "arfuse/format.hpp"
#include "arfuse/sweep.hpp"
#include "arfuse/tensor_store.hpp"

namespace arfuse {

inline std::string sweep_svg(const SweepResult& r) {
  if (r.grid.empty()) throw ArgumentError("cannot plot an empty sweep");
  constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;

  double x_lo = r.grid.front().w, x_hi = r.grid.back().w;
  if (x_hi - x_lo <= 0.0) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  double y_lo = r.grid.front().metric.value, y_hi = y_lo;
  for (const auto& p : r.grid) {
    y_lo = std::min(y_lo, p.metric.value);
    y_hi = std::max(y_hi, p.metric.value);
  }
  if (y_hi - y_lo <= 0.0) {
    const double pad = y_lo == 0.0 ? 1.0 : std::abs(y_lo) * 0.05;
    y_lo -= pad;
    y_hi += pad;
  }
  const auto px = [&](double w) { return kLeft + (w - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight); };
  const auto py = [&](double v) { return kTop + (y_hi - v) / (y_hi - y_lo) * (kHeight - kTop - kBottom); };
  const auto n = [](double v) { return fmt::fixed(v, 3); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<line x1=\"" + n(kLeft) + "\" y1=\"" + n(kHeight - kBottom) + "\" x2=\"" + n(kWidth - kRight) + "\" y2=\"" +
       n(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + n(kLeft) + "\" y1=\"" + n(kTop) + "\" x2=\"" + n(kLeft) + "\" y2=\"" + n(kHeight - kBottom) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + n(kWidth / 2) + "\" y=\"" + n(kHeight - 12) + "\" text-anchor=\"middle\" font-size=\"12\">w</text>\n";
  s += "<text x=\"14\" y=\"" + n(kHeight / 2) + "\" font-size=\"12\" transform=\"rotate(-90 14 " + n(kHeight / 2) +
       ")\" text-anchor=\"middle\">" + to_string(r.kind) + "</text>\n";
  for (double w : {x_lo, x_hi}) {
    s += "<text x=\"" + n(px(w)) + "\" y=\"" + n(kHeight - kBottom + 16) + "\" text-anchor=\"middle\" font-size=\"10\">" +
         fmt::fixed(w, 3) + "</text>\n";
  }
  for (double v : {y_lo, y_hi}) {
    s += "<text x=\"" + n(kLeft - 6) + "\" y=\"" + n(py(v) + 4) + "\" text-anchor=\"end\" font-size=\"10\">" +
         fmt::fixed(v, 4) + "</text>\n";
  }

  s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    if (i) s += ' ';
    s += n(px(r.grid[i].w)) + ',' + n(py(r.grid[i].metric.value));
  }
  s += "\"/>\n";

  if (r.d_index) {
    const double x = px(r.grid[*r.d_index].w);
    s += "<line x1=\"" + n(x) + "\" y1=\"" + n(kTop) + "\" x2=\"" + n(x) + "\" y2=\"" + n(kHeight - kBottom) +
         "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    s += "<text x=\"" + n(x + 3) + "\" y=\"" + n(kTop + 10) + "\" font-size=\"10\">D</text>\n";
  }
  const auto& a = r.alpha_point();
  s += "<circle cx=\"" + n(px(a.w)) + "\" cy=\"" + n(py(a.metric.value)) + "\" r=\"4\" fill=\"crimson\"/>\n";
  s += "<text x=\"" + n(px(a.w) + 6) + "\" y=\"" + n(py(a.metric.value) - 6) + "\" font-size=\"10\">alpha</text>\n";
  s += "</svg>\n";
  return s;
}

inline void emit_plot(const SweepResult& r, const std::filesystem::path& path) { io::write_text(path, sweep_svg(r)); }

}  // namespace arfuse
