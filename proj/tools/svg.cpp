#include "svg.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace pbnn::cli {

namespace {

constexpr double kWidth = 640, kPanel = 360;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

struct Range {
  double lo, hi;
  double frac(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
};

Range padded(double lo, double hi) {
  if (hi - lo < 1e-9) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void panel(std::string& out, double y0, const std::string& title, const std::vector<MetricRow>& rows) {
  const bool by_ratio = std::any_of(rows.begin(), rows.end(), [](const MetricRow& r) { return r.ratio_x.has_value(); });
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    ys.push_back(r.value);
    if (by_ratio && r.ratio_x && *r.ratio_x > 0) xs.push_back(std::log10(*r.ratio_x));
    if (!by_ratio && r.flops > 0) xs.push_back(std::log10(static_cast<double>(r.flops)));
  }
  if (xs.empty()) xs = {0.0};
  const Range xr{std::floor(*std::min_element(xs.begin(), xs.end())), std::ceil(*std::max_element(xs.begin(), xs.end()))};
  const Range yr = padded(*std::min_element(ys.begin(), ys.end()), *std::max_element(ys.begin(), ys.end()));
  const double pw = kWidth - kLeft - kRight, ph = kPanel - kTop - kBottom;
  auto px = [&](double lx) { return kLeft + (xr.hi > xr.lo ? xr.frac(lx) : 0.5) * pw; };
  auto py = [&](double v) { return y0 + kTop + (1.0 - yr.frac(v)) * ph; };

  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\" font-weight=\"bold\">{}</text>\n", num(kLeft),
                     num(y0 + 22), esc(title));
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", num(kLeft),
                     num(y0 + kTop), num(pw), num(ph));
  for (int i = 0; i <= 4; ++i) {
    const double v = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6),
                       num(py(v) + 3), fmt::format("{:.3f}", v));
  }
  for (int e = static_cast<int>(xr.lo); e <= static_cast<int>(xr.hi); ++e) {
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ddd\"/>\n", num(px(e)),
                       num(y0 + kTop), num(y0 + kTop + ph));
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">1e{}</text>\n", num(px(e)),
                       num(y0 + kTop + ph + 14), e);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", num(kLeft + pw / 2),
                     num(y0 + kTop + ph + 32), by_ratio ? "ground-truth ratio x (log)" : "FLOPs per example (log)");

  std::map<std::string, std::vector<const MetricRow*>> series;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!series.contains(r.method)) order.push_back(r.method);
    series[r.method].push_back(&r);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string colour = kColours[i % std::size(kColours)];
    auto& pts = series[order[i]];
    const double ly = y0 + kTop + 14.0 * static_cast<double>(i) + 8;
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", num(kWidth - kRight + 10),
                       num(ly), colour, esc(order[i]));
    if (by_ratio && !pts.front()->ratio_x) {
      for (const auto* r : pts) {
        out += fmt::format(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n",
            num(kLeft), num(py(r->value)), num(kLeft + pw), num(py(r->value)), colour);
      }
      continue;
    }
    std::sort(pts.begin(), pts.end(), [&](const MetricRow* a, const MetricRow* b) {
      return by_ratio ? a->ratio_x.value_or(0) < b->ratio_x.value_or(0) : a->flops < b->flops;
    });
    std::string poly;
    for (const auto* r : pts) {
      double lx;
      if (by_ratio) {
        if (!r->ratio_x || *r->ratio_x <= 0) continue;
        lx = std::log10(*r->ratio_x);
      } else {
        if (r->flops == 0) continue;
        lx = std::log10(static_cast<double>(r->flops));
      }
      poly += fmt::format("{},{} ", num(px(lx)), num(py(r->value)));
      out += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", num(px(lx)), num(py(r->value)), colour);
    }
    if (by_ratio && !poly.empty()) {
      poly.pop_back();
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", poly, colour);
    }
  }
}

}  // namespace

std::string render_svg(const std::vector<MetricRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<MetricRow>> panels;
  for (const auto& r : rows) panels[{r.task, r.metric}].push_back(r);
  const double height = std::max<double>(1, static_cast<double>(panels.size())) * kPanel;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      num(kWidth), num(height));
  double y = 0;
  for (const auto& [key, panel_rows] : panels) {
    panel(out, y, key.first + ": " + key.second, panel_rows);
    y += kPanel;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace pbnn::cli
