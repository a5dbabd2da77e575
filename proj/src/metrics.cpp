#include "pbnn/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace pbnn {

Eigen::VectorXd SsimConfig::gaussian_taps() const {
  Eigen::VectorXd g(static_cast<Eigen::Index>(window));
  const double center = (static_cast<double>(window) - 1.0) / 2.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  return g / g.sum();
}

RowMatrix SsimConfig::window_weights() const {
  const Eigen::VectorXd g = gaussian_taps();
  return g * g.transpose();
}

namespace {

// Valid-mode separable filtering: rows first, then columns.
RowMatrix filter_valid(const RowMatrix& x, const Eigen::VectorXd& taps) {
  const Eigen::Index w = taps.size();
  const Eigen::Index out_rows = x.rows() - w + 1;
  const Eigen::Index out_cols = x.cols() - w + 1;
  RowMatrix horizontal = RowMatrix::Zero(x.rows(), out_cols);
  for (Eigen::Index k = 0; k < w; ++k) horizontal += taps[k] * x.middleCols(k, out_cols);
  RowMatrix out = RowMatrix::Zero(out_rows, out_cols);
  for (Eigen::Index k = 0; k < w; ++k) out += taps[k] * horizontal.middleRows(k, out_rows);
  return out;
}

}  // namespace

double ssim(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b, const SsimConfig& cfg) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(fmt::format("ssim inputs differ: {}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
  const auto w = static_cast<Eigen::Index>(cfg.window);
  if (a.rows() < w || a.cols() < w) {
    throw TooSmall(fmt::format("ssim needs at least {0}x{0} pixels, got {1}x{2}", w, a.rows(), a.cols()));
  }
  const Eigen::VectorXd taps = cfg.gaussian_taps();
  const RowMatrix mu_a = filter_valid(a, taps);
  const RowMatrix mu_b = filter_valid(b, taps);
  const RowMatrix e_aa = filter_valid(a.cwiseProduct(a), taps);
  const RowMatrix e_bb = filter_valid(b.cwiseProduct(b), taps);
  const RowMatrix e_ab = filter_valid(a.cwiseProduct(b), taps);
  const double c1 = cfg.c1();
  const double c2 = cfg.c2();

  double sum = 0.0;
  for (Eigen::Index y = 0; y < mu_a.rows(); ++y) {
    for (Eigen::Index x = 0; x < mu_a.cols(); ++x) {
      const double ma = mu_a(y, x);
      const double mb = mu_b(y, x);
      const double var_a = e_aa(y, x) - ma * ma;
      const double var_b = e_bb(y, x) - mb * mb;
      const double cov = e_ab(y, x) - ma * mb;
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
      sum += num / den;
    }
  }
  return sum / static_cast<double>(mu_a.size());
}

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError(fmt::format("ssim needs [H,W] images, got {} and {}", shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
  return ssim(a.image(), b.image(), cfg);
}

double mean_ssim(std::span<const Tensor> a, std::span<const Tensor> b, const SsimConfig& cfg) {
  if (a.size() != b.size()) throw ShapeError(fmt::format("{} images vs {} references", a.size(), b.size()));
  if (a.empty()) throw EmptyInput("mean_ssim of zero images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += ssim(a[i], b[i], cfg);
  return sum / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  const double mse = (a.values() - b.values()).squaredNorm() / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError(fmt::format("{} predictions vs {} labels", predictions.size(), labels.size()));
  }
  if (predictions.empty()) throw EmptyInput("accuracy of zero predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<MetricRow> flops_report(std::vector<MetricRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& x, const MetricRow& y) {
    return std::tie(x.task, x.method, x.ratio_x) < std::tie(y.task, y.method, y.ratio_x);
  });
  return rows;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

namespace {

void check_field(const std::string& s, const char* name) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw CsvError(fmt::format("{} '{}' contains a CSV delimiter", name, s));
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw CsvError(fmt::format("line {}: bad number '{}'", line, s));
  return v;
}

}  // namespace

std::string to_csv(const std::vector<MetricRow>& rows) {
  std::string out = metrics_csv_header;
  out.push_back('\n');
  for (const auto& r : rows) {
    check_field(r.task, "task");
    check_field(r.method, "method");
    check_field(r.metric, "metric");
    out += fmt::format("{},{},{},{},{},{}\n", r.task, r.method, r.ratio_x ? format_double(*r.ratio_x) : "", r.metric,
                       format_double(r.value), r.flops);
  }
  return out;
}

std::vector<MetricRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header) throw CsvError("missing or wrong metrics CSV header");
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) throw CsvError(fmt::format("line {}: expected 6 fields, got {}", lineno, f.size()));
    MetricRow r;
    r.task = f[0];
    r.method = f[1];
    if (!f[2].empty()) r.ratio_x = parse_double(f[2], lineno);
    r.metric = f[3];
    r.value = parse_double(f[4], lineno);
    char* end = nullptr;
    r.flops = std::strtoull(f[5].c_str(), &end, 10);
    if (f[5].empty() || end != f[5].c_str() + f[5].size()) {
      throw CsvError(fmt::format("line {}: bad flop count '{}'", lineno, f[5]));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace pbnn
