#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbnn/tensor.hpp"

namespace pbnn {

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

  /// Normalised separable Gaussian taps; the 2-D window is their outer product.
  Eigen::VectorXd gaussian_taps() const;
  RowMatrix window_weights() const;
};

/// Mean SSIM over every valid window position (no padding).
double ssim(const Eigen::Ref<const RowMatrix>& a, const Eigen::Ref<const RowMatrix>& b,
            const SsimConfig& cfg = {});
double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {});

/// Mean SSIM of paired image lists, summed in order.
double mean_ssim(std::span<const Tensor> a, std::span<const Tensor> b, const SsimConfig& cfg = {});

/// 10 log10(peak^2 / MSE); +inf for identical inputs.
double psnr(const Tensor& a, const Tensor& b, double peak = 255.0);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// One point of a quality-vs-cost figure.
struct MetricRow {
  std::string task;
  std::string method;
  std::optional<double> ratio_x;
  std::string metric;  // ssim | psnr | accuracy
  double value = 0.0;
  std::uint64_t flops = 0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* metrics_csv_header = "task,method,ratio_x,metric,value,flops";

/// Rows ordered by (task, method, ratio_x), absent ratio first.
std::vector<MetricRow> flops_report(std::vector<MetricRow> rows);

/// CSV text with header; floats at 17 significant digits, absent ratio as an empty field.
std::string to_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_csv(const std::string& text);

std::string format_double(double v);

}  // namespace pbnn
