#pragma once

#include <string>
#include <vector>

#include "pbnn/metrics.hpp"

namespace pbnn::cli {

/// Standalone SVG with one panel per (task, metric). Rows with a ratio become
/// one polyline per method over a log-scaled ratio axis (ratio 0 is skipped);
/// rows without a ratio become dashed horizontal reference lines. Panels with
/// no ratio rows plot the metric against log FLOPs instead.
std::string render_svg(const std::vector<MetricRow>& rows);

}  // namespace pbnn::cli
