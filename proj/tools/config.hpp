#pragma once

#include <string>

#include "pbnn/bootstrap.hpp"

namespace pbnn::cli {

struct RunConfig {
  ExperimentConfig experiment;
  std::string csv_path;  // empty: <out-dir>/metrics.csv
  std::string svg_path;  // empty: no plot unless --svg is given
};

/// Parses the experiment config JSON. Unknown keys, wrong types and invalid
/// values throw ConfigError naming the dotted key path.
RunConfig parse_config(const std::string& json_text);

/// JSON for `cfg`, accepted back by parse_config.
std::string dump_config(const RunConfig& cfg);

}  // namespace pbnn::cli
