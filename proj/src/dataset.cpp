#include "pbnn/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace pbnn {

const char* to_string(LabelSource source) {
  return source == LabelSource::ground_truth ? "ground_truth" : "imputed";
}

const char* to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::unlabeled: return "unlabeled";
    case DatasetRole::ground_truth: return "ground_truth";
    case DatasetRole::imputed: return "imputed";
    case DatasetRole::mixed: return "mixed";
    case DatasetRole::test: return "test";
    case DatasetRole::phi: return "phi";
    case DatasetRole::psi: return "psi";
  }
  return "unknown";
}

void validate(const Dataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& ex = d.examples[i];
    if (d.role == DatasetRole::unlabeled && ex.has_target()) {
      throw BadParams(fmt::format("unlabeled dataset has a target at example {}", i));
    }
    if (d.role != DatasetRole::unlabeled && !ex.has_target()) {
      throw BadParams(fmt::format("{} dataset lacks a target at example {}", to_string(d.role), i));
    }
    if (const auto* t = std::get_if<Tensor>(&ex.target); t && t->shape() != ex.input.shape()) {
      throw ShapeError(fmt::format("example {} target shape {} differs from input {}", i, shape_string(t->shape()),
                                   shape_string(ex.input.shape())));
    }
    if (const auto* c = std::get_if<int>(&ex.target); c && *c < 0) {
      throw LabelOutOfRange(fmt::format("example {} has negative class {}", i, *c));
    }
    if (d.role != DatasetRole::mixed && ex.source != d.examples.front().source) {
      throw BadParams(fmt::format("{} dataset mixes label sources at example {}", to_string(d.role), i));
    }
  }
  if (d.role == DatasetRole::imputed && !d.empty() && d.examples.front().source != LabelSource::imputed) {
    throw BadParams("imputed dataset holds ground-truth examples");
  }
}

Dataset strip_targets(const Dataset& d) {
  Dataset out{{}, DatasetRole::unlabeled};
  out.examples.reserve(d.size());
  for (const auto& ex : d.examples) out.examples.push_back({ex.input, std::monostate{}, LabelSource::ground_truth});
  return out;
}

std::size_t count_source(const Dataset& d, LabelSource source) {
  return static_cast<std::size_t>(
      std::count_if(d.examples.begin(), d.examples.end(), [&](const auto& ex) { return ex.source == source; }));
}

}  // namespace pbnn
