#pragma once

#include <variant>
#include <vector>

#include "pbnn/tensor.hpp"

namespace pbnn {

enum class LabelSource { ground_truth, imputed };

/// Collection roles: U, L, S of the bootstrapping workflow plus the mixed
/// training set, held-out test data and the two halves of a teacher/student split.
enum class DatasetRole { unlabeled, ground_truth, imputed, mixed, test, phi, psi };

const char* to_string(LabelSource source);
const char* to_string(DatasetRole role);

/// Image target for regression, class index for classification, or nothing.
using Target = std::variant<std::monostate, Tensor, int>;

struct LabeledExample {
  Tensor input;
  Target target;
  LabelSource source = LabelSource::ground_truth;

  bool has_target() const noexcept { return !std::holds_alternative<std::monostate>(target); }
  const Tensor& target_tensor() const { return std::get<Tensor>(target); }
  int target_class() const { return std::get<int>(target); }
};

struct Dataset {
  std::vector<LabeledExample> examples;
  DatasetRole role = DatasetRole::ground_truth;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  const LabeledExample& operator[](std::size_t i) const { return examples[i]; }
};

/// Role consistency: unlabeled sets carry no targets, labeled sets carry
/// them, and every role except `mixed` has a single label source.
void validate(const Dataset& d);

/// Copy of `d` with every target removed and role set to unlabeled.
Dataset strip_targets(const Dataset& d);

std::size_t count_source(const Dataset& d, LabelSource source);

}  // namespace pbnn
