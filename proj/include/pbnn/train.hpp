#pragma once

#include <cstdint>
#include <vector>

#include "pbnn/dataset.hpp"
#include "pbnn/network.hpp"

namespace pbnn {

enum class LossKind { mse, softmax_xent };

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;

  /// Throws BadParams when a field is out of range.
  void validate() const;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-example loss of each epoch
};

/// Mini-batch SGD with momentum, in place on `net`.
///
/// Each epoch visits the examples in an order drawn from Rng(cfg.seed);
/// results are bit-identical for identical inputs.
TrainLog train(Network& net, const Dataset& data, LossKind loss, const SgdConfig& cfg);

/// Forward pass over `inputs` in chunks of `batch_size`, one output per input.
std::vector<Tensor> predict(const Network& net, std::span<const Tensor> inputs, std::size_t batch_size = 32);

/// Class predictions (row argmax) for per-example inputs.
std::vector<int> predict_classes(const Network& net, std::span<const Tensor> inputs, std::size_t batch_size = 32);

}  // namespace pbnn
