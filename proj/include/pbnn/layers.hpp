#pragma once

#include <cstdint>
#include <span>

#include "pbnn/tensor.hpp"

namespace pbnn {

enum class LayerKind : std::uint8_t {
  conv2d = 1,
  relu = 2,
  fully_connected = 3,
  skip_entry = 4,  // caches its input for a later skip_exit with the same slot
  skip_exit = 5,   // adds the cached tensor of its slot to its input
};

const char* to_string(LayerKind kind);

/// One stage of a Network.
///
/// Convolutions are stride 1 with "same" zero padding, so the kernel size
/// must be odd. For fully-connected layers `in_channels`/`out_channels`
/// hold the feature counts; the input is flattened past the batch axis.
struct Layer {
  LayerKind kind = LayerKind::relu;
  Tensor weights;  // conv [Cout, Cin, k, k]; fc [out, in]
  Tensor bias;     // [Cout] / [out]
  std::size_t kernel = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t skip_slot = 0;

  static Layer conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);
  static Layer fully_connected(std::size_t in_features, std::size_t out_features);
  static Layer relu();
  static Layer skip_entry(std::size_t slot);
  static Layer skip_exit(std::size_t slot);

  bool has_parameters() const noexcept {
    return kind == LayerKind::conv2d || kind == LayerKind::fully_connected;
  }
  std::size_t parameter_count() const noexcept { return has_parameters() ? weights.size() + bias.size() : 0; }
};

struct LayerGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

// Each forward adds its multiply+add count to *flops when given.
Tensor conv2d_forward(const Tensor& input, const Layer& layer, std::uint64_t* flops = nullptr);
LayerGrads conv2d_backward(const Tensor& input, const Layer& layer, const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);
/// Subgradient at exactly zero is zero.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor fc_forward(const Tensor& x, const Layer& layer, std::uint64_t* flops = nullptr);
LayerGrads fc_backward(const Tensor& x, const Layer& layer, const Tensor& grad_out);

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// Mean squared error over every element.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// Mean cross-entropy of row-wise softmax over logits [N, K].
LossResult softmax_xent(const Tensor& logits, std::span<const int> labels);

/// Row-wise argmax of logits [N, K].
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace pbnn
