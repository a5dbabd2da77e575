#pragma once

#include <cstdint>
#include <vector>

#include "pbnn/layers.hpp"

namespace pbnn {

/// Skip connection between parametric layers, numbered from 1 in order of
/// appearance: the output of layer `from` (after its activation) is added to
/// the input of layer `to`.
struct SkipPair {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const SkipPair&, const SkipPair&) = default;
};

/// Layer sequence with skip topology.
///
/// Skips are realised in `layers` by skip_entry/skip_exit markers sharing a
/// slot; `skips` is the same topology in parametric-layer numbering, with
/// entry k of `skips` owning slot k.
struct Network {
  std::vector<Layer> layers;
  std::vector<SkipPair> skips;

  std::size_t parameter_count() const;
  std::size_t parametric_layer_count() const;

  /// Drops skip `slot` (both markers and its pair); remaining slots keep their ids.
  void remove_skip(std::size_t slot);
};

/// Checks marker/slot consistency and that `skips` matches the markers.
void validate(const Network& net);

/// Topology implied by the skip markers of `layers`, ordered by slot.
std::vector<SkipPair> skip_pairs_from_markers(const std::vector<Layer>& layers);

/// Per-layer inputs retained for backward, plus the forward flop ledger.
struct ForwardCache {
  std::vector<Tensor> inputs;
  std::vector<std::uint64_t> flops;
};

Tensor network_forward(const Network& net, const Tensor& x, ForwardCache* cache = nullptr);

struct NetworkGrads {
  Tensor input;
  std::vector<Tensor> weights;  // one per layer; empty scalar for parameter-free layers
  std::vector<Tensor> bias;
};

NetworkGrads network_backward(const Network& net, const ForwardCache& cache, const Tensor& grad_out);

/// Per-layer multiply+add counts for an input of `input_shape` (batch axis included).
std::vector<std::uint64_t> flop_ledger(const Network& net, const Shape& input_shape);
std::uint64_t count_flops(const Network& net, const Shape& input_shape);

/// Shape produced by `net` on an input of `input_shape`.
Shape output_shape(const Network& net, const Shape& input_shape);

/// Uniform Glorot initialisation of every parametric layer; biases zeroed.
void initialize(Network& net, std::uint64_t seed);

/// Encoder-decoder of `depth` same-padding convolutions with ReLU after all
/// but the last and skips (i, depth+1-i) for odd i <= depth/2.
Network build_skip_autoencoder(std::size_t depth, std::size_t channels, std::size_t image_channels,
                               std::size_t kernel = 3, std::uint64_t seed = 0);

/// Two conv+ReLU layers followed by fully-connected layers with ReLU between
/// them. `input_shape` is the per-example [C, H, W].
Network build_target_classifier(const Shape& input_shape, std::size_t num_classes, std::size_t conv_channels = 64,
                                const std::vector<std::size_t>& fc_sizes = {384, 192, 10}, std::size_t kernel = 3,
                                std::uint64_t seed = 0);

}  // namespace pbnn
