#include "pbnn/network.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "pbnn/rng.hpp"

namespace pbnn {

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

std::size_t Network::parametric_layer_count() const {
  return static_cast<std::size_t>(
      std::count_if(layers.begin(), layers.end(), [](const Layer& l) { return l.has_parameters(); }));
}

void Network::remove_skip(std::size_t slot) {
  if (slot >= skips.size() || skips[slot] == SkipPair{}) {
    throw BadArchitecture(fmt::format("no skip in slot {}", slot));
  }
  std::erase_if(layers, [slot](const Layer& l) {
    return (l.kind == LayerKind::skip_entry || l.kind == LayerKind::skip_exit) && l.skip_slot == slot;
  });
  skips[slot] = SkipPair{};
}

std::vector<SkipPair> skip_pairs_from_markers(const std::vector<Layer>& layers) {
  std::vector<SkipPair> pairs;
  std::size_t parametric = 0;
  for (const auto& l : layers) {
    if (l.has_parameters()) ++parametric;
    if (l.kind != LayerKind::skip_entry && l.kind != LayerKind::skip_exit) continue;
    if (l.skip_slot >= pairs.size()) pairs.resize(l.skip_slot + 1);
    if (l.kind == LayerKind::skip_entry) {
      pairs[l.skip_slot].from = parametric;
    } else {
      pairs[l.skip_slot].to = parametric + 1;
    }
  }
  return pairs;
}

void validate(const Network& net) {
  std::map<std::size_t, int> state;  // 1 = entry seen, 2 = closed
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (l.kind == LayerKind::skip_entry) {
      if (state.contains(l.skip_slot)) throw BadArchitecture(fmt::format("slot {} opened twice", l.skip_slot));
      state[l.skip_slot] = 1;
    } else if (l.kind == LayerKind::skip_exit) {
      auto it = state.find(l.skip_slot);
      if (it == state.end() || it->second != 1) {
        throw BadArchitecture(fmt::format("skip exit at layer {} has no open entry for slot {}", i, l.skip_slot));
      }
      it->second = 2;
    } else if (l.has_parameters()) {
      if (l.weights.shape().empty() || l.bias.shape().size() != 1) {
        throw BadArchitecture(fmt::format("layer {} is missing parameters", i));
      }
    }
  }
  for (const auto& [slot, s] : state) {
    if (s != 2) throw BadArchitecture(fmt::format("skip slot {} never closed", slot));
  }
  auto derived = skip_pairs_from_markers(net.layers);
  derived.resize(std::max(derived.size(), net.skips.size()));
  auto declared = net.skips;
  declared.resize(derived.size());
  if (derived != declared) throw BadArchitecture("skip list does not match skip markers");
}

Tensor network_forward(const Network& net, const Tensor& x, ForwardCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->inputs.reserve(net.layers.size());
    cache->flops.assign(net.layers.size(), 0);
  }
  std::map<std::size_t, Tensor> slots;
  Tensor cur = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (cache) cache->inputs.push_back(cur);
    std::uint64_t flops = 0;
    switch (l.kind) {
      case LayerKind::conv2d: cur = conv2d_forward(cur, l, &flops); break;
      case LayerKind::fully_connected: cur = fc_forward(cur, l, &flops); break;
      case LayerKind::relu: cur = relu_forward(cur); break;
      case LayerKind::skip_entry: slots.insert_or_assign(l.skip_slot, cur); break;
      case LayerKind::skip_exit: {
        auto it = slots.find(l.skip_slot);
        if (it == slots.end()) throw BadArchitecture(fmt::format("skip slot {} read before written", l.skip_slot));
        require_same_shape(cur, it->second, "skip-add");
        cur.values() += it->second.values();
        flops = cur.size();
        break;
      }
    }
    if (cache) cache->flops[i] = flops;
  }
  return cur;
}

NetworkGrads network_backward(const Network& net, const ForwardCache& cache, const Tensor& grad_out) {
  if (cache.inputs.size() != net.layers.size()) throw ShapeError("forward cache does not match network");
  NetworkGrads grads;
  grads.weights.resize(net.layers.size());
  grads.bias.resize(net.layers.size());
  std::map<std::size_t, Tensor> slot_grads;
  Tensor g = grad_out;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const Layer& l = net.layers[i];
    const Tensor& in = cache.inputs[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        auto lg = conv2d_backward(in, l, g);
        g = std::move(lg.input);
        grads.weights[i] = std::move(lg.weights);
        grads.bias[i] = std::move(lg.bias);
        break;
      }
      case LayerKind::fully_connected: {
        auto lg = fc_backward(in, l, g);
        g = std::move(lg.input);
        grads.weights[i] = std::move(lg.weights);
        grads.bias[i] = std::move(lg.bias);
        break;
      }
      case LayerKind::relu: g = relu_backward(in, g); break;
      case LayerKind::skip_exit: slot_grads.insert_or_assign(l.skip_slot, g); break;
      case LayerKind::skip_entry: {
        auto it = slot_grads.find(l.skip_slot);
        if (it != slot_grads.end()) g.values() += it->second.values();
        break;
      }
    }
  }
  grads.input = std::move(g);
  return grads;
}

std::vector<std::uint64_t> flop_ledger(const Network& net, const Shape& input_shape) {
  std::vector<std::uint64_t> ledger(net.layers.size(), 0);
  std::map<std::size_t, Shape> slots;
  Shape cur = input_shape;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    switch (l.kind) {
      case LayerKind::conv2d:
        if (cur.size() != 4 || cur[1] != l.in_channels) {
          throw ShapeError(fmt::format("layer {} (conv2d, Cin={}) cannot take input {}", i, l.in_channels,
                                       shape_string(cur)));
        }
        cur[1] = l.out_channels;
        ledger[i] = 2 * l.kernel * l.kernel * l.in_channels * l.out_channels * cur[2] * cur[3] * cur[0];
        break;
      case LayerKind::fully_connected: {
        if (cur.size() < 2 || shape_size(cur) / cur[0] != l.in_channels) {
          throw ShapeError(fmt::format("layer {} (fc, in={}) cannot take input {}", i, l.in_channels,
                                       shape_string(cur)));
        }
        cur = {cur[0], l.out_channels};
        ledger[i] = 2 * l.in_channels * l.out_channels * cur[0];
        break;
      }
      case LayerKind::relu: break;
      case LayerKind::skip_entry: slots[l.skip_slot] = cur; break;
      case LayerKind::skip_exit: {
        auto it = slots.find(l.skip_slot);
        if (it == slots.end() || it->second != cur) {
          throw ShapeError(fmt::format("layer {} skip-add has incompatible shapes", i));
        }
        ledger[i] = shape_size(cur);
        break;
      }
    }
  }
  return ledger;
}

std::uint64_t count_flops(const Network& net, const Shape& input_shape) {
  std::uint64_t total = 0;
  for (auto f : flop_ledger(net, input_shape)) total += f;
  return total;
}

Shape output_shape(const Network& net, const Shape& input_shape) {
  Shape cur = input_shape;
  flop_ledger(net, input_shape);  // validates
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::conv2d) cur[1] = l.out_channels;
    if (l.kind == LayerKind::fully_connected) cur = {cur[0], l.out_channels};
  }
  return cur;
}

void initialize(Network& net, std::uint64_t seed) {
  const Rng root(seed);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (!l.has_parameters()) continue;
    const std::size_t receptive = l.kind == LayerKind::conv2d ? l.kernel * l.kernel : 1;
    const double fan_in = static_cast<double>(l.in_channels * receptive);
    const double fan_out = static_cast<double>(l.out_channels * receptive);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng = root.derive(i);
    for (double& w : l.weights.flat()) w = rng.uniform(-limit, limit);
    l.bias.values().setZero();
  }
}

Network build_skip_autoencoder(std::size_t depth, std::size_t channels, std::size_t image_channels,
                               std::size_t kernel, std::uint64_t seed) {
  if (depth % 2 != 0) throw OddDepth(fmt::format("autoencoder depth {} is odd", depth));
  if (depth < 2) throw BadArchitecture("autoencoder depth must be at least 2");
  if (channels == 0 || image_channels == 0) throw BadArchitecture("channel counts must be positive");

  Network net;
  std::map<std::size_t, std::size_t> source_slot;
  std::map<std::size_t, std::size_t> target_slot;
  for (std::size_t i = 1; i <= depth / 2; i += 2) {
    const std::size_t slot = net.skips.size();
    net.skips.push_back({i, depth + 1 - i});
    source_slot[i] = slot;
    target_slot[depth + 1 - i] = slot;
  }
  for (std::size_t i = 1; i <= depth; ++i) {
    if (auto it = target_slot.find(i); it != target_slot.end()) net.layers.push_back(Layer::skip_exit(it->second));
    const std::size_t cin = i == 1 ? image_channels : channels;
    const std::size_t cout = i == depth ? image_channels : channels;
    net.layers.push_back(Layer::conv2d(cin, cout, kernel));
    if (i < depth) net.layers.push_back(Layer::relu());
    if (auto it = source_slot.find(i); it != source_slot.end()) net.layers.push_back(Layer::skip_entry(it->second));
  }
  initialize(net, seed);
  return net;
}

Network build_target_classifier(const Shape& input_shape, std::size_t num_classes, std::size_t conv_channels,
                                const std::vector<std::size_t>& fc_sizes, std::size_t kernel, std::uint64_t seed) {
  if (input_shape.size() != 3) {
    throw BadArchitecture(fmt::format("classifier input must be [C,H,W], got {}", shape_string(input_shape)));
  }
  if (fc_sizes.empty()) throw BadArchitecture("classifier needs at least one fully-connected layer");
  if (fc_sizes.back() != num_classes) {
    throw BadArchitecture(
        fmt::format("last fully-connected size {} differs from num_classes {}", fc_sizes.back(), num_classes));
  }
  if (conv_channels == 0 || std::find(fc_sizes.begin(), fc_sizes.end(), 0u) != fc_sizes.end()) {
    throw BadArchitecture("layer widths must be positive");
  }
  Network net;
  net.layers.push_back(Layer::conv2d(input_shape[0], conv_channels, kernel));
  net.layers.push_back(Layer::relu());
  net.layers.push_back(Layer::conv2d(conv_channels, conv_channels, kernel));
  net.layers.push_back(Layer::relu());
  std::size_t features = conv_channels * input_shape[1] * input_shape[2];
  for (std::size_t i = 0; i < fc_sizes.size(); ++i) {
    net.layers.push_back(Layer::fully_connected(features, fc_sizes[i]));
    if (i + 1 < fc_sizes.size()) net.layers.push_back(Layer::relu());
    features = fc_sizes[i];
  }
  initialize(net, seed);
  return net;
}

}  // namespace pbnn
