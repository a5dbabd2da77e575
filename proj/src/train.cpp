#include "pbnn/train.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

#include "pbnn/rng.hpp"

namespace pbnn {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw BadParams(fmt::format("learning_rate {} must be finite and non-negative", learning_rate));
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw BadParams(fmt::format("momentum {} outside [0,1)", momentum));
  if (batch_size == 0) throw BadParams("batch_size must be positive");
  if (epochs == 0) throw BadParams("epochs must be positive");
}

namespace {

struct Velocity {
  std::vector<Eigen::VectorXd> weights;
  std::vector<Eigen::VectorXd> bias;
};

}  // namespace

TrainLog train(Network& net, const Dataset& data, LossKind loss, const SgdConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw EmptyDataset("training set is empty");
  const Shape& in_shape = data.examples.front().input.shape();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data.examples[i];
    if (ex.input.shape() != in_shape) throw ShapeError(fmt::format("example {} input shape differs", i));
    const bool ok = loss == LossKind::mse ? std::holds_alternative<Tensor>(ex.target)
                                          : std::holds_alternative<int>(ex.target);
    if (!ok) throw BadParams(fmt::format("example {} target does not match the loss kind", i));
  }

  Velocity vel;
  for (const auto& l : net.layers) {
    vel.weights.push_back(Eigen::VectorXd::Zero(l.has_parameters() ? static_cast<Eigen::Index>(l.weights.size()) : 0));
    vel.bias.push_back(Eigen::VectorXd::Zero(l.has_parameters() ? static_cast<Eigen::Index>(l.bias.size()) : 0));
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  ForwardCache cache;
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      inputs.clear();
      targets.clear();
      labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data.examples[order[k]];
        inputs.push_back(ex.input);
        if (loss == LossKind::mse) {
          targets.push_back(ex.target_tensor());
        } else {
          labels.push_back(ex.target_class());
        }
      }
      const Tensor batch = stack(inputs);
      const Tensor out = network_forward(net, batch, &cache);
      LossResult lr;
      if (loss == LossKind::mse) {
        lr = mse_loss(out, stack(targets).reshaped(out.shape()));
      } else {
        lr = softmax_xent(out, labels);
      }
      total += lr.loss * static_cast<double>(end - start);
      const NetworkGrads grads = network_backward(net, cache, lr.grad);
      for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        if (!l.has_parameters()) continue;
        vel.weights[i] = cfg.momentum * vel.weights[i] - cfg.learning_rate * grads.weights[i].values();
        vel.bias[i] = cfg.momentum * vel.bias[i] - cfg.learning_rate * grads.bias[i].values();
        l.weights.values() += vel.weights[i];
        l.bias.values() += vel.bias[i];
      }
    }
    log.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return log;
}

std::vector<Tensor> predict(const Network& net, std::span<const Tensor> inputs, std::size_t batch_size) {
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  if (batch_size == 0) batch_size = 1;
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const std::size_t end = std::min(inputs.size(), start + batch_size);
    const Tensor y = network_forward(net, stack(inputs.subspan(start, end - start)));
    for (std::size_t n = 0; n < end - start; ++n) out.push_back(unstack(y, n));
  }
  return out;
}

std::vector<int> predict_classes(const Network& net, std::span<const Tensor> inputs, std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(inputs.size());
  if (batch_size == 0) batch_size = 1;
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const std::size_t end = std::min(inputs.size(), start + batch_size);
    const auto cls = argmax_rows(network_forward(net, stack(inputs.subspan(start, end - start))));
    out.insert(out.end(), cls.begin(), cls.end());
  }
  return out;
}

}  // namespace pbnn
