#include "pbnn/layers.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace pbnn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::fully_connected: return "fully-connected";
    case LayerKind::skip_entry: return "skip-add-entry";
    case LayerKind::skip_exit: return "skip-add-exit";
  }
  return "unknown";
}

Layer Layer::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel) {
  if (kernel % 2 == 0) throw BadArchitecture(fmt::format("conv kernel size {} is not odd", kernel));
  Layer l;
  l.kind = LayerKind::conv2d;
  l.kernel = kernel;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.weights = Tensor({out_channels, in_channels, kernel, kernel});
  l.bias = Tensor({out_channels});
  return l;
}

Layer Layer::fully_connected(std::size_t in_features, std::size_t out_features) {
  Layer l;
  l.kind = LayerKind::fully_connected;
  l.in_channels = in_features;
  l.out_channels = out_features;
  l.weights = Tensor({out_features, in_features});
  l.bias = Tensor({out_features});
  return l;
}

Layer Layer::relu() { return Layer{}; }

Layer Layer::skip_entry(std::size_t slot) {
  Layer l;
  l.kind = LayerKind::skip_entry;
  l.skip_slot = slot;
  return l;
}

Layer Layer::skip_exit(std::size_t slot) {
  Layer l;
  l.kind = LayerKind::skip_exit;
  l.skip_slot = slot;
  return l;
}

namespace {

struct ConvGeometry {
  std::size_t batch, channels, height, width, kernel, pad;
  std::size_t patch_rows() const { return channels * kernel * kernel; }
  std::size_t pixels() const { return height * width; }
};

ConvGeometry conv_geometry(const Tensor& input, const Layer& layer) {
  if (layer.kind != LayerKind::conv2d) throw ShapeError("conv2d called with a non-conv layer");
  if (input.rank() != 4) {
    throw ShapeError(fmt::format("conv2d input must be [N,C,H,W], got {}", shape_string(input.shape())));
  }
  if (input.dim(1) != layer.in_channels) {
    throw ShapeError(fmt::format("conv2d channel dimension (axis 1) is {}, layer expects Cin={}", input.dim(1),
                                 layer.in_channels));
  }
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), layer.kernel, (layer.kernel - 1) / 2};
}

// Unfolds image n into [C*k*k, H*W] columns with zero padding.
void im2col(const Tensor& input, std::size_t n, const ConvGeometry& g, RowMatrix& cols) {
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const double* src = input.data() + n * g.channels * g.pixels();
  cols.resize(static_cast<Eigen::Index>(g.patch_rows()), static_cast<Eigen::Index>(g.pixels()));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = src + c * g.pixels();
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        double* dst = cols.row(row).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          double* out = dst + y * W;
          if (sy < 0 || sy >= H) {
            std::fill(out, out + W, 0.0);
            continue;
          }
          for (std::ptrdiff_t x = 0; x < W; ++x) {
            const std::ptrdiff_t sx = x + dx;
            out[x] = (sx < 0 || sx >= W) ? 0.0 : plane[sy * W + sx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back into image n of grad.
void col2im(const RowMatrix& cols, std::size_t n, const ConvGeometry& g, Tensor& grad) {
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  double* dst = grad.data() + n * g.channels * g.pixels();
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = dst + c * g.pixels();
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const double* src = cols.row(row).data();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          for (std::ptrdiff_t x = 0; x < W; ++x) {
            const std::ptrdiff_t sx = x + dx;
            if (sx >= 0 && sx < W) plane[sy * W + sx] += src[y * W + x];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Layer& layer, std::uint64_t* flops) {
  const ConvGeometry g = conv_geometry(input, layer);
  Tensor out({g.batch, layer.out_channels, g.height, g.width});
  const auto weights = layer.weights.matrix(layer.out_channels);
  const auto& bias = layer.bias.values();
  RowMatrix cols;
  const std::size_t out_stride = layer.out_channels * g.pixels();
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input, n, g, cols);
    RowMatrixMap dst(out.data() + n * out_stride, static_cast<Eigen::Index>(layer.out_channels),
                     static_cast<Eigen::Index>(g.pixels()));
    dst.noalias() = weights * cols;
    dst.colwise() += bias;
  }
  if (flops) {
    *flops += 2 * layer.kernel * layer.kernel * layer.in_channels * layer.out_channels * g.pixels() * g.batch;
  }
  return out;
}

LayerGrads conv2d_backward(const Tensor& input, const Layer& layer, const Tensor& grad_out) {
  const ConvGeometry g = conv_geometry(input, layer);
  const Shape expected{g.batch, layer.out_channels, g.height, g.width};
  if (grad_out.shape() != expected) {
    throw ShapeError(fmt::format("conv2d grad_out is {}, expected {}", shape_string(grad_out.shape()),
                                 shape_string(expected)));
  }
  LayerGrads grads{Tensor(input.shape()), Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
  const auto weights = layer.weights.matrix(layer.out_channels);
  auto dw = grads.weights.matrix(layer.out_channels);
  RowMatrix cols;
  RowMatrix dcols;
  const std::size_t out_stride = layer.out_channels * g.pixels();
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input, n, g, cols);
    ConstRowMatrixMap go(grad_out.data() + n * out_stride, static_cast<Eigen::Index>(layer.out_channels),
                         static_cast<Eigen::Index>(g.pixels()));
    dw.noalias() += go * cols.transpose();
    grads.bias.values() += go.rowwise().sum();
    dcols.noalias() = weights.transpose() * go;
    col2im(dcols, n, g, grads.input);
  }
  return grads;
}

Tensor relu_forward(const Tensor& x) { return Tensor(x.shape(), x.values().cwiseMax(0.0)); }

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Eigen::VectorXd g = (x.values().array() > 0.0).select(grad_out.values(), 0.0);
  return Tensor(x.shape(), std::move(g));
}

namespace {

std::size_t fc_batch(const Tensor& x, const Layer& layer) {
  if (layer.kind != LayerKind::fully_connected) throw ShapeError("fc called with a non-fc layer");
  if (x.rank() < 2) throw ShapeError(fmt::format("fc input must be [N,...], got {}", shape_string(x.shape())));
  const std::size_t features = x.size() / x.dim(0);
  if (features != layer.in_channels) {
    throw ShapeError(fmt::format("fc in_features is {} (input {}), layer expects {}", features,
                                 shape_string(x.shape()), layer.in_channels));
  }
  return x.dim(0);
}

}  // namespace

Tensor fc_forward(const Tensor& x, const Layer& layer, std::uint64_t* flops) {
  const std::size_t batch = fc_batch(x, layer);
  Tensor out({batch, layer.out_channels});
  auto y = out.matrix(batch);
  y.noalias() = x.matrix(batch) * layer.weights.matrix(layer.out_channels).transpose();
  y.rowwise() += layer.bias.values().transpose();
  if (flops) *flops += 2 * layer.in_channels * layer.out_channels * batch;
  return out;
}

LayerGrads fc_backward(const Tensor& x, const Layer& layer, const Tensor& grad_out) {
  const std::size_t batch = fc_batch(x, layer);
  if (grad_out.shape() != Shape{batch, layer.out_channels}) {
    throw ShapeError(fmt::format("fc grad_out is {}, expected [{},{}]", shape_string(grad_out.shape()), batch,
                                 layer.out_channels));
  }
  LayerGrads grads{Tensor(x.shape()), Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
  const auto g = grad_out.matrix(batch);
  grads.input.matrix(batch).noalias() = g * layer.weights.matrix(layer.out_channels);
  grads.weights.matrix(layer.out_channels).noalias() = g.transpose() * x.matrix(batch);
  grads.bias.values() = g.colwise().sum().transpose();
  return grads;
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const Eigen::VectorXd diff = pred.values() - target.values();
  const double count = static_cast<double>(pred.size());
  return {diff.squaredNorm() / count, Tensor(pred.shape(), Eigen::VectorXd(2.0 * diff / count))};
}

LossResult softmax_xent(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError(fmt::format("logits must be [N,K], got {}", shape_string(logits.shape())));
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (labels.size() != n) throw ShapeError(fmt::format("{} labels for {} logit rows", labels.size(), n));
  LossResult r{0.0, Tensor(logits.shape())};
  const auto z = logits.matrix(n);
  auto grad = r.grad.matrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw LabelOutOfRange(fmt::format("label {} at row {} outside [0,{})", label, i, k));
    }
    const auto row = z.row(static_cast<Eigen::Index>(i));
    const double m = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - m).exp();
    const double s = e.sum();
    r.loss += std::log(s) + m - row(label);
    grad.row(static_cast<Eigen::Index>(i)) = e / s;
    grad(static_cast<Eigen::Index>(i), label) -= 1.0;
  }
  r.loss /= static_cast<double>(n);
  grad /= static_cast<double>(n);
  return r;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows needs [N,K]");
  const auto z = logits.matrix(logits.dim(0));
  std::vector<int> out(logits.dim(0));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    z.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace pbnn
