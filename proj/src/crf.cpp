#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "pbnn/graphcut.hpp"

namespace pbnn {

CrfParams CrfParams::uniform(std::size_t num_labels, double lambda, double smooth_trunc, double data_trunc) {
  if (num_labels == 0) throw BadCrfParams("need at least one label");
  CrfParams p;
  p.lambda = lambda;
  p.smooth_trunc = smooth_trunc;
  p.data_trunc = data_trunc;
  p.label_values.resize(num_labels);
  for (std::size_t i = 0; i < num_labels; ++i) {
    p.label_values[i] = num_labels == 1 ? 0.0 : 255.0 * static_cast<double>(i) / static_cast<double>(num_labels - 1);
  }
  return p;
}

double CrfParams::data_cost(std::size_t label, double intensity) const {
  const double d = label_values[label] - intensity;
  return std::min(d * d, data_trunc);
}

double CrfParams::smoothness(std::size_t a, std::size_t b) const {
  return lambda * std::min(std::abs(label_values[a] - label_values[b]), smooth_trunc);
}

void CrfParams::validate() const {
  if (label_values.empty()) throw BadCrfParams("label set is empty");
  for (std::size_t i = 0; i < label_values.size(); ++i) {
    const double v = label_values[i];
    if (!(v >= 0.0 && v <= 255.0)) throw BadCrfParams(fmt::format("label value {} outside [0,255]", v));
    if (i > 0 && !(v > label_values[i - 1])) throw BadCrfParams("label values must be strictly increasing");
  }
  if (!std::isfinite(lambda)) throw BadCrfParams("lambda must be finite");
  if (!(smooth_trunc > 0.0)) throw BadCrfParams("smooth_trunc must be positive");
  if (!(data_trunc > 0.0)) throw BadCrfParams("data_trunc must be positive");
}

void CrfParams::require_metric() const {
  const std::size_t k = num_labels();
  for (std::size_t a = 0; a < k; ++a) {
    if (smoothness(a, a) != 0.0) throw NonMetricSmoothness(fmt::format("V({0},{0}) != 0", a));
    for (std::size_t b = 0; b < k; ++b) {
      const double vab = smoothness(a, b);
      if (vab < 0.0) throw NonMetricSmoothness(fmt::format("V({},{}) = {} is negative", a, b, vab));
      if (vab != smoothness(b, a)) throw NonMetricSmoothness(fmt::format("V({},{}) is not symmetric", a, b));
      for (std::size_t c = 0; c < k; ++c) {
        // Slack absorbs rounding in evenly spaced label values.
        if (vab > smoothness(a, c) + smoothness(c, b) + 1e-9 * std::max(1.0, vab)) {
          throw NonMetricSmoothness(fmt::format("triangle inequality fails for labels {},{},{}", a, b, c));
        }
      }
    }
  }
}

namespace {

void check_problem(const Labeling& f, const Tensor& image, const CrfParams& p) {
  if (image.rank() != 2) {
    throw DimensionMismatch(fmt::format("image must be [H,W], got {}", shape_string(image.shape())));
  }
  if (image.dim(0) != f.height || image.dim(1) != f.width || f.labels.size() != f.width * f.height) {
    throw DimensionMismatch(fmt::format("labeling is {}x{} but image is {}x{}", f.height, f.width, image.dim(0),
                                        image.dim(1)));
  }
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    if (f.labels[i] >= p.num_labels()) {
      throw LabelOutOfRange(fmt::format("pixel {} holds label {} of {}", i, f.labels[i], p.num_labels()));
    }
  }
}

void count_data(OpCounter* ops) {
  if (ops) {
    ops->adds += 1;
    ops->muls += 1;
  }
}

void count_smooth(OpCounter* ops) {
  if (ops) {
    ops->adds += 1;
    ops->muls += 1;
  }
}

// Calls fn(p, q) for every 4-neighbour pair in row-major order, right then down.
template <typename Fn>
void for_each_edge(std::size_t w, std::size_t h, Fn&& fn) {
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      if (x + 1 < w) fn(p, p + 1);
      if (y + 1 < h) fn(p, p + w);
    }
  }
}

}  // namespace

Energy energy(const Labeling& f, const Tensor& image, const CrfParams& p, OpCounter* ops) {
  check_problem(f, image, p);
  Energy e;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    e.data += p.data_cost(f.labels[i], image[i]);
    count_data(ops);
  }
  for_each_edge(f.width, f.height, [&](std::size_t a, std::size_t b) {
    e.smooth += p.smoothness(f.labels[a], f.labels[b]);
    count_smooth(ops);
  });
  e.total = e.data + e.smooth;
  if (ops) {
    const std::size_t edges = (f.width - 1) * f.height + f.width * (f.height - 1);
    ops->adds += f.labels.size() + edges + 1;  // accumulations
  }
  return e;
}

Labeling expansion_move(const Labeling& f, std::size_t alpha, const Tensor& image, const CrfParams& p,
                        OpCounter* ops) {
  check_problem(f, image, p);
  if (alpha >= p.num_labels()) throw LabelOutOfRange(fmt::format("alpha {} of {} labels", alpha, p.num_labels()));
  p.require_metric();

  // Source side keeps the current label, sink side switches to alpha.
  const std::size_t n = f.labels.size();
  FlowGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double keep = p.data_cost(f.labels[i], image[i]);
    const double swap = p.data_cost(alpha, image[i]);
    count_data(ops);
    count_data(ops);
    const double m = std::min(keep, swap);
    g.add_terminal_weights(static_cast<FlowGraph::Node>(i), swap - m, keep - m);
    if (ops) ops->adds += 2;
  }
  for_each_edge(f.width, f.height, [&](std::size_t a, std::size_t b) {
    const std::size_t la = f.labels[a];
    const std::size_t lb = f.labels[b];
    const auto na = static_cast<FlowGraph::Node>(a);
    const auto nb = static_cast<FlowGraph::Node>(b);
    if (la == lb) {
      const double v = p.smoothness(la, alpha);
      count_smooth(ops);
      g.add_edge(na, nb, v, v);
      return;
    }
    const double v_keep = p.smoothness(la, lb);
    const double v_a = p.smoothness(la, alpha);
    const double v_b = p.smoothness(alpha, lb);
    count_smooth(ops);
    count_smooth(ops);
    count_smooth(ops);
    const FlowGraph::Node aux = g.add_node();
    g.add_edge(na, aux, v_a, v_a);
    g.add_edge(aux, nb, v_b, v_b);
    g.add_arc(aux, FlowGraph::sink, v_keep);
  });

  const MaxFlowResult cut = max_flow(g, ops);
  Labeling out = f;
  for (std::size_t i = 0; i < n; ++i) {
    if (cut.side[i] == CutSide::sink) out.labels[i] = alpha;
  }
  return out;
}

Labeling swap_move(const Labeling& f, std::size_t alpha, std::size_t beta, const Tensor& image, const CrfParams& p,
                   OpCounter* ops) {
  check_problem(f, image, p);
  if (alpha == beta) throw SameLabels(fmt::format("swap move needs distinct labels, got {} twice", alpha));
  if (alpha >= p.num_labels() || beta >= p.num_labels()) {
    throw LabelOutOfRange(fmt::format("swap labels {},{} of {} labels", alpha, beta, p.num_labels()));
  }

  const std::size_t n = f.labels.size();
  std::vector<FlowGraph::Node> node(n, -1);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (f.labels[i] == alpha || f.labels[i] == beta) node[i] = static_cast<FlowGraph::Node>(count++);
  }
  if (count == 0) return f;

  // Source side takes alpha, sink side takes beta.
  FlowGraph g(count);
  std::vector<double> cost_alpha(count, 0.0);
  std::vector<double> cost_beta(count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (node[i] < 0) continue;
    const auto v = static_cast<std::size_t>(node[i]);
    cost_alpha[v] += p.data_cost(alpha, image[i]);
    cost_beta[v] += p.data_cost(beta, image[i]);
    count_data(ops);
    count_data(ops);
  }
  const double v_ab = p.smoothness(alpha, beta);
  count_smooth(ops);
  for_each_edge(f.width, f.height, [&](std::size_t a, std::size_t b) {
    const bool in_a = node[a] >= 0;
    const bool in_b = node[b] >= 0;
    if (in_a && in_b) {
      g.add_edge(node[a], node[b], v_ab, v_ab);
    } else if (in_a || in_b) {
      const std::size_t inside = in_a ? a : b;
      const std::size_t other = in_a ? b : a;
      const auto v = static_cast<std::size_t>(node[inside]);
      cost_alpha[v] += p.smoothness(alpha, f.labels[other]);
      cost_beta[v] += p.smoothness(beta, f.labels[other]);
      count_smooth(ops);
      count_smooth(ops);
    }
  });
  for (std::size_t v = 0; v < count; ++v) {
    const double m = std::min(cost_alpha[v], cost_beta[v]);
    g.add_terminal_weights(static_cast<FlowGraph::Node>(v), cost_beta[v] - m, cost_alpha[v] - m);
    if (ops) ops->adds += 2;
  }

  const MaxFlowResult cut = max_flow(g, ops);
  Labeling out = f;
  for (std::size_t i = 0; i < n; ++i) {
    if (node[i] >= 0) out.labels[i] = cut.side[static_cast<std::size_t>(node[i])] == CutSide::source ? alpha : beta;
  }
  return out;
}

MoveTrace alpha_expansion_trace(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops) {
  p.validate();
  p.require_metric();
  MoveTrace t;
  t.labeling = init;
  double current = energy(init, image, p, ops).total;
  t.energies.push_back(current);
  for (bool improved = true; improved;) {
    improved = false;
    ++t.cycles;
    for (std::size_t alpha = 0; alpha < p.num_labels(); ++alpha) {
      Labeling candidate = expansion_move(t.labeling, alpha, image, p, ops);
      const double e = energy(candidate, image, p, ops).total;
      if (e < current) {
        t.labeling = std::move(candidate);
        current = e;
        improved = true;
        ++t.accepted;
      }
      t.energies.push_back(current);
    }
  }
  return t;
}

Labeling alpha_expansion(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops) {
  return alpha_expansion_trace(image, p, init, ops).labeling;
}

MoveTrace alpha_beta_swap_trace(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops) {
  p.validate();
  MoveTrace t;
  t.labeling = init;
  double current = energy(init, image, p, ops).total;
  t.energies.push_back(current);
  for (bool improved = true; improved;) {
    improved = false;
    ++t.cycles;
    for (std::size_t alpha = 0; alpha < p.num_labels(); ++alpha) {
      for (std::size_t beta = alpha + 1; beta < p.num_labels(); ++beta) {
        Labeling candidate = swap_move(t.labeling, alpha, beta, image, p, ops);
        const double e = energy(candidate, image, p, ops).total;
        if (e < current) {
          t.labeling = std::move(candidate);
          current = e;
          improved = true;
          ++t.accepted;
        }
        t.energies.push_back(current);
      }
    }
  }
  return t;
}

Labeling alpha_beta_swap(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops) {
  return alpha_beta_swap_trace(image, p, init, ops).labeling;
}

Labeling nearest_labeling(const Tensor& image, const CrfParams& p) {
  if (image.rank() != 2) throw DimensionMismatch("image must be [H,W]");
  p.validate();
  Labeling f(image.dim(1), image.dim(0));
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const auto& v = p.label_values;
    // label_values is sorted: compare the two neighbours of the insertion point.
    const auto it = std::lower_bound(v.begin(), v.end(), image[i]);
    std::size_t best = static_cast<std::size_t>(std::distance(v.begin(), it));
    if (best == v.size()) {
      best = v.size() - 1;
    } else if (best > 0 && std::abs(v[best - 1] - image[i]) <= std::abs(v[best] - image[i])) {
      --best;
    }
    f.labels[i] = best;
  }
  return f;
}

Tensor render(const Labeling& f, const CrfParams& p) {
  Tensor out({f.height, f.width});
  for (std::size_t i = 0; i < f.labels.size(); ++i) out[i] = p.label_values.at(f.labels[i]);
  return out;
}

DenoiseResult denoise_detailed(const Tensor& image, const CrfParams& p, MoveSchedule schedule) {
  if (image.rank() != 2) throw DimensionMismatch(fmt::format("denoise needs [H,W], got {}", shape_string(image.shape())));
  for (double v : image.flat()) {
    if (!(v >= 0.0 && v <= 255.0)) throw BadParams(fmt::format("pixel value {} outside [0,255]", v));
  }
  DenoiseResult r;
  const Labeling init = nearest_labeling(image, p);
  r.labeling = alpha_expansion(image, p, init, &r.ops);
  if (schedule == MoveSchedule::expansion_then_swap) r.labeling = alpha_beta_swap(image, p, r.labeling, &r.ops);
  r.energy = energy(r.labeling, image, p).total;
  r.image = render(r.labeling, p);
  return r;
}

Tensor denoise(const Tensor& image, const CrfParams& p) { return denoise_detailed(image, p).image; }

}  // namespace pbnn
