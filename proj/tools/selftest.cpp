#include "selftest.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>

#include "oracles/oracles.hpp"
#include "pbnn/data.hpp"
#include "pbnn/layers.hpp"
#include "pbnn/metrics.hpp"
#include "pbnn/network.hpp"

namespace pbnn::cli {

namespace {

using Failure = std::optional<std::string>;

double dot(const Tensor& a, const Tensor& b) { return a.values().dot(b.values()); }

Failure check_max_flow() {
  Rng rng(1001);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.uniform_int(10);
    FlowGraph g(n);
    for (std::size_t a = 0; a < 3 * n; ++a) {
      const auto from = static_cast<FlowGraph::Node>(rng.uniform_int(n + 1)) - 1;  // -1 is the source
      auto to = static_cast<FlowGraph::Node>(rng.uniform_int(n + 1));
      if (to == static_cast<FlowGraph::Node>(n)) to = FlowGraph::sink;
      if (from == to) continue;
      g.add_arc(from, to, static_cast<double>(rng.uniform_int(11)));
    }
    const double got = max_flow(g).value;
    const double want = oracle::min_cut(g);
    if (got != want) return fmt::format("graph {}: flow {} vs brute-force cut {}", t, got, want);
  }
  return std::nullopt;
}

Failure check_moves() {
  Rng rng(1002);
  CrfParams p;
  p.label_values = {0, 120, 240};
  p.lambda = 1.0;
  p.smooth_trunc = 150.0;
  const double grid[] = {0, 60, 120, 180, 240};
  for (int t = 0; t < 100; ++t) {
    Tensor img({2, 2});
    Labeling f(2, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      img[i] = grid[rng.uniform_int(5)];
      f.labels[i] = rng.uniform_int(3);
    }
    const std::size_t alpha = rng.uniform_int(3);
    const double e = energy(expansion_move(f, alpha, img, p), img, p).total;
    const double want = oracle::best_expansion(f.labels, alpha, img, p).energy;
    if (e != want) return fmt::format("expansion instance {}: {} vs {}", t, e, want);
    const std::size_t beta = (alpha + 1 + rng.uniform_int(2)) % 3;
    const double es = energy(swap_move(f, alpha, beta, img, p), img, p).total;
    const double ws = oracle::best_swap(f.labels, alpha, beta, img, p).energy;
    if (es != ws) return fmt::format("swap instance {}: {} vs {}", t, es, ws);
  }
  return std::nullopt;
}

Failure check_gradients() {
  Rng rng(1003);
  auto fail_if = [](double err, const char* what) -> Failure {
    if (!(err < 1e-4)) return fmt::format("{} relative error {:.3g}", what, err);
    return std::nullopt;
  };
  Layer conv = Layer::conv2d(2, 3, 3);
  conv.weights = oracle::random_tensor(conv.weights.shape(), rng);
  conv.bias = oracle::random_tensor(conv.bias.shape(), rng);
  const Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng);
  const Tensor r = oracle::random_tensor({1, 3, 4, 4}, rng);
  const LayerGrads g = conv2d_backward(x, conv, r);
  auto conv_w = [&](const Tensor& w) {
    Layer m = conv;
    m.weights = w;
    return dot(conv2d_forward(x, m), r);
  };
  if (auto f = fail_if(oracle::relative_error(g.weights, oracle::numeric_gradient(conv_w, conv.weights)), "conv2d"))
    return f;

  Layer fc = Layer::fully_connected(5, 3);
  fc.weights = oracle::random_tensor(fc.weights.shape(), rng);
  const Tensor xf = oracle::random_tensor({2, 5}, rng);
  const Tensor rf = oracle::random_tensor({2, 3}, rng);
  auto fc_x = [&](const Tensor& t) { return dot(fc_forward(t, fc), rf); };
  if (auto f = fail_if(oracle::relative_error(fc_backward(xf, fc, rf).input, oracle::numeric_gradient(fc_x, xf)),
                       "fully-connected"))
    return f;

  const Tensor z = oracle::random_tensor({3, 4}, rng, -2, 2);
  const std::vector<int> y{0, 3, 1};
  auto xent = [&](const Tensor& t) { return softmax_xent(t, y).loss; };
  if (auto f = fail_if(oracle::relative_error(softmax_xent(z, y).grad, oracle::numeric_gradient(xent, z)),
                       "softmax cross-entropy"))
    return f;

  const Network net = build_skip_autoencoder(4, 2, 1, 3, 5);
  const Tensor xa = oracle::random_tensor({1, 1, 5, 5}, rng);
  const Tensor ra = oracle::random_tensor({1, 1, 5, 5}, rng);
  ForwardCache cache;
  network_forward(net, xa, &cache);
  auto ae = [&](const Tensor& t) { return dot(network_forward(net, t), ra); };
  return fail_if(oracle::relative_error(network_backward(net, cache, ra).input, oracle::numeric_gradient(ae, xa)),
                 "skip autoencoder");
}

Failure check_ssim(bool sabotage) {
  SsimConfig cfg;
  if (sabotage) cfg.k1 = 0.02;
  Rng rng(1004);
  for (int t = 0; t < 5; ++t) {
    Tensor a({16, 16}), b({16, 16});
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::floor(rng.uniform(0, 256));
      b[i] = std::floor(rng.uniform(0, 256));
    }
    if (ssim(a, a, cfg) != 1.0) return fmt::format("pair {}: ssim(x, x) != 1", t);
    const double got = ssim(a, b, cfg), want = oracle::ssim(a, b);
    if (std::abs(got - want) > 1e-9) return fmt::format("pair {}: {} vs naive {}", t, got, want);
  }
  const double c1 = 6.5025;
  const double closed = c1 / (255.0 * 255.0 + c1);
  const double got = ssim(Tensor({12, 12}, 0.0), Tensor({12, 12}, 255.0), cfg);
  if (std::abs(got - closed) > 1e-9) return fmt::format("constant images: {} vs {}", got, closed);
  return std::nullopt;
}

Failure check_pgm() {
  Rng rng(1005);
  Tensor img({7, 9});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(rng.uniform_int(256));
  if (!(decode_pgm(encode_pgm(img)) == img)) return std::string("round trip changed pixels");
  return std::nullopt;
}

}  // namespace

SelftestResult run_selftest(const SelftestOptions& opts, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const bool sabotage_ssim = std::find(opts.faults.begin(), opts.faults.end(), "ssim") != opts.faults.end();
  const std::vector<std::pair<std::string, std::function<Failure()>>> checks{
      {"max_flow", check_max_flow},
      {"moves", check_moves},
      {"gradients", check_gradients},
      {"ssim", [&] { return check_ssim(sabotage_ssim); }},
      {"pgm", check_pgm},
  };
  SelftestResult result;
  for (const auto& [name, fn] : checks) {
    Failure f;
    try {
      f = fn();
    } catch (const std::exception& e) {
      f = fmt::format("threw: {}", e.what());
    }
    if (f) {
      result.failed.push_back(name);
      fmt::print(out, "FAIL {}: {}\n", name, *f);
    } else {
      fmt::print(out, "PASS {}\n", name);
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace pbnn::cli
