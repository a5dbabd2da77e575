#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "pbnn/data.hpp"
#include "pbnn/errors.hpp"
#include "pbnn/graphcut.hpp"
#include "pbnn/metrics.hpp"

using namespace pbnn;

namespace {

constexpr auto S = FlowGraph::source;
constexpr auto T = FlowGraph::sink;

FlowGraph random_graph(Rng& rng, std::size_t max_nodes = 12) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(max_nodes));
  FlowGraph g(n);
  const std::size_t arcs = static_cast<std::size_t>(rng.uniform_int(4 * n + 1));
  for (std::size_t a = 0; a < arcs; ++a) {
    // endpoints drawn over nodes plus both terminals
    auto pick = [&] {
      const auto v = static_cast<FlowGraph::Node>(rng.uniform_int(n + 2));
      return v == static_cast<FlowGraph::Node>(n) ? S : v == static_cast<FlowGraph::Node>(n + 1) ? T : v;
    };
    const auto from = pick();
    const auto to = pick();
    if (from == to || from == T || to == S) continue;
    g.add_arc(from, to, static_cast<double>(rng.uniform_int(11)));
  }
  return g;
}

// Uniform 2x2 instance with intensities from a five-value grid.
Tensor grid_image(Rng& rng, std::size_t h, std::size_t w) {
  static const double values[] = {0, 60, 120, 180, 240};
  Tensor img({h, w});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = values[rng.uniform_int(5)];
  return img;
}

}  // namespace

TEST_CASE("max flow examples") {
  SUBCASE("single path bottleneck") {
    FlowGraph g(1);
    g.add_arc(S, 0, 3);
    g.add_arc(0, T, 2);
    const auto r = max_flow(g);
    CHECK(r.value == 2.0);
    // a stays reachable from the source through the unsaturated s->a arc
    CHECK(r.side[0] == CutSide::source);
  }
  SUBCASE("two-node network") {
    FlowGraph g(2);
    g.add_arc(S, 0, 3);
    g.add_arc(S, 1, 2);
    g.add_arc(0, 1, 1);
    g.add_arc(0, T, 2);
    g.add_arc(1, T, 3);
    CHECK(oracle::min_cut(g) == 5.0);
    const auto r = max_flow(g);
    CHECK(r.value == 5.0);
    CHECK(cut_capacity(g, r.side) == 5.0);
  }
  SUBCASE("disconnected terminals") {
    FlowGraph g(2);
    g.add_arc(S, 0, 4);
    g.add_arc(1, T, 4);
    CHECK(max_flow(g).value == 0.0);
  }
  SUBCASE("invalid capacities") {
    FlowGraph g(1);
    CHECK_THROWS_AS(g.add_arc(S, 0, -1), BadParams);
    CHECK_THROWS_AS(g.add_arc(S, 0, std::nan("")), BadParams);
    CHECK_THROWS_AS(g.add_arc(S, 5, 1), BadParams);
  }
}

TEST_CASE("max flow equals brute-force min cut on random graphs") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const FlowGraph g = random_graph(rng);
    const auto r = max_flow(g);
    CHECK(r.value == oracle::min_cut(g));
    CHECK(cut_capacity(g, r.side) == r.value);
    CHECK(max_flow(g).side == r.side);
  }
}

TEST_CASE("energy examples") {
  SUBCASE("exact fit") {
    const CrfParams p = CrfParams::uniform(4);
    const Tensor img({3, 3}, p.label_values[2]);
    const Energy e = energy(Labeling(3, 3, 2), img, p);
    CHECK(e.total == 0.0);
  }
  SUBCASE("1x2 enumeration") {
    CrfParams p;
    p.label_values = {0, 255};
    p.lambda = 10;
    p.smooth_trunc = 255;
    const Tensor img({1, 2}, {0, 255});
    auto lab = [](std::size_t a, std::size_t b) {
      Labeling f(2, 1);
      f.labels = {a, b};
      return f;
    };
    CHECK(energy(lab(0, 1), img, p).total == 2550.0);
    CHECK(energy(lab(0, 0), img, p).total == 65025.0);
    CHECK(energy(lab(1, 1), img, p).total == 65025.0);
    CHECK(energy(lab(1, 0), img, p).total == 65025.0 + 65025.0 + 2550.0);
  }
  SUBCASE("linear in lambda; decomposition exact") {
    Rng rng(102);
    CrfParams p = CrfParams::uniform(5, 3.0, 40.0);
    const Tensor img = grid_image(rng, 4, 5);
    Labeling f(5, 4);
    for (auto& l : f.labels) l = rng.uniform_int(5);
    const Energy a = energy(f, img, p);
    p.lambda *= 2;
    const Energy b = energy(f, img, p);
    CHECK(b.smooth == 2 * a.smooth);
    CHECK(b.data == a.data);
    CHECK(a.total == a.data + a.smooth);
    CHECK(a.total == oracle::energy(f.labels, 5, 4, img, CrfParams::uniform(5, 3.0, 40.0)));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(energy(Labeling(2, 2), Tensor({3, 2}), CrfParams::uniform(2)), DimensionMismatch);
  }
}

TEST_CASE("crf params validation") {
  CHECK_THROWS_AS(CrfParams::uniform(0), BadCrfParams);
  CrfParams p = CrfParams::uniform(3);
  p.label_values = {0, 100, 50};
  CHECK_THROWS_AS(p.validate(), BadCrfParams);
  p = CrfParams::uniform(3);
  p.lambda = -1;
  CHECK_THROWS_AS(p.require_metric(), NonMetricSmoothness);
  CHECK_NOTHROW(CrfParams::uniform(32, 8, 64).require_metric());
}

TEST_CASE("expansion and swap moves match enumeration on 2x2, K=3") {
  // All 5^4 images, a fixed initial labeling sweep and every alpha (or pair).
  CrfParams p;
  p.label_values = {0, 120, 240};
  p.lambda = 1.0;
  p.smooth_trunc = 150.0;
  const double values[] = {0, 60, 120, 180, 240};
  std::size_t checked = 0;
  for (int code = 0; code < 625; ++code) {
    Tensor img({2, 2});
    int c = code;
    for (std::size_t i = 0; i < 4; ++i, c /= 5) img[i] = values[c % 5];
    Labeling f(2, 2);
    for (std::size_t i = 0; i < 4; ++i) f.labels[i] = (static_cast<std::size_t>(code) + i) % 3;
    for (std::size_t alpha = 0; alpha < 3; ++alpha) {
      const auto best = oracle::best_expansion(f.labels, alpha, img, p);
      const Labeling g = expansion_move(f, alpha, img, p);
      CHECK(energy(g, img, p).total == best.energy);
      for (std::size_t beta = alpha + 1; beta < 3; ++beta) {
        const auto bs = oracle::best_swap(f.labels, alpha, beta, img, p);
        const Labeling h = swap_move(f, alpha, beta, img, p);
        CHECK(energy(h, img, p).total == bs.energy);
        if (bs.argmins.size() == 1) CHECK(h.labels == bs.argmins.front());
      }
      if (best.argmins.size() == 1) CHECK(g.labels == best.argmins.front());
      ++checked;
    }
  }
  CHECK(checked == 625 * 3);
}

TEST_CASE("lambda 0 decouples pixels") {
  Rng rng(103);
  CrfParams p = CrfParams::uniform(4, 0.0, 32.0);
  const Tensor img = grid_image(rng, 3, 4);
  Labeling f(4, 3);
  for (auto& l : f.labels) l = rng.uniform_int(4);
  const Labeling g = expansion_move(f, 2, img, p);
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const double keep = p.data_cost(f.labels[i], img[i]);
    const double take = p.data_cost(2, img[i]);
    if (take < keep) CHECK(g.labels[i] == 2);
    if (keep < take) CHECK(g.labels[i] == f.labels[i]);
  }
}

TEST_CASE("swap move special cases") {
  CrfParams p;
  p.label_values = {0, 255};
  p.lambda = 10;
  p.smooth_trunc = 255;
  const Tensor img({1, 2}, {0, 255});
  Labeling f(2, 1, 0);
  const Labeling g = swap_move(f, 0, 1, img, p);
  CHECK(g.labels == std::vector<std::size_t>{0, 1});
  CHECK(energy(g, img, p).total == 2550.0);
  CHECK_THROWS_AS(swap_move(f, 1, 1, img, p), SameLabels);
  const CrfParams p3 = CrfParams::uniform(3);
  CHECK(swap_move(Labeling(2, 1, 0), 1, 2, img, p3) == Labeling(2, 1, 0));
}

TEST_CASE("alpha expansion: bound, monotonicity and local optimality") {
  Rng rng(104);
  CrfParams p;
  p.label_values = {0, 120, 240};
  p.lambda = 2.0;
  p.smooth_trunc = 150.0;
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor img = grid_image(rng, 3, 3);
    const MoveTrace t = alpha_expansion_trace(img, p, nearest_labeling(img, p));
    for (std::size_t i = 1; i < t.energies.size(); ++i) CHECK(t.energies[i] <= t.energies[i - 1]);
    const double final_e = energy(t.labeling, img, p).total;
    const auto opt = oracle::global_minimum(img, p);
    CHECK(final_e <= 2.0 * opt.energy);
    for (std::size_t a = 0; a < 3; ++a) CHECK(oracle::best_expansion(t.labeling.labels, a, img, p).energy >= final_e);
  }
}

TEST_CASE("alpha expansion on noiseless piecewise-constant images") {
  Rng rng(105);
  CrfParams p;
  p.label_values = {0, 120, 240};
  p.lambda = 0.5;
  p.smooth_trunc = 150.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor img({3, 3});
    Labeling truth(3, 3);
    const std::size_t a = rng.uniform_int(3), b = rng.uniform_int(3);
    const std::size_t split_at = 1 + rng.uniform_int(2);
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) {
        truth.at(y, x) = x < split_at ? a : b;
        img(y, x) = p.label_values[truth.at(y, x)];
      }
    }
    const Labeling f = alpha_expansion(img, p, Labeling(3, 3, 0));
    CHECK(f == truth);
    CHECK(energy(f, img, p).total == oracle::global_minimum(img, p).energy);
    CHECK(energy(f, img, p).total == energy(truth, img, p).smooth);
  }
}

TEST_CASE("single label") {
  const CrfParams p = CrfParams::uniform(1);
  const Tensor img({2, 3}, {1, 50, 100, 150, 200, 250});
  const Labeling f = alpha_expansion(img, p, nearest_labeling(img, p));
  CHECK(f == Labeling(3, 2, 0));
}

TEST_CASE("alpha-beta swap converges without increasing energy") {
  Rng rng(106);
  const CrfParams p = CrfParams::uniform(4, 2.0, 100.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor img = grid_image(rng, 4, 4);
    const MoveTrace t = alpha_beta_swap_trace(img, p, nearest_labeling(img, p));
    for (std::size_t i = 1; i < t.energies.size(); ++i) CHECK(t.energies[i] <= t.energies[i - 1]);
  }
}

TEST_CASE("denoise") {
  const CrfParams p = CrfParams::uniform(32, 8.0, 64.0);
  SUBCASE("constant label image is a fixed point") {
    const Tensor img({12, 12}, p.label_values[7]);
    const DenoiseResult r = denoise_detailed(img, p);
    CHECK(r.image == img);
    CHECK(r.energy == 0.0);
    CHECK(r.ops.total() > 0);
  }
  SUBCASE("two-region image improves in SSIM; outputs are label values") {
    Tensor clean({32, 32});
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) clean(y, x) = x < 16 ? 64.0 : 192.0;
    }
    Rng rng(107);
    const Tensor noisy = add_gaussian_noise(clean, 20.0, rng);
    const Tensor out = denoise(noisy, p);
    CHECK(ssim(out, clean) > ssim(noisy, clean));
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(std::find(p.label_values.begin(), p.label_values.end(), out[i]) != p.label_values.end());
    }
    CHECK(denoise(noisy, p) == out);
  }
  SUBCASE("rejects out-of-range pixels") {
    CHECK_THROWS_AS(denoise(Tensor({2, 2}, 300.0), p), BadParams);
  }
}
