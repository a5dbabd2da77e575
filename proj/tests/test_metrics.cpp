#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles/oracles.hpp"
#include "pbnn/errors.hpp"
#include "pbnn/metrics.hpp"
#include "pbnn/network.hpp"

using namespace pbnn;

namespace {

Tensor random_image(Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::floor(rng.uniform(0, 256));
  return t;
}

Tensor transpose(const Tensor& t) {
  Tensor out({t.dim(1), t.dim(0)});
  for (std::size_t y = 0; y < t.dim(0); ++y) {
    for (std::size_t x = 0; x < t.dim(1); ++x) out(x, y) = t(y, x);
  }
  return out;
}

}  // namespace

TEST_CASE("ssim window") {
  const SsimConfig cfg;
  const RowMatrix w = cfg.window_weights();
  CHECK(w.rows() == 11);
  CHECK(std::abs(w.sum() - 1.0) < 1e-12);
  CHECK(w.minCoeff() > 0.0);
  CHECK(cfg.c1() == doctest::Approx(6.5025));
  CHECK(cfg.c2() == doctest::Approx(58.5225));
}

TEST_CASE("ssim of an image with itself is exactly one") {
  Rng rng(201);
  for (int i = 0; i < 50; ++i) {
    const Tensor x = random_image(rng, 11 + rng.uniform_int(10), 11 + rng.uniform_int(10));
    CHECK(ssim(x, x) == 1.0);
  }
}

TEST_CASE("ssim closed form on constant images") {
  const double c1 = SsimConfig{}.c1();
  const double expected = c1 / (255.0 * 255.0 + c1);
  CHECK(std::abs(ssim(Tensor({16, 16}, 0.0), Tensor({16, 16}, 255.0)) - expected) < 1e-9);
  CHECK(expected == doctest::Approx(9.9999e-5).epsilon(1e-4));
}

TEST_CASE("ssim properties against the naive oracle") {
  Rng rng(202);
  for (int i = 0; i < 10; ++i) {
    const Tensor a = random_image(rng, 16, 16);
    const Tensor b = random_image(rng, 16, 16);
    const double s = ssim(a, b);
    CHECK(std::abs(s - oracle::ssim(a, b)) < 1e-9);
    CHECK(s <= 1.0);
    CHECK(s == ssim(b, a));
    CHECK(std::abs(ssim(transpose(a), transpose(b)) - s) < 1e-12);
  }
}

TEST_CASE("ssim can be negative") {
  Tensor a({12, 12}), b({12, 12});
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = (i % 2) ? 255.0 : 0.0;
    b[i] = (i % 2) ? 0.0 : 255.0;
  }
  CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim errors") {
  CHECK_THROWS_AS(ssim(Tensor({12, 12}), Tensor({12, 13})), ShapeError);
  CHECK_THROWS_AS(ssim(Tensor({10, 12}), Tensor({10, 12})), TooSmall);
  CHECK_THROWS_AS(ssim(Tensor({1, 12, 12}), Tensor({1, 12, 12})), ShapeError);
  CHECK_THROWS_AS(mean_ssim(std::vector<Tensor>{}, std::vector<Tensor>{}), EmptyInput);
}

TEST_CASE("psnr") {
  const Tensor a({4, 4}, 10.0);
  CHECK(psnr(a, Tensor({4, 4}, 11.0)) == doctest::Approx(10 * std::log10(65025.0)));
  CHECK(psnr(a, Tensor({4, 4}, 11.0)) == doctest::Approx(48.13).epsilon(1e-3));
  CHECK(std::isinf(psnr(a, a)));
  // MSE 2 vs MSE 1
  CHECK(psnr(a, Tensor({4, 4}, 11.0)) - psnr(a, Tensor({4, 4}, 10.0 + std::sqrt(2.0))) ==
        doctest::Approx(10 * std::log10(2.0)));
}

TEST_CASE("accuracy") {
  const std::vector<int> l{0, 1, 2, 3};
  CHECK(accuracy(l, l) == 1.0);
  CHECK(accuracy(std::vector<int>{1, 2, 3, 0}, l) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 0, 0}, l) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), EmptyInput);
  CHECK_THROWS_AS(accuracy(std::vector<int>{1}, l), ShapeError);
  // permutation invariance
  Rng rng(203);
  std::vector<int> p(50), y(50);
  for (int i = 0; i < 50; ++i) {
    p[i] = static_cast<int>(rng.uniform_int(3));
    y[i] = static_cast<int>(rng.uniform_int(3));
  }
  const double before = accuracy(p, y);
  std::vector<std::size_t> idx(50);
  for (std::size_t i = 0; i < 50; ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<int> pp, yy;
  for (auto i : idx) {
    pp.push_back(p[i]);
    yy.push_back(y[i]);
  }
  CHECK(accuracy(pp, yy) == before);
}

TEST_CASE("flops report and CSV") {
  CHECK(to_csv(flops_report({})) == "task,method,ratio_x,metric,value,flops\n");

  const MetricRow row{"denoise", "bootstrapped", 0.1 + 0.2, "ssim", 1.0 / 3.0, 123456789012345ULL};
  const auto back = parse_csv(to_csv({row}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].task == row.task);
  CHECK(back[0].method == row.method);
  CHECK(*back[0].ratio_x == *row.ratio_x);
  CHECK(back[0].value == row.value);
  CHECK(back[0].flops == row.flops);
  CHECK(to_csv(back) == to_csv({row}));

  const MetricRow no_ratio{"denoise", "pipeline", std::nullopt, "ssim", 0.5, 7};
  CHECK(to_csv({no_ratio}).find("denoise,pipeline,,ssim,0.5,7\n") != std::string::npos);
  CHECK_THROWS_AS(to_csv({{"a,b", "m", std::nullopt, "ssim", 0, 0}}), CsvError);
  CHECK_THROWS_AS(parse_csv("wrong\n"), CsvError);

  const auto sorted = flops_report({{"denoise", "gt_only", 1.0, "ssim", 0, 0},
                                    {"classify", "pipeline", std::nullopt, "accuracy", 0, 0},
                                    {"denoise", "gt_only", 0.5, "ssim", 0, 0},
                                    {"denoise", "bootstrapped", 0.5, "ssim", 0, 0}});
  CHECK(sorted[0].task == "classify");
  CHECK(sorted[1].method == "bootstrapped");
  CHECK(*sorted[2].ratio_x == 0.5);
  CHECK(*sorted[3].ratio_x == 1.0);
}

TEST_CASE("deeper networks carry larger flops in the report") {
  std::vector<MetricRow> rows;
  for (std::size_t depth : {4, 6, 8}) {
    rows.push_back({"denoise", "nn-skip-" + std::to_string(depth), std::nullopt, "ssim", 0.0,
                    count_flops(build_skip_autoencoder(depth, 8, 1), {1, 1, 32, 32})});
  }
  const auto sorted = flops_report(rows);
  CHECK(sorted[0].flops < sorted[1].flops);
  CHECK(sorted[1].flops < sorted[2].flops);
}
