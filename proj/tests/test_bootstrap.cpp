#include <doctest.h>

#include <stdexcept>

#include "pbnn/bootstrap.hpp"
#include "pbnn/data.hpp"
#include "pbnn/errors.hpp"

using namespace pbnn;

namespace {

Dataset unlabeled(std::size_t n, std::uint64_t seed = 1) {
  Rng rng(seed);
  Dataset d{{}, DatasetRole::unlabeled};
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({2, 2});
    for (std::size_t j = 0; j < 4; ++j) x[j] = rng.uniform(0, 255);
    d.examples.push_back({x, {}, LabelSource::imputed});
  }
  return d;
}

Dataset tagged(std::size_t n, DatasetRole role, LabelSource src, double base) {
  Dataset d{{}, role};
  for (std::size_t i = 0; i < n; ++i) {
    d.examples.push_back({Tensor({1}, base + static_cast<double>(i)), Tensor({1}, 0.0), src});
  }
  return d;
}

const BlackBoxPipeline identity("identity", [](const Tensor& x) { return PipelineEvaluation{x, 1}; });

ExperimentConfig tiny_denoise() {
  ExperimentConfig cfg;
  cfg.task = Task::denoise;
  cfg.denoise.image_size = 16;
  cfg.denoise.patch_size = 16;
  cfg.denoise.train_images = 8;
  cfg.denoise.test_images = 2;
  cfg.denoise.crf = CrfParams::uniform(8, 8.0, 64.0);
  cfg.denoise.channels = 4;
  cfg.denoise.kernel = 3;
  cfg.denoise.depths = {2, 4};
  cfg.denoise.sweep_depth = 2;
  cfg.denoise.sgd = {0.05, 0.9, 4, 2, 0};
  cfg.ratios = {0.25, 1.0};
  return cfg;
}

ExperimentConfig tiny_classify() {
  ExperimentConfig cfg;
  cfg.task = Task::classify;
  cfg.classify.num_classes = 2;
  cfg.classify.image_size = 8;
  cfg.classify.train_count = 40;
  cfg.classify.test_count = 10;
  cfg.classify.teacher = {"pipeline", 2, {4, 2}};
  cfg.classify.students = {{"student-a", 2, {4, 2}}, {"student-b", 3, {2}}};
  cfg.classify.teacher_sgd = {0.05, 0.9, 8, 2, 0};
  cfg.classify.student_sgd = {0.05, 0.9, 8, 2, 0};
  cfg.ratios = {0.1, 1.0};
  return cfg;
}

}  // namespace

TEST_CASE("impute labels") {
  const Dataset u = unlabeled(7);
  SUBCASE("identity pipeline") {
    ImputeStats stats;
    const Dataset s = impute_labels(identity, u, 1, &stats);
    CHECK(s.role == DatasetRole::imputed);
    REQUIRE(s.size() == u.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].target_tensor() == u[i].input);
      CHECK(s[i].source == LabelSource::imputed);
    }
    CHECK(stats.flops == 7);
  }
  SUBCASE("constant pipeline") {
    const BlackBoxPipeline constant("c", [](const Tensor&) { return PipelineEvaluation{3, 0}; });
    for (const auto& ex : impute_labels(constant, u).examples) CHECK(ex.target_class() == 3);
  }
  SUBCASE("thread count does not change the result") {
    const BlackBoxPipeline square("sq", [](const Tensor& x) {
      return PipelineEvaluation{Tensor(x.shape(), Eigen::VectorXd(x.values().array().square())), 4};
    });
    const Dataset a = impute_labels(square, u, 1);
    const Dataset b = impute_labels(square, u, 3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].target_tensor() == b[i].target_tensor());
  }
  SUBCASE("failures carry the index") {
    int calls = 0;
    const BlackBoxPipeline flaky("flaky", [&calls](const Tensor& x) {
      if (calls++ == 4) throw std::runtime_error("boom");
      return PipelineEvaluation{x, 0};
    });
    try {
      impute_labels(flaky, u);
      FAIL("expected a failure");
    } catch (const PipelineEvaluationFailure& e) {
      CHECK(e.index() == 4);
    }
  }
  SUBCASE("labelled input is rejected") {
    CHECK_THROWS_AS(impute_labels(identity, tagged(2, DatasetRole::ground_truth, LabelSource::ground_truth, 0)),
                    BadParams);
  }
}

TEST_CASE("denoise pipeline labels equal direct graph-cut outputs") {
  const CrfParams p = CrfParams::uniform(16, 8.0, 64.0);
  Rng rng(401);
  const auto clean = synth_shapes(2, 24, 3, rng);
  const auto patches = sample_patches(clean, 12, 5, rng);
  Dataset u{{}, DatasetRole::unlabeled};
  for (const auto& x : patches) u.examples.push_back({add_gaussian_noise(x, 20.0, rng), {}, LabelSource::imputed});
  ImputeStats stats;
  const Dataset s = impute_labels(make_denoise_pipeline(p), u, 2, &stats);
  std::uint64_t ops = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const DenoiseResult r = denoise_detailed(u[i].input, p);
    CHECK(s[i].target_tensor() == r.image);
    ops += r.ops.total();
  }
  CHECK(stats.flops == ops);
}

TEST_CASE("ground truth count rounding") {
  CHECK(ground_truth_count(1e-4, 20000) == 2);
  CHECK(ground_truth_count(0.5, 3) == 2);
  CHECK(ground_truth_count(0.0, 10) == 0);
  CHECK(ground_truth_count(1.0, 10) == 10);
  CHECK_THROWS_AS(ground_truth_count(1.5, 10), BadParams);
}

TEST_CASE("mix datasets") {
  const Dataset l = tagged(30, DatasetRole::ground_truth, LabelSource::ground_truth, 0);
  const Dataset s = tagged(30, DatasetRole::imputed, LabelSource::imputed, 1000);
  auto count_gt = [](const Dataset& d) { return count_source(d, LabelSource::ground_truth); };

  const Dataset all_gt = mix_datasets(l, s, {1.0, 20, 1});
  CHECK(all_gt.size() == 20);
  CHECK(count_gt(all_gt) == 20);
  const Dataset all_imp = mix_datasets(l, s, {0.0, 20, 1});
  CHECK(count_gt(all_imp) == 0);
  CHECK(all_imp.role == DatasetRole::mixed);
  for (double x : {0.1, 0.33, 0.5, 0.9}) {
    const Dataset m = mix_datasets(l, s, {x, 25, 7});
    CHECK(m.size() == 25);
    CHECK(count_gt(m) == ground_truth_count(x, 25));
    for (const auto& ex : m.examples) CHECK((ex.input[0] >= 1000) == (ex.source == LabelSource::imputed));
  }
  const Dataset a = mix_datasets(l, s, {0.4, 20, 9});
  const Dataset b = mix_datasets(l, s, {0.4, 20, 9});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].input == b[i].input);
  CHECK_THROWS_AS(mix_datasets(l, s, {1.0, 31, 1}), InsufficientGroundTruth);
  CHECK_THROWS_AS(mix_datasets(l, s, {0.0, 31, 1}), InsufficientImputed);

  Dataset big_l = tagged(5, DatasetRole::ground_truth, LabelSource::ground_truth, 0);
  Dataset big_s = tagged(20000, DatasetRole::imputed, LabelSource::imputed, 1e6);
  const Dataset m = mix_datasets(big_l, big_s, {1e-4, 20000, 3});
  CHECK(count_gt(m) == 2);
  CHECK(count_source(m, LabelSource::imputed) == 19998);
}

TEST_CASE("a teacher agrees with its own imputed labels") {
  Rng rng(402);
  Dataset d = synth_classification(40, 2, 8, rng);
  auto net = std::make_shared<Network>(build_target_classifier({1, 8, 8}, 2, 2, {4, 2}, 3, 5));
  Dataset scaled{{}, DatasetRole::ground_truth};
  for (const auto& ex : d.examples) scaled.examples.push_back({to_network_input(ex.input), ex.target, ex.source});
  train(*net, scaled, LossKind::softmax_xent, {0.05, 0.9, 8, 2, 1});
  const BlackBoxPipeline teacher = make_classifier_pipeline(net);
  const Dataset s = impute_labels(teacher, strip_targets(d));
  std::vector<int> imputed, predicted;
  for (std::size_t i = 0; i < s.size(); ++i) {
    imputed.push_back(s[i].target_class());
    predicted.push_back(std::get<int>(teacher(d[i].input)));
  }
  CHECK(accuracy(predicted, imputed) == 1.0);
}

TEST_CASE("average rows") {
  const std::vector<MetricRow> a{{"t", "m", 0.5, "ssim", 0.2, 10}};
  const std::vector<MetricRow> b{{"t", "m", 0.5, "ssim", 0.4, 20}};
  const auto avg = average_rows({a, b});
  CHECK(avg[0].value == doctest::Approx(0.3));
  CHECK(avg[0].flops == 15);
  const std::vector<MetricRow> c{{"t", "other", 0.5, "ssim", 0.4, 20}};
  CHECK_THROWS_AS(average_rows({a, c}), BadParams);
}

TEST_CASE("network scaling helpers") {
  const Tensor img({2, 2}, {0, 51, 255, 102});
  const Tensor x = to_network_input(img);
  CHECK(x.shape() == Shape{1, 2, 2});
  CHECK(x[2] == 1.0);
  CHECK(from_network_output(x) == img);
  CHECK(from_network_output(Tensor({1, 1, 2}, {-1, 2})) == Tensor({1, 2}, {0, 255}));
}

TEST_CASE("denoise experiment rows are deterministic") {
  const ExperimentConfig cfg = tiny_denoise();
  const auto rows = run_denoise_experiment(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "noisy_input");
  CHECK(rows[1].method == "pipeline");
  CHECK(rows[2].method == "nn-skip-2");
  CHECK(rows[3].method == "nn-skip-4");
  CHECK(rows[1].flops > 0);
  CHECK(rows[2].flops < rows[3].flops);
  CHECK(to_csv(run_denoise_experiment(cfg)) == to_csv(rows));
  ExperimentConfig threaded = cfg;
  threaded.threads = 3;
  CHECK(to_csv(run_denoise_experiment(threaded)) == to_csv(rows));
}

TEST_CASE("denoise sweep rows") {
  ExperimentConfig cfg = tiny_denoise();
  const auto rows = run_ratio_sweep(cfg, Task::denoise);
  REQUIRE(rows.size() == 5);  // 2 ratios x 2 methods + pipeline
  CHECK(rows[0].method == "gt_only");
  CHECK(rows[1].method == "bootstrapped");
  CHECK(*rows[2].ratio_x == 1.0);
  CHECK(rows[4].method == "pipeline");
  CHECK_FALSE(rows[4].ratio_x.has_value());
  cfg.ratios = {1.5};
  CHECK_THROWS_AS(run_ratio_sweep(cfg, Task::denoise), BadParams);
}

TEST_CASE("classify experiment and sweep") {
  ExperimentConfig cfg = tiny_classify();
  const auto rows = run_classify_experiment(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "pipeline");
  CHECK(rows[1].method == "pipeline_train");
  CHECK(rows[2].method == "student-a");
  CHECK(rows[3].method == "student-b");
  for (const auto& r : rows) {
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
  CHECK(to_csv(run_classify_experiment(cfg)) == to_csv(rows));

  const auto sweep = run_ratio_sweep(cfg, Task::classify);
  CHECK(sweep.size() == 5);

  cfg.classify.teacher_data = TeacherData::all;
  CHECK(run_classify_experiment(cfg).size() == 4);

  cfg.seeds = {1, 2};
  CHECK(run_classify_experiment(cfg).size() == 4);
}
