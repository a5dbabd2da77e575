#include "pbnn/bootstrap.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "pbnn/data.hpp"
#include "pbnn/rng.hpp"

namespace pbnn {

Tensor to_network_input(const Tensor& image) {
  Shape shape = image.shape();
  if (shape.size() == 2) shape.insert(shape.begin(), 1);
  return Tensor(std::move(shape), Eigen::VectorXd(image.values() / 255.0));
}

Tensor from_network_output(const Tensor& output) {
  Shape shape = output.shape();
  if (shape.size() == 3 && shape[0] == 1) shape.erase(shape.begin());
  return Tensor(std::move(shape), Eigen::VectorXd((output.values() * 255.0).cwiseMax(0.0).cwiseMin(255.0)));
}

BlackBoxPipeline make_denoise_pipeline(CrfParams params) {
  params.validate();
  params.require_metric();
  return BlackBoxPipeline("pipeline", [params](const Tensor& x) {
    DenoiseResult r = denoise_detailed(x, params);
    return PipelineEvaluation{std::move(r.image), r.ops.total()};
  });
}

BlackBoxPipeline make_classifier_pipeline(std::shared_ptr<const Network> net, std::string name) {
  if (!net) throw BadArchitecture("classifier pipeline needs a network");
  return BlackBoxPipeline(std::move(name), [net](const Tensor& x) {
    Tensor batch = to_network_input(x);
    Shape shape = batch.shape();
    shape.insert(shape.begin(), 1);
    std::uint64_t flops = 0;
    ForwardCache cache;
    const Tensor logits = network_forward(*net, batch.reshaped(shape), &cache);
    for (auto f : cache.flops) flops += f;
    return PipelineEvaluation{argmax_rows(logits).front(), flops};
  });
}

Dataset impute_labels(const BlackBoxPipeline& pipeline, const Dataset& unlabeled, std::size_t threads,
                      ImputeStats* stats) {
  if (unlabeled.role != DatasetRole::unlabeled) {
    throw BadParams(fmt::format("impute_labels needs an unlabeled dataset, got role {}", to_string(unlabeled.role)));
  }
  const std::size_t n = unlabeled.size();
  std::vector<PipelineEvaluation> results(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      try {
        results[i] = pipeline.evaluate(unlabeled.examples[i].input);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  Dataset out{{}, DatasetRole::imputed};
  out.examples.reserve(n);
  std::uint64_t flops = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw PipelineEvaluationFailure(i, e.what());
      } catch (...) {
        throw PipelineEvaluationFailure(i, "unknown error");
      }
    }
    flops += results[i].flops;
    out.examples.push_back({unlabeled.examples[i].input, std::move(results[i].output), LabelSource::imputed});
  }
  if (stats) stats->flops = flops;
  return out;
}

std::size_t ground_truth_count(double ratio_x, std::size_t total_n) {
  if (!(ratio_x >= 0.0 && ratio_x <= 1.0)) throw BadParams(fmt::format("ratio_x {} outside [0,1]", ratio_x));
  return static_cast<std::size_t>(std::floor(ratio_x * static_cast<double>(total_n) + 0.5));
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t available, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(available);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(count);
  return idx;
}

}  // namespace

Dataset mix_datasets(const Dataset& ground_truth, const Dataset& imputed, const MixConfig& cfg) {
  const std::size_t n_gt = ground_truth_count(cfg.ratio_x, cfg.total_n);
  const std::size_t n_imp = cfg.total_n - n_gt;
  if (n_gt > ground_truth.size()) {
    throw InsufficientGroundTruth(
        fmt::format("need {} ground-truth examples, only {} available", n_gt, ground_truth.size()));
  }
  if (n_imp > imputed.size()) {
    throw InsufficientImputed(fmt::format("need {} imputed examples, only {} available", n_imp, imputed.size()));
  }
  Rng rng(cfg.seed);
  Rng gt_rng = rng.derive(1);
  Rng imp_rng = rng.derive(2);
  Dataset out{{}, DatasetRole::mixed};
  out.examples.reserve(cfg.total_n);
  for (std::size_t i : sample_indices(ground_truth.size(), n_gt, gt_rng)) {
    auto ex = ground_truth.examples[i];
    ex.source = LabelSource::ground_truth;
    out.examples.push_back(std::move(ex));
  }
  for (std::size_t i : sample_indices(imputed.size(), n_imp, imp_rng)) {
    auto ex = imputed.examples[i];
    ex.source = LabelSource::imputed;
    out.examples.push_back(std::move(ex));
  }
  return out;
}

double DenoiseSettings::noise_sigma() const { return sigma_is_variance ? std::sqrt(sigma) : sigma; }

std::vector<MetricRow> average_rows(const std::vector<std::vector<MetricRow>>& runs) {
  if (runs.empty()) return {};
  std::vector<MetricRow> out = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].size() != out.size()) throw BadParams("runs to average have different row counts");
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& row = runs[r][i];
      if (row.task != out[i].task || row.method != out[i].method || row.ratio_x != out[i].ratio_x) {
        throw BadParams("runs to average have different row layouts");
      }
    }
  }
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double value = 0.0;
    long double flops = 0.0;
    for (const auto& run : runs) {
      value += run[i].value;
      flops += static_cast<long double>(run[i].flops);
    }
    out[i].value = value / n;
    out[i].flops = static_cast<std::uint64_t>(std::llround(flops / static_cast<long double>(n)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// denoising

namespace {

struct DenoiseData {
  Dataset train;  // noisy input, clean target
  Dataset test;
};

// Seed streams: 1/2 clean train/test images, 3/4 patch positions, 5/6 noise.
DenoiseData make_denoise_data(const DenoiseSettings& s, std::uint64_t seed) {
  const Rng root(seed);
  Rng train_rng = root.derive(1);
  Rng test_rng = root.derive(2);
  std::vector<Tensor> train_clean = synth_shapes(s.train_images, s.image_size, s.levels, train_rng);
  std::vector<Tensor> test_clean = synth_shapes(s.test_images, s.image_size, s.levels, test_rng);
  if (s.train_patches > 0) {
    Rng r = root.derive(3);
    train_clean = sample_patches(train_clean, s.patch_size, s.train_patches, r);
  }
  if (s.test_patches > 0) {
    Rng r = root.derive(4);
    test_clean = sample_patches(test_clean, s.patch_size, s.test_patches, r);
  }
  auto build = [&](const std::vector<Tensor>& clean, std::uint64_t stream, DatasetRole role) {
    Dataset d{{}, role};
    const Rng noise_root = root.derive(stream);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      Rng r = noise_root.derive(i);
      d.examples.push_back({add_gaussian_noise(clean[i], s.noise_sigma(), r), clean[i], LabelSource::ground_truth});
    }
    return d;
  };
  return {build(train_clean, 5, DatasetRole::ground_truth), build(test_clean, 6, DatasetRole::test)};
}

// Image-space dataset -> network-space regression set.
Dataset to_regression_set(const Dataset& d) {
  Dataset out{{}, d.role};
  out.examples.reserve(d.size());
  for (const auto& ex : d.examples) {
    out.examples.push_back({to_network_input(ex.input), to_network_input(ex.target_tensor()), ex.source});
  }
  return out;
}

std::vector<Tensor> inputs_of(const Dataset& d) {
  std::vector<Tensor> v;
  v.reserve(d.size());
  for (const auto& ex : d.examples) v.push_back(ex.input);
  return v;
}

std::vector<Tensor> clean_of(const Dataset& d) {
  std::vector<Tensor> v;
  v.reserve(d.size());
  for (const auto& ex : d.examples) v.push_back(ex.target_tensor());
  return v;
}

double surrogate_ssim(const Network& net, const Dataset& test) {
  std::vector<Tensor> inputs;
  for (const auto& ex : test.examples) inputs.push_back(to_network_input(ex.input));
  std::vector<Tensor> outputs = predict(net, inputs, 16);
  for (auto& o : outputs) o = from_network_output(o);
  return mean_ssim(outputs, clean_of(test));
}

struct PipelineScore {
  double ssim = 0.0;
  std::uint64_t flops_per_image = 0;
};

PipelineScore pipeline_ssim(const BlackBoxPipeline& pipeline, const Dataset& test, std::size_t threads) {
  ImputeStats stats;
  const Dataset labeled = impute_labels(pipeline, strip_targets(test), threads, &stats);
  return {mean_ssim(clean_of(labeled), clean_of(test)), stats.flops / std::max<std::size_t>(test.size(), 1)};
}

SgdConfig with_seed(SgdConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

std::vector<MetricRow> denoise_experiment_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  const DenoiseSettings& s = cfg.denoise;
  const DenoiseData data = make_denoise_data(s, seed);
  const BlackBoxPipeline pipeline = make_denoise_pipeline(s.crf);
  const Dataset imputed = impute_labels(pipeline, strip_targets(data.train), cfg.threads);
  const Dataset train_set = to_regression_set(imputed);

  std::vector<MetricRow> rows;
  rows.push_back({"denoise", "noisy_input", std::nullopt, "ssim",
                  mean_ssim(inputs_of(data.test), clean_of(data.test)), 0});
  const PipelineScore ps = pipeline_ssim(pipeline, data.test, cfg.threads);
  rows.push_back({"denoise", "pipeline", std::nullopt, "ssim", ps.ssim, ps.flops_per_image});

  const Rng root(seed);
  const Shape one{1, 1, s.eval_size(), s.eval_size()};
  for (std::size_t depth : s.depths) {
    Network net = build_skip_autoencoder(depth, s.channels, 1, s.kernel, root.derive(100 + depth).seed());
    train(net, train_set, LossKind::mse, with_seed(s.sgd, root.derive(200 + depth).seed()));
    rows.push_back({"denoise", fmt::format("nn-skip-{}", depth), std::nullopt, "ssim", surrogate_ssim(net, data.test),
                    count_flops(net, one)});
  }
  return rows;
}

std::vector<double> sweep_ratios(const ExperimentConfig& cfg, Task task) {
  return cfg.ratios.empty() ? default_ratios(task) : cfg.ratios;
}

std::vector<MetricRow> denoise_sweep_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  const DenoiseSettings& s = cfg.denoise;
  const DenoiseData data = make_denoise_data(s, seed);
  const BlackBoxPipeline pipeline = make_denoise_pipeline(s.crf);
  const Dataset imputed = impute_labels(pipeline, strip_targets(data.train), cfg.threads);
  const Dataset gt_set = to_regression_set(data.train);
  const Dataset imp_set = to_regression_set(imputed);
  const std::size_t total = data.train.size();
  const Rng root(seed);

  const std::vector<double> ratios = sweep_ratios(cfg, Task::denoise);
  std::vector<MetricRow> rows;
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    const double x = ratios[r];
    const std::size_t n_gt = ground_truth_count(x, total);
    // Which pool items carry ground truth; the rest are only seen through the pipeline.
    Rng pick = root.derive(300 + r);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    pick.shuffle(std::span<std::size_t>(order));
    Dataset labeled{{}, DatasetRole::ground_truth};
    Dataset generated{{}, DatasetRole::imputed};
    for (std::size_t k = 0; k < total; ++k) {
      if (k < n_gt) {
        labeled.examples.push_back(gt_set.examples[order[k]]);
      } else {
        generated.examples.push_back(imp_set.examples[order[k]]);
      }
    }
    const Dataset mixed = mix_datasets(labeled, generated, {x, total, root.derive(400 + r).seed()});
    const std::uint64_t init_seed = root.derive(500 + r).seed();
    const SgdConfig sgd = with_seed(s.sgd, root.derive(600 + r).seed());

    Network gt_only = build_skip_autoencoder(s.sweep_depth, s.channels, 1, s.kernel, init_seed);
    if (!labeled.empty()) train(gt_only, labeled, LossKind::mse, sgd);
    Network boot = build_skip_autoencoder(s.sweep_depth, s.channels, 1, s.kernel, init_seed);
    train(boot, mixed, LossKind::mse, sgd);
    const std::uint64_t flops = count_flops(boot, {1, 1, s.eval_size(), s.eval_size()});
    rows.push_back({"denoise", "gt_only", x, "ssim", surrogate_ssim(gt_only, data.test), flops});
    rows.push_back({"denoise", "bootstrapped", x, "ssim", surrogate_ssim(boot, data.test), flops});
  }
  const PipelineScore ps = pipeline_ssim(pipeline, data.test, cfg.threads);
  rows.push_back({"denoise", "pipeline", std::nullopt, "ssim", ps.ssim, ps.flops_per_image});
  return rows;
}

// ---------------------------------------------------------------------------
// classification

struct ClassifyData {
  Dataset train;
  Dataset test;
};

ClassifyData make_classify_data(const ClassifySettings& s, std::uint64_t seed) {
  if (!s.cifar_train_batches.empty()) {
    ClassifyData d;
    d.train.role = DatasetRole::ground_truth;
    for (const auto& path : s.cifar_train_batches) {
      Dataset b = load_cifar10_batch(path);
      d.train.examples.insert(d.train.examples.end(), b.examples.begin(), b.examples.end());
    }
    if (s.cifar_test_batch.empty()) throw BadParams("CIFAR-10 training batches given without a test batch");
    d.test = load_cifar10_batch(s.cifar_test_batch);
    d.test.role = DatasetRole::test;
    return d;
  }
  const Rng root(seed);
  Rng train_rng = root.derive(1);
  Rng test_rng = root.derive(2);
  ClassifyData d{synth_classification(s.train_count, s.num_classes, s.image_size, train_rng),
                 synth_classification(s.test_count, s.num_classes, s.image_size, test_rng)};
  d.test.role = DatasetRole::test;
  return d;
}

Dataset to_classification_set(const Dataset& d) {
  Dataset out{{}, d.role};
  out.examples.reserve(d.size());
  for (const auto& ex : d.examples) out.examples.push_back({to_network_input(ex.input), ex.target, ex.source});
  return out;
}

Network build_classifier(const ClassifierSpec& spec, const Shape& input_shape, std::size_t num_classes,
                         std::uint64_t seed) {
  return build_target_classifier(input_shape, num_classes, spec.conv_channels, spec.fc_sizes, 3, seed);
}

double test_accuracy(const Network& net, const Dataset& test) {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (const auto& ex : test.examples) {
    inputs.push_back(to_network_input(ex.input));
    labels.push_back(ex.target_class());
  }
  return accuracy(predict_classes(net, inputs, 64), labels);
}

Shape per_example(const Dataset& d) {
  if (d.empty()) throw EmptyDataset("classification data is empty");
  return d.examples.front().input.shape();
}

std::uint64_t per_example_flops(const Network& net, const Shape& input_shape) {
  Shape batch = input_shape;
  batch.insert(batch.begin(), 1);
  return count_flops(net, batch);
}

struct Teacher {
  std::shared_ptr<const Network> net;
  Dataset student_pool;  // ground-truth examples the students may learn from
  double train_accuracy = 0.0;
};

// Seed streams: 3 phi/psi split, 10 teacher init, 11 teacher sgd.
Teacher train_teacher(const ClassifySettings& s, const ClassifyData& data, std::uint64_t seed) {
  const Rng root(seed);
  Dataset teacher_set;
  Dataset student_pool;
  if (s.teacher_data == TeacherData::all) {
    teacher_set = data.train;
    student_pool = data.train;
  } else {
    Rng r = root.derive(3);
    auto [phi, psi] = split(data.train, 0.5, r);
    phi.role = DatasetRole::phi;
    psi.role = DatasetRole::psi;
    teacher_set = std::move(phi);
    student_pool = std::move(psi);
  }
  auto net = std::make_shared<Network>(
      build_classifier(s.teacher, per_example(data.train), s.num_classes, root.derive(10).seed()));
  train(*net, to_classification_set(teacher_set), LossKind::softmax_xent, with_seed(s.teacher_sgd, root.derive(11).seed()));
  Teacher t;
  t.train_accuracy = test_accuracy(*net, teacher_set);
  t.net = std::move(net);
  t.student_pool = std::move(student_pool);
  return t;
}

std::vector<MetricRow> classify_experiment_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ClassifySettings& s = cfg.classify;
  const ClassifyData data = make_classify_data(s, seed);
  const Teacher teacher = train_teacher(s, data, seed);
  const BlackBoxPipeline pipeline = make_classifier_pipeline(teacher.net);
  const Dataset imputed = impute_labels(pipeline, strip_targets(teacher.student_pool), cfg.threads);
  const Dataset student_set = to_classification_set(imputed);
  const Shape input_shape = per_example(data.train);
  const Rng root(seed);

  std::vector<MetricRow> rows;
  const std::uint64_t teacher_flops = per_example_flops(*teacher.net, input_shape);
  rows.push_back({"classify", "pipeline", std::nullopt, "accuracy", test_accuracy(*teacher.net, data.test),
                  teacher_flops});
  rows.push_back({"classify", "pipeline_train", std::nullopt, "accuracy", teacher.train_accuracy, teacher_flops});
  for (std::size_t i = 0; i < s.students.size(); ++i) {
    const auto& spec = s.students[i];
    Network student = build_classifier(spec, input_shape, s.num_classes, root.derive(20 + i).seed());
    train(student, student_set, LossKind::softmax_xent, with_seed(s.student_sgd, root.derive(40 + i).seed()));
    rows.push_back({"classify", spec.name, std::nullopt, "accuracy", test_accuracy(student, data.test),
                    per_example_flops(student, input_shape)});
  }
  return rows;
}

std::vector<MetricRow> classify_sweep_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ClassifySettings& s = cfg.classify;
  if (s.students.empty()) throw BadParams("classification sweep needs a student architecture");
  const ClassifyData data = make_classify_data(s, seed);
  const Teacher teacher = train_teacher(s, data, seed);
  const BlackBoxPipeline pipeline = make_classifier_pipeline(teacher.net);
  const Dataset imputed = impute_labels(pipeline, strip_targets(teacher.student_pool), cfg.threads);
  const Dataset gt_set = to_classification_set(teacher.student_pool);
  const Dataset imp_set = to_classification_set(imputed);
  const Shape input_shape = per_example(data.train);
  const std::size_t total = gt_set.size();
  const Rng root(seed);

  const std::vector<double> ratios = sweep_ratios(cfg, Task::classify);
  std::vector<MetricRow> rows;
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    const double x = ratios[r];
    const std::size_t n_gt = ground_truth_count(x, total);
    Rng pick = root.derive(300 + r);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    pick.shuffle(std::span<std::size_t>(order));
    Dataset labeled{{}, DatasetRole::ground_truth};
    Dataset generated{{}, DatasetRole::imputed};
    for (std::size_t k = 0; k < total; ++k) {
      if (k < n_gt) {
        labeled.examples.push_back(gt_set.examples[order[k]]);
      } else {
        generated.examples.push_back(imp_set.examples[order[k]]);
      }
    }
    const Dataset mixed = mix_datasets(labeled, generated, {x, total, root.derive(400 + r).seed()});
    const std::uint64_t init_seed = root.derive(500 + r).seed();
    const SgdConfig sgd = with_seed(s.student_sgd, root.derive(600 + r).seed());
    const auto& spec = s.students.front();

    Network gt_only = build_classifier(spec, input_shape, s.num_classes, init_seed);
    if (!labeled.empty()) train(gt_only, labeled, LossKind::softmax_xent, sgd);
    Network boot = build_classifier(spec, input_shape, s.num_classes, init_seed);
    train(boot, mixed, LossKind::softmax_xent, sgd);
    const std::uint64_t flops = per_example_flops(boot, input_shape);
    rows.push_back({"classify", "gt_only", x, "accuracy", test_accuracy(gt_only, data.test), flops});
    rows.push_back({"classify", "bootstrapped", x, "accuracy", test_accuracy(boot, data.test), flops});
  }
  rows.push_back({"classify", "pipeline", std::nullopt, "accuracy", test_accuracy(*teacher.net, data.test),
                  per_example_flops(*teacher.net, input_shape)});
  return rows;
}

template <typename Fn>
std::vector<MetricRow> over_seeds(const ExperimentConfig& cfg, Fn&& once) {
  if (cfg.seeds.empty()) throw BadParams("experiment needs at least one seed");
  std::vector<std::vector<MetricRow>> runs;
  for (auto seed : cfg.seeds) runs.push_back(once(cfg, seed));
  return average_rows(runs);
}

}  // namespace

std::vector<MetricRow> run_denoise_experiment(const ExperimentConfig& cfg) {
  return over_seeds(cfg, denoise_experiment_once);
}

std::vector<MetricRow> run_classify_experiment(const ExperimentConfig& cfg) {
  return over_seeds(cfg, classify_experiment_once);
}

std::vector<double> default_ratios(Task task) {
  if (task == Task::denoise) return {0.03, 0.1, 0.3, 1.0};
  return {0.003, 0.01, 0.1, 1.0};
}

std::vector<MetricRow> run_ratio_sweep(const ExperimentConfig& cfg, Task task) {
  for (double x : cfg.ratios) {
    if (!(x >= 0.0 && x <= 1.0)) throw BadParams(fmt::format("ratio {} outside [0,1]", x));
  }
  return task == Task::denoise ? over_seeds(cfg, denoise_sweep_once) : over_seeds(cfg, classify_sweep_once);
}

std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode == Mode::ratio_sweep) return run_ratio_sweep(cfg, cfg.task);
  return cfg.task == Task::denoise ? run_denoise_experiment(cfg) : run_classify_experiment(cfg);
}

}  // namespace pbnn
