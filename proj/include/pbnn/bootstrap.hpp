#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbnn/dataset.hpp"
#include "pbnn/graphcut.hpp"
#include "pbnn/metrics.hpp"
#include "pbnn/network.hpp"
#include "pbnn/train.hpp"

namespace pbnn {

struct PipelineEvaluation {
  Target output;
  std::uint64_t flops = 0;
};

/// Opaque input -> output mapping used as a labeler. The evaluator must be
/// deterministic and free of shared mutable state so calls may run concurrently.
class BlackBoxPipeline {
 public:
  using Evaluator = std::function<PipelineEvaluation(const Tensor&)>;

  BlackBoxPipeline(std::string name, Evaluator evaluator)
      : name_(std::move(name)), evaluator_(std::move(evaluator)) {}

  const std::string& name() const noexcept { return name_; }
  PipelineEvaluation evaluate(const Tensor& input) const { return evaluator_(input); }
  Target operator()(const Tensor& input) const { return evaluate(input).output; }

 private:
  std::string name_;
  Evaluator evaluator_;
};

/// The graph-cut denoiser on [H, W] images; flops are its instrumented op count.
BlackBoxPipeline make_denoise_pipeline(CrfParams params);

/// Argmax of a trained classifier on raw [C, H, W] inputs in [0, 255].
BlackBoxPipeline make_classifier_pipeline(std::shared_ptr<const Network> net, std::string name = "pipeline");

struct ImputeStats {
  std::uint64_t flops = 0;  // summed over every evaluation
};

/// S = {(x, P(x)) : x in U}, in the order of U. `threads` > 1 evaluates in
/// parallel; results do not depend on it.
Dataset impute_labels(const BlackBoxPipeline& pipeline, const Dataset& unlabeled, std::size_t threads = 1,
                      ImputeStats* stats = nullptr);

struct MixConfig {
  double ratio_x = 0.0;
  std::size_t total_n = 0;
  std::uint64_t seed = 0;
};

/// floor(ratio_x * total_n + 0.5).
std::size_t ground_truth_count(double ratio_x, std::size_t total_n);

/// Seeded sample of ground_truth_count examples of `ground_truth` followed by
/// total_n minus that many of `imputed`.
Dataset mix_datasets(const Dataset& ground_truth, const Dataset& imputed, const MixConfig& cfg);

// ---------------------------------------------------------------------------
// experiments

enum class Task { denoise, classify };
enum class Mode { experiment, ratio_sweep };

struct DenoiseSettings {
  std::size_t image_size = 32;
  std::size_t levels = 4;
  std::size_t train_images = 64;
  std::size_t test_images = 16;
  std::size_t patch_size = 32;
  std::size_t train_patches = 0;  // 0: use the images themselves
  std::size_t test_patches = 0;
  double sigma = 20.0;
  bool sigma_is_variance = false;
  CrfParams crf = CrfParams::uniform(32, 8.0, 64.0);
  std::vector<std::size_t> depths{4};
  std::size_t channels = 16;
  std::size_t kernel = 5;
  std::size_t sweep_depth = 4;
  SgdConfig sgd{0.05, 0.9, 8, 10, 0};

  double noise_sigma() const;
  /// Side of the evaluated test images.
  std::size_t eval_size() const { return test_patches > 0 ? patch_size : image_size; }
};

struct ClassifierSpec {
  std::string name;
  std::size_t conv_channels = 8;
  std::vector<std::size_t> fc_sizes{32, 4};
};

enum class TeacherData { phi, all };

struct ClassifySettings {
  std::size_t num_classes = 4;
  std::size_t image_size = 16;
  std::size_t train_count = 2000;
  std::size_t test_count = 400;
  std::vector<std::string> cifar_train_batches;  // when non-empty, CIFAR-10 replaces the synthetic data
  std::string cifar_test_batch;
  TeacherData teacher_data = TeacherData::phi;
  ClassifierSpec teacher{"pipeline", 8, {32, 4}};
  std::vector<ClassifierSpec> students{{"student-cnn", 8, {32, 4}}};
  SgdConfig teacher_sgd{0.005, 0.9, 16, 20, 0};
  SgdConfig student_sgd{0.005, 0.9, 16, 20, 0};
};

struct ExperimentConfig {
  Task task = Task::denoise;
  Mode mode = Mode::experiment;
  DenoiseSettings denoise;
  ClassifySettings classify;
  std::vector<double> ratios;  // empty: default_ratios(task)
  std::vector<std::uint64_t> seeds{1};
  std::size_t threads = 1;
};

/// Rows for noisy_input, pipeline and one nn-skip-<depth> surrogate per depth,
/// each trained only on pipeline-imputed labels.
std::vector<MetricRow> run_denoise_experiment(const ExperimentConfig& cfg);

/// Teacher/student protocol: teacher trained on the phi half (or all training
/// data), students trained on teacher-imputed labels.
std::vector<MetricRow> run_classify_experiment(const ExperimentConfig& cfg);

/// gt_only and bootstrapped rows per ratio plus one pipeline reference row.
std::vector<MetricRow> run_ratio_sweep(const ExperimentConfig& cfg, Task task);

/// Per-task sweep ratios; the smallest leaves 2 to 4 ground-truth examples in
/// the default pools (64 denoising images, 1000 classification examples).
std::vector<double> default_ratios(Task task);

/// Dispatch on cfg.task / cfg.mode.
std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg);

/// Element-wise mean of equally laid-out row sets (values and flops).
std::vector<MetricRow> average_rows(const std::vector<std::vector<MetricRow>>& runs);

/// Pixel scaling shared by every surrogate: [0, 255] -> [0, 1] with a leading channel axis.
Tensor to_network_input(const Tensor& image);
/// Inverse of to_network_input, clamped to [0, 255].
Tensor from_network_output(const Tensor& output);

}  // namespace pbnn
