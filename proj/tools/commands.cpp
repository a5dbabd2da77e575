#include "commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include "config.hpp"
#include "pbnn/bootstrap.hpp"
#include "pbnn/checkpoint.hpp"
#include "pbnn/data.hpp"
#include "pbnn/errors.hpp"
#include "pbnn/metrics.hpp"
#include "pbnn/train.hpp"
#include "selftest.hpp"
#include "svg.hpp"

namespace pbnn::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> threads;
};

struct CrfFlags {
  std::size_t labels = 0;
  double lambda = 0.0;
  double trunc = 0.0;

  CrfFlags() {
    const DenoiseSettings d;
    labels = d.crf.num_labels();
    lambda = d.crf.lambda;
    trunc = d.crf.smooth_trunc;
  }
  void add_to(CLI::App& cmd) {
    cmd.add_option("--labels", labels, "Number of evenly spaced intensity labels")->capture_default_str()
        ->check(CLI::Range(2, 256));
    cmd.add_option("--lambda", lambda, "Smoothness weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd.add_option("--trunc", trunc, "Smoothness truncation")->capture_default_str()->check(CLI::NonNegativeNumber);
  }
  CrfParams params() const { return CrfParams::uniform(labels, lambda, trunc); }
};

std::string pgm_name(std::size_t i) { return fmt::format("{:04d}.pgm", i); }

// Manifest paths are stored relative to the manifest's directory.
fs::path resolve(const fs::path& manifest, const std::string& entry) {
  const fs::path p(entry);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

std::vector<std::pair<std::size_t, fs::path>> entries_with_role(const fs::path& manifest, const std::string& role) {
  std::vector<std::pair<std::size_t, fs::path>> out;
  for (const auto& e : read_manifest(manifest)) {
    if (e.role == role) out.emplace_back(e.index, resolve(manifest, e.path));
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path require_out_dir(const Globals& g) {
  fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
  return dir;
}

int cmd_synth_data(const Globals& g, std::size_t count, std::size_t size, std::size_t levels, double sigma,
                   std::ostream& out) {
  const fs::path dir = require_out_dir(g);
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "noisy");
  const Rng root(g.seed.value_or(1));
  Rng shape_rng = root.derive(1);
  const Rng noise_root = root.derive(2);
  const auto clean = synth_shapes(count, size, levels, shape_rng);
  std::vector<ManifestEntry> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    Rng noise = noise_root.derive(i);
    const std::string c = "clean/" + pgm_name(i), n = "noisy/" + pgm_name(i);
    save_pgm(dir / c, clean[i]);
    save_pgm(dir / n, add_gaussian_noise(clean[i], sigma, noise));
    manifest.push_back({c, "clean", i});
    manifest.push_back({n, "noisy", i});
  }
  write_manifest(dir / "manifest.csv", manifest);
  fmt::print(out, "wrote {} image pairs to {}\n", count, dir.string());
  return exit_ok;
}

int cmd_denoise(const std::string& input, const std::string& output, const std::string& clean, const CrfFlags& crf,
                bool swap, std::ostream& out) {
  const Tensor image = load_pgm(input);
  const CrfParams p = crf.params();
  p.require_metric();
  const DenoiseResult r =
      denoise_detailed(image, p, swap ? MoveSchedule::expansion_then_swap : MoveSchedule::expansion);
  save_pgm(output, r.image);
  fmt::print(out, "energy={}\n", format_double(r.energy));
  fmt::print(out, "ops={}\n", r.ops.total());
  if (!clean.empty()) fmt::print(out, "ssim={}\n", format_double(ssim(load_pgm(clean), r.image)));
  return exit_ok;
}

int cmd_label(const Globals& g, const std::string& manifest, const CrfFlags& crf, std::ostream& out) {
  const auto noisy = entries_with_role(manifest, "noisy");
  if (noisy.empty()) throw EmptyDataset(fmt::format("manifest '{}' has no noisy entries", manifest));
  Dataset unlabeled;
  unlabeled.role = DatasetRole::unlabeled;
  for (const auto& [index, path] : noisy) unlabeled.examples.push_back({load_pgm(path), {}, LabelSource::imputed});

  const fs::path dir = require_out_dir(g);
  fs::create_directories(dir / "imputed");
  ImputeStats stats;
  const Dataset imputed = impute_labels(make_denoise_pipeline(crf.params()), unlabeled, g.threads.value_or(1), &stats);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const std::size_t index = noisy[i].first;
    const std::string rel = "imputed/" + pgm_name(index);
    save_pgm(dir / rel, imputed[i].target_tensor());
    entries.push_back({fs::absolute(noisy[i].second).lexically_normal().string(), "noisy", index});
    entries.push_back({rel, "imputed", index});
  }
  write_manifest(dir / "manifest.csv", entries);
  fmt::print(out, "labeled {} images, ops={}\n", noisy.size(), stats.flops);
  return exit_ok;
}

struct TrainFlags {
  std::string manifest;
  std::string output;
  std::string target_role = "imputed";
  std::size_t depth = DenoiseSettings{}.sweep_depth;
  std::size_t channels = DenoiseSettings{}.channels;
  std::size_t kernel = DenoiseSettings{}.kernel;
  SgdConfig sgd = DenoiseSettings{}.sgd;
};

int cmd_train(const Globals& g, TrainFlags f, std::ostream& out) {
  const auto inputs = entries_with_role(f.manifest, "noisy");
  std::map<std::size_t, fs::path> targets;
  for (const auto& [index, path] : entries_with_role(f.manifest, f.target_role)) targets[index] = path;
  Dataset data;
  data.role = f.target_role == "imputed" ? DatasetRole::imputed : DatasetRole::ground_truth;
  const LabelSource source = f.target_role == "imputed" ? LabelSource::imputed : LabelSource::ground_truth;
  for (const auto& [index, path] : inputs) {
    const auto t = targets.find(index);
    if (t == targets.end()) continue;
    data.examples.push_back({to_network_input(load_pgm(path)), to_network_input(load_pgm(t->second)), source});
  }
  if (data.empty())
    throw EmptyDataset(fmt::format("manifest '{}' has no noisy/{} pairs", f.manifest, f.target_role));

  const std::uint64_t seed = g.seed.value_or(1);
  const Rng root(seed);
  Network net = build_skip_autoencoder(f.depth, f.channels, 1, f.kernel, root.derive(1).next_u64());
  f.sgd.seed = root.derive(2).next_u64();
  const TrainLog log = train(net, data, LossKind::mse, f.sgd);
  save_checkpoint(f.output, net);
  fmt::print(out, "trained on {} pairs, final loss={}\n", data.size(),
             format_double(log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back()));
  return exit_ok;
}

int cmd_sweep(const Globals& g, const std::string& config_path, const std::string& svg_flag, std::ostream& out) {
  RunConfig cfg = parse_config(read_file(config_path));
  if (g.seed) cfg.experiment.seeds = {*g.seed};
  if (g.threads) cfg.experiment.threads = *g.threads;

  // Resolve every output path before running anything.
  const fs::path csv = !cfg.csv_path.empty() ? fs::path(cfg.csv_path) : fs::path(g.out_dir.empty() ? "." : g.out_dir) / "metrics.csv";
  const std::string svg = !svg_flag.empty() ? svg_flag : cfg.svg_path;
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  if (!svg.empty() && fs::path(svg).has_parent_path()) fs::create_directories(fs::path(svg).parent_path());

  const auto rows = flops_report(run_experiment(cfg.experiment));
  write_file(csv, to_csv(rows));
  if (!svg.empty()) write_file(svg, render_svg(rows));
  fmt::print(out, "wrote {} rows to {}\n", rows.size(), csv.string());
  return exit_ok;
}

int cmd_report(const std::string& input, const std::string& svg, std::ostream& out) {
  const auto rows = flops_report(parse_csv(read_file(input)));
  std::size_t wm = 6;
  for (const auto& r : rows) wm = std::max(wm, r.method.size());
  fmt::print(out, "{:<9} {:<{}} {:>8} {:<9} {:>10} {:>14}\n", "task", "method", wm, "ratio_x", "metric", "value",
             "flops");
  for (const auto& r : rows) {
    fmt::print(out, "{:<9} {:<{}} {:>8} {:<9} {:>10.4f} {:>14}\n", r.task, r.method, wm,
               r.ratio_x ? format_double(*r.ratio_x) : "-", r.metric, r.value, r.flops);
  }
  if (!svg.empty()) write_file(svg, render_svg(rows));
  return exit_ok;
}

int cmd_selftest(const std::vector<std::string>& faults, std::ostream& out, std::ostream& err) {
  const SelftestResult r = run_selftest({faults}, out);
  if (r.seconds > 60.0) fmt::print(err, "warning: selftest took {:.1f} s (budget 60 s)\n", r.seconds);
  if (r.failed.empty()) {
    fmt::print(out, "all checks passed in {:.2f} s\n", r.seconds);
    return exit_ok;
  }
  std::string names;
  for (const auto& n : r.failed) names += (names.empty() ? "" : ", ") + n;
  fmt::print(err, "selftest failed: {}\n", names);
  return exit_runtime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bootstrapped replacement of black-box pipelines with small networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Globals g;
  app.add_option("--seed", g.seed, "Root RNG seed")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  std::size_t count = 16, size = 32, levels = DenoiseSettings{}.levels;
  double sigma = DenoiseSettings{}.sigma;
  auto* synth = app.add_subcommand("synth-data", "Write clean and noisy synthetic PGMs plus a manifest");
  synth->add_option("--count", count)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--size", size)->capture_default_str()->check(CLI::Range(4, 4096));
  synth->add_option("--levels", levels)->capture_default_str()->check(CLI::Range(2, 256));
  synth->add_option("--sigma", sigma, "Noise standard deviation")->capture_default_str()->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", g.seed, "Root RNG seed");
  synth->add_option("--out-dir", g.out_dir, "Output directory")->required();

  std::string input, output, clean;
  bool swap = false;
  CrfFlags crf;
  auto* den = app.add_subcommand("denoise", "Denoise a PGM with the graph-cut pipeline");
  den->add_option("--input", input)->required();
  den->add_option("--output", output)->required();
  den->add_option("--clean", clean, "Reference image; prints ssim=<value>");
  den->add_flag("--swap", swap, "Finish with alpha-beta swap cycles");
  crf.add_to(*den);

  std::string manifest;
  auto* label = app.add_subcommand("label", "Impute targets for every noisy manifest entry");
  label->add_option("--manifest", manifest)->required();
  label->add_option("--out-dir", g.out_dir, "Output directory")->required();
  label->add_option("--threads", g.threads)->check(CLI::PositiveNumber);
  crf.add_to(*label);

  TrainFlags tf;
  auto* tr = app.add_subcommand("train", "Train a skip autoencoder on manifest pairs and save a checkpoint");
  tr->add_option("--manifest", tf.manifest)->required();
  tr->add_option("--output", tf.output, "Checkpoint path")->required();
  tr->add_option("--target-role", tf.target_role)->capture_default_str()->check(CLI::IsMember({"imputed", "clean"}));
  tr->add_option("--depth", tf.depth)->capture_default_str()->check(CLI::Range(2, 64));
  tr->add_option("--channels", tf.channels)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--kernel", tf.kernel)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--epochs", tf.sgd.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--lr", tf.sgd.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", tf.sgd.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--seed", g.seed);

  std::string config, svg;
  auto* sweep = app.add_subcommand("sweep", "Run the experiment described by a JSON config");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--svg", svg, "Also write a line plot");
  sweep->add_option("--out-dir", g.out_dir);
  sweep->add_option("--seed", g.seed);
  sweep->add_option("--threads", g.threads)->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Print a metrics CSV as a sorted table");
  report->add_option("--input", input)->required();
  report->add_option("--svg", svg);

  std::vector<std::string> faults;
  auto* self = app.add_subcommand("selftest", "Check the library against independent reference implementations");
  self->add_option("--inject-fault", faults, "Test hook: sabotage a named check")
      ->check(CLI::IsMember({"ssim"}))
      ->group("");

  std::vector<const char*> argv{"pbnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*synth) return cmd_synth_data(g, count, size, levels, sigma, out);
    if (*den) return cmd_denoise(input, output, clean, crf, swap, out);
    if (*label) return cmd_label(g, manifest, crf, out);
    if (*tr) return cmd_train(g, tf, out);
    if (*sweep) return cmd_sweep(g, config, svg, out);
    if (*report) return cmd_report(input, svg, out);
    if (*self) return cmd_selftest(faults, out, err);
  } catch (const ConfigError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_config;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return exit_runtime;
  }
  return exit_usage;
}

}  // namespace pbnn::cli
