#include "config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "pbnn/errors.hpp"

namespace pbnn::cli {

using nlohmann::json;

namespace {

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(fmt::format("config key '{}': {}", path, what));
}

// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string path(const char* key) const { return join_path(path_, key); }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), path(key));
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    out = convert<T>(raw(key), path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) fail(join_path(path_, it.key()), "unknown key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(path, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
      return static_cast<T>(v.get<std::uint64_t>());
    } else {
      if (!v.is_array()) fail(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], fmt::format("{}[{}]", path, i)));
      }
      return out;
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void checked(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

SgdConfig read_sgd(Reader r, SgdConfig sgd) {
  r.get("learning_rate", sgd.learning_rate);
  r.get("momentum", sgd.momentum);
  r.get("batch_size", sgd.batch_size);
  r.get("epochs", sgd.epochs);
  r.get("seed", sgd.seed);
  r.finish();
  return sgd;
}

CrfParams read_crf(Reader r, const CrfParams& base) {
  std::size_t k = base.num_labels();
  r.get("num_labels", k);
  CrfParams p = CrfParams::uniform(std::max<std::size_t>(k, 1), base.lambda, base.smooth_trunc, base.data_trunc);
  if (r.has("label_values")) {
    r.get("label_values", p.label_values);
    if (r.has("num_labels") && k != p.label_values.size()) {
      fail(r.path("num_labels"), "disagrees with the length of label_values");
    }
  } else if (k == 0) {
    fail(r.path("num_labels"), "must be at least 1");
  }
  r.get("lambda", p.lambda);
  r.get("smooth_trunc", p.smooth_trunc);
  if (r.has("data_trunc")) {
    const json& v = r.raw("data_trunc");
    p.data_trunc = v.is_null() ? std::numeric_limits<double>::infinity() : Reader::convert<double>(v, r.path("data_trunc"));
  }
  r.finish();
  return p;
}

ClassifierSpec read_spec(Reader r, ClassifierSpec spec) {
  r.get("name", spec.name);
  r.get("conv_channels", spec.conv_channels);
  r.get("fc_sizes", spec.fc_sizes);
  r.finish();
  return spec;
}

void read_denoise(Reader r, DenoiseSettings& d) {
  r.get("image_size", d.image_size);
  r.get("levels", d.levels);
  r.get("train_images", d.train_images);
  r.get("test_images", d.test_images);
  r.get("patch_size", d.patch_size);
  r.get("train_patches", d.train_patches);
  r.get("test_patches", d.test_patches);
  r.get("sigma", d.sigma);
  r.get("sigma_is_variance", d.sigma_is_variance);
  if (r.has("crf")) d.crf = read_crf(r.child("crf"), d.crf);
  r.get("depths", d.depths);
  r.get("channels", d.channels);
  r.get("kernel", d.kernel);
  r.get("sweep_depth", d.sweep_depth);
  if (r.has("sgd")) d.sgd = read_sgd(r.child("sgd"), d.sgd);
  r.finish();
}

void read_classify(Reader r, ClassifySettings& c) {
  r.get("num_classes", c.num_classes);
  r.get("image_size", c.image_size);
  r.get("train_count", c.train_count);
  r.get("test_count", c.test_count);
  r.get("cifar_train_batches", c.cifar_train_batches);
  r.get("cifar_test_batch", c.cifar_test_batch);
  if (r.has("teacher_data")) {
    const auto v = Reader::convert<std::string>(r.raw("teacher_data"), r.path("teacher_data"));
    if (v == "phi") {
      c.teacher_data = TeacherData::phi;
    } else if (v == "all") {
      c.teacher_data = TeacherData::all;
    } else {
      fail(r.path("teacher_data"), fmt::format("expected \"phi\" or \"all\", got \"{}\"", v));
    }
  }
  if (r.has("teacher")) c.teacher = read_spec(r.child("teacher"), c.teacher);
  if (r.has("students")) {
    const json& arr = r.raw("students");
    if (!arr.is_array()) fail(r.path("students"), "expected an array");
    c.students.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.students.push_back(read_spec(Reader(arr[i], fmt::format("{}[{}]", r.path("students"), i)),
                                     ClassifierSpec{fmt::format("student-{}", i)}));
    }
  }
  if (r.has("teacher_sgd")) c.teacher_sgd = read_sgd(r.child("teacher_sgd"), c.teacher_sgd);
  if (r.has("student_sgd")) c.student_sgd = read_sgd(r.child("student_sgd"), c.student_sgd);
  r.finish();
}

void validate(const ExperimentConfig& e) {
  if (e.seeds.empty()) fail("seeds", "needs at least one seed");
  if (e.threads == 0) fail("threads", "must be at least 1");
  for (std::size_t i = 0; i < e.ratios.size(); ++i) {
    if (!(e.ratios[i] >= 0.0 && e.ratios[i] <= 1.0)) fail(fmt::format("ratios[{}]", i), "must lie in [0, 1]");
  }
  const auto& d = e.denoise;
  checked("denoise.crf", [&] {
    d.crf.validate();
    d.crf.require_metric();
  });
  checked("denoise.sgd", [&] { d.sgd.validate(); });
  if (d.sigma < 0.0) fail("denoise.sigma", "must be non-negative");
  if (d.image_size < 11) fail("denoise.image_size", "must be at least 11 (the SSIM window)");
  if (d.levels < 2) fail("denoise.levels", "must be at least 2");
  if (d.train_images == 0) fail("denoise.train_images", "must be positive");
  if (d.test_images == 0) fail("denoise.test_images", "must be positive");
  if (d.patch_size > d.image_size) fail("denoise.patch_size", "exceeds image_size");
  if (d.eval_size() < 11) fail("denoise.patch_size", "must be at least 11 (the SSIM window)");
  if (d.kernel % 2 == 0) fail("denoise.kernel", "must be odd");
  if (d.channels == 0) fail("denoise.channels", "must be positive");
  for (std::size_t i = 0; i < d.depths.size(); ++i) {
    if (d.depths[i] < 2 || d.depths[i] % 2 != 0) fail(fmt::format("denoise.depths[{}]", i), "must be even and >= 2");
  }
  if (d.sweep_depth < 2 || d.sweep_depth % 2 != 0) fail("denoise.sweep_depth", "must be even and >= 2");

  const auto& c = e.classify;
  checked("classify.teacher_sgd", [&] { c.teacher_sgd.validate(); });
  checked("classify.student_sgd", [&] { c.student_sgd.validate(); });
  if (c.num_classes < 2) fail("classify.num_classes", "must be at least 2");
  if (c.cifar_train_batches.empty() && c.image_size < 8) fail("classify.image_size", "must be at least 8");
  if (c.cifar_train_batches.empty() && c.train_count < 2) fail("classify.train_count", "must be at least 2");
  if (c.cifar_train_batches.empty() && c.test_count == 0) fail("classify.test_count", "must be positive");
  if (!c.cifar_train_batches.empty() && c.cifar_test_batch.empty()) {
    fail("classify.cifar_test_batch", "required when cifar_train_batches is given");
  }
  auto check_spec = [&](const ClassifierSpec& s, const std::string& path) {
    if (s.fc_sizes.empty() || s.fc_sizes.back() != c.num_classes) {
      fail(path + ".fc_sizes", "must be non-empty and end with num_classes");
    }
    if (s.conv_channels == 0) fail(path + ".conv_channels", "must be positive");
    if (s.name.empty() || s.name.find_first_of(",\n\"") != std::string::npos) {
      fail(path + ".name", "must be non-empty without commas or quotes");
    }
  };
  check_spec(c.teacher, "classify.teacher");
  for (std::size_t i = 0; i < c.students.size(); ++i) check_spec(c.students[i], fmt::format("classify.students[{}]", i));
  if (e.task == Task::classify && e.mode == Mode::ratio_sweep && c.students.empty()) {
    fail("classify.students", "a classification sweep needs a student");
  }
}

json sgd_json(const SgdConfig& s) {
  return {{"learning_rate", s.learning_rate},
          {"momentum", s.momentum},
          {"batch_size", s.batch_size},
          {"epochs", s.epochs},
          {"seed", s.seed}};
}

json spec_json(const ClassifierSpec& s) {
  return {{"name", s.name}, {"conv_channels", s.conv_channels}, {"fc_sizes", s.fc_sizes}};
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  Reader r(root, "");
  if (r.has("task")) {
    const auto v = Reader::convert<std::string>(r.raw("task"), "task");
    if (v == "denoise") {
      e.task = Task::denoise;
    } else if (v == "classify") {
      e.task = Task::classify;
    } else {
      fail("task", fmt::format("expected \"denoise\" or \"classify\", got \"{}\"", v));
    }
  }
  if (r.has("mode")) {
    const auto v = Reader::convert<std::string>(r.raw("mode"), "mode");
    if (v == "experiment") {
      e.mode = Mode::experiment;
    } else if (v == "ratio_sweep") {
      e.mode = Mode::ratio_sweep;
    } else {
      fail("mode", fmt::format("expected \"experiment\" or \"ratio_sweep\", got \"{}\"", v));
    }
  }
  r.get("ratios", e.ratios);
  r.get("seeds", e.seeds);
  r.get("threads", e.threads);
  if (r.has("denoise")) read_denoise(r.child("denoise"), e.denoise);
  if (r.has("classify")) read_classify(r.child("classify"), e.classify);
  if (r.has("output")) {
    Reader o = r.child("output");
    o.get("csv", cfg.csv_path);
    o.get("svg", cfg.svg_path);
    o.finish();
  }
  r.finish();
  validate(e);
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  const auto& d = e.denoise;
  const auto& c = e.classify;
  json crf = {{"label_values", d.crf.label_values},
              {"lambda", d.crf.lambda},
              {"smooth_trunc", d.crf.smooth_trunc},
              {"data_trunc", std::isinf(d.crf.data_trunc) ? json(nullptr) : json(d.crf.data_trunc)}};
  json students = json::array();
  for (const auto& s : c.students) students.push_back(spec_json(s));
  json root = {
      {"task", e.task == Task::denoise ? "denoise" : "classify"},
      {"mode", e.mode == Mode::experiment ? "experiment" : "ratio_sweep"},
      {"ratios", e.ratios.empty() ? default_ratios(e.task) : e.ratios},
      {"seeds", e.seeds},
      {"threads", e.threads},
      {"denoise",
       {{"image_size", d.image_size},
        {"levels", d.levels},
        {"train_images", d.train_images},
        {"test_images", d.test_images},
        {"patch_size", d.patch_size},
        {"train_patches", d.train_patches},
        {"test_patches", d.test_patches},
        {"sigma", d.sigma},
        {"sigma_is_variance", d.sigma_is_variance},
        {"crf", crf},
        {"depths", d.depths},
        {"channels", d.channels},
        {"kernel", d.kernel},
        {"sweep_depth", d.sweep_depth},
        {"sgd", sgd_json(d.sgd)}}},
      {"classify",
       {{"num_classes", c.num_classes},
        {"image_size", c.image_size},
        {"train_count", c.train_count},
        {"test_count", c.test_count},
        {"cifar_train_batches", c.cifar_train_batches},
        {"cifar_test_batch", c.cifar_test_batch},
        {"teacher_data", c.teacher_data == TeacherData::phi ? "phi" : "all"},
        {"teacher", spec_json(c.teacher)},
        {"students", students},
        {"teacher_sgd", sgd_json(c.teacher_sgd)},
        {"student_sgd", sgd_json(c.student_sgd)}}},
      {"output", {{"csv", cfg.csv_path}, {"svg", cfg.svg_path}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace pbnn::cli
