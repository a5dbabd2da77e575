#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "pbnn/data.hpp"
#include "pbnn/errors.hpp"
#include "pbnn/metrics.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace pbnn;
using namespace pbnn::cli;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pbnn_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

constexpr const char* tiny_sweep = R"({
  "task": "denoise",
  "mode": "ratio_sweep",
  "ratios": [0.25, 1.0],
  "denoise": {
    "image_size": 16, "patch_size": 16, "train_images": 8, "test_images": 2,
    "crf": {"num_labels": 8, "lambda": 8, "smooth_trunc": 64},
    "channels": 4, "kernel": 3, "sweep_depth": 2,
    "sgd": {"learning_rate": 0.05, "momentum": 0.9, "batch_size": 4, "epochs": 2}
  }
})";

}  // namespace

TEST_CASE("synth-data writes paired corpora deterministically") {
  const fs::path dir = scratch("synth");
  const auto a = dir / "a", b = dir / "b";
  CHECK(invoke({"synth-data", "--count", "4", "--size", "32", "--seed", "9", "--out-dir", a.string()}).code == 0);
  CHECK(invoke({"--seed", "9", "synth-data", "--count", "4", "--size", "32", "--out-dir", b.string()}).code == 0);
  const auto manifest = read_manifest(a / "manifest.csv");
  CHECK(manifest.size() == 8);
  for (const auto& e : manifest) {
    CHECK(fs::exists(a / e.path));
    CHECK(read_file(a / e.path) == read_file(b / e.path));
  }
  CHECK(read_file(a / "manifest.csv") == read_file(b / "manifest.csv"));
}

TEST_CASE("flag misuse exits 2") {
  CHECK(invoke({"synth-data", "--count", "4"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"no-such-command"}).code == 2);
  CHECK(invoke({"synth-data", "--count", "zero", "--out-dir", "x"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("denoise command contract") {
  const fs::path dir = scratch("denoise");
  save_pgm(dir / "flat.pgm", Tensor({16, 16}, 96.0));
  SUBCASE("a constant image is a fixed point with zero energy") {
    const Run r = invoke({"denoise", "--input", (dir / "flat.pgm").string(), "--output", (dir / "out.pgm").string(),
                       "--labels", "256"});  // unit label spacing, so 96 is a label
    REQUIRE(r.code == 0);
    CHECK(load_pgm(dir / "out.pgm") == Tensor({16, 16}, 96.0));
    CHECK(r.out.find("energy=0\n") != std::string::npos);
  }
  SUBCASE("--clean prints exactly one ssim line") {
    const Run r = invoke({"denoise", "--input", (dir / "flat.pgm").string(), "--output", (dir / "out.pgm").string(),
                       "--clean", (dir / "flat.pgm").string()});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    int ssim_lines = 0;
    for (std::string line; std::getline(lines, line);) ssim_lines += line.rfind("ssim=", 0) == 0;
    CHECK(ssim_lines == 1);
  }
  SUBCASE("a missing input exits 1 naming the path") {
    const std::string missing = (dir / "missing.pgm").string();
    const Run r = invoke({"denoise", "--input", missing, "--output", (dir / "out.pgm").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find(missing) != std::string::npos);
  }
}

TEST_CASE("label then train produces a loadable checkpoint") {
  const fs::path dir = scratch("label");
  REQUIRE(invoke({"synth-data", "--count", "3", "--size", "16", "--out-dir", (dir / "data").string()}).code == 0);
  REQUIRE(invoke({"label", "--manifest", (dir / "data" / "manifest.csv").string(), "--out-dir", (dir / "lab").string(),
               "--labels", "8"})
              .code == 0);
  const auto entries = read_manifest(dir / "lab" / "manifest.csv");
  CHECK(entries.size() == 6);
  const Run r = invoke({"train", "--manifest", (dir / "lab" / "manifest.csv").string(), "--output",
                     (dir / "net.ckpt").string(), "--epochs", "1", "--depth", "2", "--channels", "2", "--kernel", "3"});
  REQUIRE(r.code == 0);
  CHECK(fs::file_size(dir / "net.ckpt") > 0);
}

TEST_CASE("sweep writes the expected rows and reruns byte-identically") {
  const fs::path dir = scratch("sweep");
  write_file(dir / "cfg.json", tiny_sweep);
  const auto run = [&](const std::string& sub) {
    return invoke({"sweep", "--config", (dir / "cfg.json").string(), "--out-dir", (dir / sub).string(), "--svg",
                (dir / sub / "plot.svg").string()});
  };
  REQUIRE(run("a").code == 0);
  REQUIRE(run("b").code == 0);
  const std::string csv = read_file(dir / "a" / "metrics.csv");
  CHECK(parse_csv(csv).size() == 5);  // 2 ratios x 2 methods + pipeline
  CHECK(csv == read_file(dir / "b" / "metrics.csv"));
  CHECK(read_file(dir / "a" / "plot.svg") == read_file(dir / "b" / "plot.svg"));

  const Run report = invoke({"report", "--input", (dir / "a" / "metrics.csv").string()});
  CHECK(report.code == 0);
  CHECK(report.out.find("bootstrapped") != std::string::npos);
}

TEST_CASE("config errors exit 3 and name the key") {
  const fs::path dir = scratch("config");
  write_file(dir / "bad.json", R"({"task": "denoise", "denoise": {"sgd": {"learnig_rate": 0.1}}})");
  Run r = invoke({"sweep", "--config", (dir / "bad.json").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("denoise.sgd.learnig_rate") != std::string::npos);

  write_file(dir / "type.json", R"({"seeds": "one"})");
  r = invoke({"sweep", "--config", (dir / "type.json").string(), "--out-dir", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("'seeds'") != std::string::npos);

  write_file(dir / "syntax.json", "{ not json");
  CHECK(invoke({"sweep", "--config", (dir / "syntax.json").string(), "--out-dir", dir.string()}).code == 3);
}

TEST_CASE("config round trip") {
  const RunConfig a = parse_config(tiny_sweep);
  const RunConfig b = parse_config(dump_config(a));
  CHECK(dump_config(a) == dump_config(b));
  CHECK(b.experiment.ratios == std::vector<double>{0.25, 1.0});
  CHECK(b.experiment.denoise.crf.num_labels() == 8);
  CHECK_THROWS_AS(parse_config(R"({"denoise": {"crf": {"lambda": -1}}})"), ConfigError);
}

TEST_CASE("svg output is standalone and well formed") {
  const std::vector<MetricRow> rows{
      {"denoise", "gt_only", 0.0, "ssim", 0.1, 10},        {"denoise", "gt_only", 0.1, "ssim", 0.4, 10},
      {"denoise", "bootstrapped", 0.1, "ssim", 0.6, 10},   {"denoise", "bootstrapped", 1.0, "ssim", 0.7, 10},
      {"denoise", "pipeline", std::nullopt, "ssim", 0.65, 3}, {"classify", "student", std::nullopt, "accuracy", 0.9, 7},
  };
  const std::string svg = render_svg(rows);
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=", 0) == 0);
  CHECK(svg.ends_with("</svg>\n"));
  CHECK(svg.find("href") == std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);
  std::size_t open = 0, close = 0;
  for (std::size_t i = 0; i + 1 < svg.size(); ++i) {
    if (svg[i] == '<') ++open;
    if (svg[i] == '>') ++close;
  }
  CHECK(open == close);
}

TEST_CASE("selftest passes and the ssim fault hook is caught") {
  Run r = invoke({"selftest"});
  CHECK(r.code == 0);
  r = invoke({"selftest", "--inject-fault", "ssim"});
  CHECK(r.code == 1);
  CHECK(r.err.find("ssim") != std::string::npos);
  CHECK(r.out.find("FAIL ssim") != std::string::npos);
}
