#include "pbnn/data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>

namespace pbnn {

Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw NegativeSigma(fmt::format("noise sigma {} is negative", sigma));
  Tensor out = image;
  if (sigma == 0.0) return out;
  for (double& v : out.flat()) v = std::clamp(v + sigma * rng.normal(), 0.0, 255.0);
  return out;
}

std::vector<Tensor> sample_patches(const std::vector<Tensor>& images, std::size_t patch, std::size_t count, Rng& rng) {
  std::vector<Tensor> out;
  if (count == 0) return out;
  if (images.empty()) throw BadParams("no images to sample patches from");
  if (patch == 0) throw BadParams("patch size must be positive");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    if (im.rank() != 2) throw ShapeError(fmt::format("image {} is not [H,W]", i));
    if (im.dim(0) < patch || im.dim(1) < patch) {
      throw PatchTooLarge(fmt::format("patch {0}x{0} exceeds image {1} of size {2}x{3}", patch, i, im.dim(0),
                                      im.dim(1)));
    }
  }
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto& im = images[rng.uniform_int(images.size())];
    const std::size_t y0 = rng.uniform_int(im.dim(0) - patch + 1);
    const std::size_t x0 = rng.uniform_int(im.dim(1) - patch + 1);
    RowMatrix block = im.image().block(static_cast<Eigen::Index>(y0), static_cast<Eigen::Index>(x0),
                                       static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(patch));
    out.emplace_back(Shape{patch, patch}, Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(block.data(), block.size())));
  }
  return out;
}

std::vector<double> intensity_levels(std::size_t num_levels) {
  std::vector<double> levels(num_levels);
  for (std::size_t i = 0; i < num_levels; ++i) {
    levels[i] = std::round(255.0 * static_cast<double>(i) / static_cast<double>(num_levels - 1));
  }
  return levels;
}

std::vector<Tensor> synth_shapes(std::size_t count, std::size_t size, std::size_t num_levels, Rng& rng) {
  if (size < 8) throw BadParams(fmt::format("synthetic image size {} is below 8", size));
  if (num_levels < 2) throw BadParams(fmt::format("need at least 2 intensity levels, got {}", num_levels));
  const auto levels = intensity_levels(num_levels);
  const double s = static_cast<double>(size);
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Tensor im({size, size}, levels[rng.uniform_int(num_levels)]);
    const std::size_t shapes = 2 + rng.uniform_int(4);
    for (std::size_t k = 0; k < shapes; ++k) {
      const double level = levels[rng.uniform_int(num_levels)];
      const bool disc = rng.uniform_int(2) == 1;
      const double cy = rng.uniform(0.0, s);
      const double cx = rng.uniform(0.0, s);
      const double ry = rng.uniform(s / 8.0, s / 3.0);
      const double rx = disc ? ry : rng.uniform(s / 8.0, s / 3.0);
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
          const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
          const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          if (inside) im(y, x) = level;
        }
      }
    }
    out.push_back(std::move(im));
  }
  return out;
}

Dataset synth_classification(std::size_t count, std::size_t num_classes, std::size_t size, Rng& rng) {
  if (num_classes < 2) throw BadParams(fmt::format("need at least 2 classes, got {}", num_classes));
  if (size < 8) throw BadParams(fmt::format("classification image size {} is below 8", size));
  const double s = static_cast<double>(size);
  Dataset d{{}, DatasetRole::ground_truth};
  d.examples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int cls = static_cast<int>(i % num_classes);
    const double angle = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(num_classes);
    const double ux = std::cos(angle);
    const double uy = std::sin(angle);
    const double cx = rng.uniform(0.3 * s, 0.7 * s);
    const double cy = rng.uniform(0.3 * s, 0.7 * s);
    const double half_length = rng.uniform(0.2 * s, 0.35 * s);
    const double half_width = rng.uniform(0.6, 1.4);
    const double background = rng.uniform(90.0, 166.0);
    const double contrast = rng.uniform(50.0, 90.0);
    Tensor im({1, size, size});
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double px = static_cast<double>(x) + 0.5 - cx;
        const double py = static_cast<double>(y) + 0.5 - cy;
        const double along = px * ux + py * uy;
        const double across = -px * uy + py * ux;
        const double excess = std::max(std::abs(along) - half_length, 0.0);
        const double dist = std::hypot(excess, across);
        const double cover = std::clamp(half_width + 0.5 - dist, 0.0, 1.0);
        im(0, y, x) = background + contrast * cover;
      }
    }
    d.examples.push_back({add_gaussian_noise(im, 24.0, rng), cls, LabelSource::ground_truth});
  }
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw BadParams(fmt::format("split fraction {} outside [0,1]", fraction));
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  const auto first_count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d.size()) + 0.5));
  std::pair<Dataset, Dataset> out{Dataset{{}, d.role}, Dataset{{}, d.role}};
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < first_count ? out.first : out.second).examples.push_back(d.examples[order[k]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderScanner {
 public:
  explicit HeaderScanner(const std::string& s) : s_(s) {}

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(s_[pos_] - '0');
      if (v > 1'000'000'000) throw MalformedHeader(fmt::format("PGM {} is too large", what));
      ++pos_;
    }
    if (pos_ == start) throw MalformedHeader(fmt::format("PGM header: expected {}", what));
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw MalformedHeader("not a binary PGM (P5) file");
  HeaderScanner scan(bytes);
  scan.advance();
  scan.advance();
  const std::size_t width = scan.number("width");
  const std::size_t height = scan.number("height");
  const std::size_t maxval = scan.number("maxval");
  if (width == 0 || height == 0) throw MalformedHeader("PGM dimensions must be positive");
  if (maxval != 255) throw UnsupportedMaxval(fmt::format("PGM maxval {} is not supported (only 255)", maxval));
  if (scan.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[scan.pos()]))) {
    throw MalformedHeader("PGM header must end with one whitespace byte");
  }
  const std::size_t start = scan.pos() + 1;
  if (bytes.size() - start < width * height) {
    throw TruncatedFile(fmt::format("PGM payload has {} bytes, expected {}", bytes.size() - start, width * height));
  }
  Tensor out({height, width});
  for (std::size_t i = 0; i < width * height; ++i) out[i] = static_cast<unsigned char>(bytes[start + i]);
  return out;
}

std::string encode_pgm(const Tensor& image) {
  if (image.rank() != 2) throw ShapeError(fmt::format("PGM needs [H,W], got {}", shape_string(image.shape())));
  std::string out = fmt::format("P5\n{} {}\n255\n", image.dim(1), image.dim(0));
  out.reserve(out.size() + image.size());
  for (double v : image.flat()) out.push_back(static_cast<char>(static_cast<unsigned char>(std::round(std::clamp(v, 0.0, 255.0)))));
  return out;
}

Tensor load_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

void save_pgm(const std::filesystem::path& path, const Tensor& image) { write_file(path, encode_pgm(image)); }

// ---------------------------------------------------------------------------
// CIFAR-10

Dataset decode_cifar10(const std::string& bytes) {
  if (bytes.size() % cifar10_record_size != 0) {
    throw TruncatedFile(fmt::format("CIFAR-10 batch size {} is not a multiple of {}", bytes.size(),
                                    cifar10_record_size));
  }
  Dataset d{{}, DatasetRole::ground_truth};
  const std::size_t records = bytes.size() / cifar10_record_size;
  d.examples.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * cifar10_record_size;
    const int label = static_cast<unsigned char>(bytes[base]);
    if (label >= 10) throw LabelOutOfRange(fmt::format("CIFAR-10 record {} has label {}", r, label));
    Tensor im({3, 32, 32});
    for (std::size_t i = 0; i < 3072; ++i) im[i] = static_cast<unsigned char>(bytes[base + 1 + i]);
    d.examples.push_back({std::move(im), label, LabelSource::ground_truth});
  }
  return d;
}

Dataset load_cifar10_batch(const std::filesystem::path& path) { return decode_cifar10(read_file(path)); }

// ---------------------------------------------------------------------------
// files and manifests

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(fmt::format("write failed: {}", path.string()));
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string out = manifest_header;
  out.push_back('\n');
  for (const auto& e : entries) {
    if (e.path.find(',') != std::string::npos || e.role.find(',') != std::string::npos) {
      throw IoError(fmt::format("manifest field contains a comma: {}", e.path));
    }
    out += fmt::format("{},{},{}\n", e.path, e.role, e.index);
  }
  write_file(path, out);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != manifest_header) {
    throw MalformedHeader(fmt::format("{}: expected manifest header '{}'", path.string(), manifest_header));
  }
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw MalformedHeader(fmt::format("{}: bad manifest line '{}'", path.string(), line));
    ManifestEntry e{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), 0};
    try {
      e.index = std::stoul(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw MalformedHeader(fmt::format("{}: bad manifest index in '{}'", path.string(), line));
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace pbnn
