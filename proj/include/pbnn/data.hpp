#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pbnn/dataset.hpp"
#include "pbnn/rng.hpp"

namespace pbnn {

/// Adds independent N(0, sigma^2) noise per pixel, then clamps to [0, 255].
Tensor add_gaussian_noise(const Tensor& image, double sigma, Rng& rng);

/// `count` patches; for each, the image index, then row, then column are
/// drawn uniformly from `rng`. Images are [H, W].
std::vector<Tensor> sample_patches(const std::vector<Tensor>& images, std::size_t patch, std::size_t count, Rng& rng);

/// Evenly spaced intensities 0 .. 255 used by synth_shapes.
std::vector<double> intensity_levels(std::size_t num_levels);

/// Piecewise-constant [size, size] images: a background plus random
/// rectangles and discs, every region taking one of intensity_levels(num_levels).
std::vector<Tensor> synth_shapes(std::size_t count, std::size_t size, std::size_t num_levels, Rng& rng);

/// Balanced oriented-bar classification images [1, size, size].
///
/// Class c is a bar at angle c*pi/num_classes with random position, length,
/// width and (positive) contrast over a noisy background. Example i has class
/// i % num_classes.
Dataset synth_classification(std::size_t count, std::size_t num_classes, std::size_t size, Rng& rng);

/// Seeded shuffle split; the first part holds round(fraction * N) examples.
std::pair<Dataset, Dataset> split(const Dataset& d, double fraction, Rng& rng);

/// Binary greyscale PGM (P5, maxval 255).
Tensor load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const Tensor& image);
Tensor decode_pgm(const std::string& bytes);
std::string encode_pgm(const Tensor& image);

/// CIFAR-10 binary batch: records of one label byte and 3072 pixel bytes
/// (R, G, B planes, each 32x32 row-major).
Dataset load_cifar10_batch(const std::filesystem::path& path);
Dataset decode_cifar10(const std::string& bytes);

inline constexpr std::size_t cifar10_record_size = 3073;

/// One line of a dataset manifest: file path, role tag and the pairing index.
struct ManifestEntry {
  std::string path;
  std::string role;
  std::size_t index = 0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr const char* manifest_header = "path,role,index";

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace pbnn
