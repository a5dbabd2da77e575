#pragma once

// Independent reference implementations used only by tests and the selftest.
// They favour obviousness over speed and share no code with the library
// beyond its plain data types.

#include <cstdint>
#include <functional>
#include <vector>

#include "pbnn/graphcut.hpp"
#include "pbnn/rng.hpp"
#include "pbnn/tensor.hpp"

namespace pbnn::oracle {

/// Direct cross-correlation with zero "same" padding; input [N,Cin,H,W], weights [Cout,Cin,k,k].
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Minimum s-t cut capacity by enumerating all 2^n node partitions.
double min_cut(const FlowGraph& g);

/// Energy by direct summation over pixels and 4-neighbour pairs.
double energy(const std::vector<std::size_t>& labels, std::size_t width, std::size_t height, const Tensor& image,
              const CrfParams& p);

struct Best {
  double energy = 0.0;
  std::vector<std::vector<std::size_t>> argmins;  // every minimiser
};

/// Global optimum over all K^n labelings.
Best global_minimum(const Tensor& image, const CrfParams& p);

/// Optimum over every labeling reachable by one alpha-expansion of `labels`.
Best best_expansion(const std::vector<std::size_t>& labels, std::size_t alpha, const Tensor& image,
                    const CrfParams& p);

/// Optimum over every labeling reachable by one alpha-beta swap of `labels`.
Best best_swap(const std::vector<std::size_t>& labels, std::size_t alpha, std::size_t beta, const Tensor& image,
               const CrfParams& p);

/// SSIM with an explicit 2D Gaussian window and per-position weighted sums.
double ssim(const Tensor& a, const Tensor& b, std::size_t window = 11, double sigma = 1.5, double k1 = 0.01,
            double k2 = 0.03, double range = 255.0);

/// Central differences of a scalar function, one coordinate at a time.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

/// max |a - b| / max(max |a|, max |b|, floor).
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8);

/// Uniform values in [lo, hi) drawn from `rng`, optionally pushed at least `gap` away from zero.
Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0, double gap = 0.0);

/// Least-squares line y = a x + b through the points.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pbnn::oracle
