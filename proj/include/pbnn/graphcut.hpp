#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pbnn/tensor.hpp"

namespace pbnn {

/// Multiply and add counts gathered by instrumented pipeline code.
struct OpCounter {
  std::uint64_t adds = 0;
  std::uint64_t muls = 0;
  std::uint64_t total() const noexcept { return adds + muls; }
  OpCounter& operator+=(const OpCounter& o) {
    adds += o.adds;
    muls += o.muls;
    return *this;
  }
};

// ---------------------------------------------------------------------------
// max-flow / min-cut

/// Directed s-t flow network. Nodes are 0..node_count()-1; the terminals are
/// addressed with FlowGraph::source and FlowGraph::sink.
class FlowGraph {
 public:
  using Node = std::int64_t;
  static constexpr Node source = -1;
  static constexpr Node sink = -2;

  struct Arc {
    Node from;
    Node to;
    double capacity;
  };

  explicit FlowGraph(std::size_t nodes = 0) : node_count_(nodes) {}

  Node add_node() { return static_cast<Node>(node_count_++); }
  std::size_t node_count() const noexcept { return node_count_; }

  /// Capacity must be non-negative and not NaN; +inf is allowed.
  void add_arc(Node from, Node to, double capacity);
  /// Arcs i->j and j->i.
  void add_edge(Node i, Node j, double cap_ij, double cap_ji);
  /// Arcs source->i and i->sink.
  void add_terminal_weights(Node i, double cap_source, double cap_sink);

  const std::vector<Arc>& arcs() const noexcept { return arcs_; }

 private:
  void check(Node n) const;

  std::size_t node_count_;
  std::vector<Arc> arcs_;
};

enum class CutSide : std::uint8_t { source, sink };

struct MaxFlowResult {
  double value = 0.0;
  std::vector<CutSide> side;  // per non-terminal node
};

/// Maximum s-t flow by shortest augmenting paths (Dinic's blocking-flow
/// phases over breadth-first level graphs). Nodes reachable from the source
/// in the final residual graph are placed on the source side.
MaxFlowResult max_flow(const FlowGraph& g, OpCounter* ops = nullptr);

/// Sum of capacities of arcs leaving the source side of `side`.
double cut_capacity(const FlowGraph& g, const std::vector<CutSide>& side);

// ---------------------------------------------------------------------------
// CRF energy

/// Grid CRF over 4-connected pixels:
///   E(f) = sum_p min((v[f_p] - I_p)^2, data_trunc)
///        + sum_{p~q} lambda * min(|v[f_p] - v[f_q]|, smooth_trunc)
struct CrfParams {
  std::vector<double> label_values;
  double lambda = 4.0;
  double smooth_trunc = 32.0;
  double data_trunc = std::numeric_limits<double>::infinity();

  std::size_t num_labels() const noexcept { return label_values.size(); }

  /// K labels spaced uniformly over [0, 255].
  static CrfParams uniform(std::size_t num_labels, double lambda = 4.0, double smooth_trunc = 32.0,
                           double data_trunc = std::numeric_limits<double>::infinity());

  double data_cost(std::size_t label, double intensity) const;
  double smoothness(std::size_t a, std::size_t b) const;

  /// Throws BadCrfParams for malformed values.
  void validate() const;
  /// Throws NonMetricSmoothness unless V is a metric over the label set.
  void require_metric() const;
};

struct Labeling {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::size_t> labels;  // row-major

  Labeling() = default;
  Labeling(std::size_t width, std::size_t height, std::size_t fill = 0)
      : width(width), height(height), labels(width * height, fill) {}

  std::size_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::size_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }

  friend bool operator==(const Labeling&, const Labeling&) = default;
};

struct Energy {
  double total = 0.0;
  double data = 0.0;
  double smooth = 0.0;
};

Energy energy(const Labeling& f, const Tensor& image, const CrfParams& p, OpCounter* ops = nullptr);

// ---------------------------------------------------------------------------
// move making

/// Optimal alpha-expansion of f via one min cut, with an auxiliary node
/// between neighbours holding different labels.
Labeling expansion_move(const Labeling& f, std::size_t alpha, const Tensor& image, const CrfParams& p,
                        OpCounter* ops = nullptr);

/// Optimal relabelling of the pixels labelled alpha or beta between those two labels.
Labeling swap_move(const Labeling& f, std::size_t alpha, std::size_t beta, const Tensor& image, const CrfParams& p,
                   OpCounter* ops = nullptr);

struct MoveTrace {
  Labeling labeling;
  std::vector<double> energies;  // energy after every attempted move, starting with the initial energy
  std::size_t cycles = 0;
  std::size_t accepted = 0;
};

/// Expansion cycles over labels in ascending order until a full cycle
/// brings no strict decrease.
MoveTrace alpha_expansion_trace(const Tensor& image, const CrfParams& p, const Labeling& init,
                                OpCounter* ops = nullptr);
Labeling alpha_expansion(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops = nullptr);

/// Swap cycles over label pairs (alpha < beta, lexicographic) until no strict decrease.
MoveTrace alpha_beta_swap_trace(const Tensor& image, const CrfParams& p, const Labeling& init,
                                OpCounter* ops = nullptr);
Labeling alpha_beta_swap(const Tensor& image, const CrfParams& p, const Labeling& init, OpCounter* ops = nullptr);

/// Per-pixel nearest label (lowest index on ties).
Labeling nearest_labeling(const Tensor& image, const CrfParams& p);

/// Intensity image of a labeling.
Tensor render(const Labeling& f, const CrfParams& p);

enum class MoveSchedule { expansion, expansion_then_swap };

struct DenoiseResult {
  Tensor image;
  Labeling labeling;
  double energy = 0.0;
  OpCounter ops;
};

/// The target denoising pipeline: nearest-label initialisation, expansion
/// moves to convergence, labels mapped back to intensities.
DenoiseResult denoise_detailed(const Tensor& image, const CrfParams& p,
                               MoveSchedule schedule = MoveSchedule::expansion);
Tensor denoise(const Tensor& image, const CrfParams& p);

}  // namespace pbnn
