#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pbnn/graphcut.hpp"

namespace pbnn {

void FlowGraph::check(Node n) const {
  if (n == source || n == sink) return;
  if (n < 0 || static_cast<std::size_t>(n) >= node_count_) {
    throw BadParams(fmt::format("flow graph node {} out of range (node count {})", n, node_count_));
  }
}

void FlowGraph::add_arc(Node from, Node to, double capacity) {
  check(from);
  check(to);
  if (!(capacity >= 0.0)) throw BadParams(fmt::format("arc capacity {} is negative or NaN", capacity));
  if (from == to || capacity == 0.0) return;
  arcs_.push_back({from, to, capacity});
}

void FlowGraph::add_edge(Node i, Node j, double cap_ij, double cap_ji) {
  add_arc(i, j, cap_ij);
  add_arc(j, i, cap_ji);
}

void FlowGraph::add_terminal_weights(Node i, double cap_source, double cap_sink) {
  add_arc(source, i, cap_source);
  add_arc(i, sink, cap_sink);
}

namespace {

// Residual network in CSR form; terminals are nodes n and n+1.
class Residual {
 public:
  explicit Residual(const FlowGraph& g) : n_(g.node_count() + 2), s_(g.node_count()), t_(g.node_count() + 1) {
    const auto& arcs = g.arcs();
    std::vector<std::size_t> degree(n_, 0);
    for (const auto& a : arcs) {
      ++degree[index(a.from)];
      ++degree[index(a.to)];
    }
    first_.assign(n_ + 1, 0);
    for (std::size_t v = 0; v < n_; ++v) first_[v + 1] = first_[v] + degree[v];
    head_.resize(first_[n_]);
    cap_.resize(first_[n_]);
    rev_.resize(first_[n_]);
    std::vector<std::size_t> fill(first_.begin(), first_.end() - 1);
    for (const auto& a : arcs) {
      const std::size_t u = index(a.from);
      const std::size_t v = index(a.to);
      const std::size_t e = fill[u]++;
      const std::size_t r = fill[v]++;
      head_[e] = v;
      cap_[e] = a.capacity;
      rev_[e] = r;
      head_[r] = u;
      cap_[r] = 0.0;
      rev_[r] = e;
    }
    level_.resize(n_);
    current_.resize(n_);
  }

  double run(OpCounter* ops) {
    double flow = 0.0;
    while (build_levels()) {
      std::copy(first_.begin(), first_.end() - 1, current_.begin());
      for (;;) {
        const double pushed = augment(s_, std::numeric_limits<double>::infinity(), ops);
        if (pushed <= 0.0) break;
        flow += pushed;
        if (ops) ++ops->adds;
        if (std::isinf(pushed)) return pushed;
      }
    }
    return flow;
  }

  std::vector<CutSide> source_side() {
    build_levels();
    std::vector<CutSide> side(n_ - 2);
    for (std::size_t v = 0; v + 2 < n_; ++v) side[v] = level_[v] >= 0 ? CutSide::source : CutSide::sink;
    return side;
  }

 private:
  std::size_t index(FlowGraph::Node v) const {
    if (v == FlowGraph::source) return s_;
    if (v == FlowGraph::sink) return t_;
    return static_cast<std::size_t>(v);
  }

  // Breadth-first distances from the source over arcs with residual capacity.
  bool build_levels() {
    std::fill(level_.begin(), level_.end(), -1);
    queue_.clear();
    queue_.push_back(s_);
    level_[s_] = 0;
    for (std::size_t qi = 0; qi < queue_.size(); ++qi) {
      const std::size_t u = queue_[qi];
      for (std::size_t e = first_[u]; e < first_[u + 1]; ++e) {
        const std::size_t v = head_[e];
        if (cap_[e] > 0.0 && level_[v] < 0) {
          level_[v] = level_[u] + 1;
          queue_.push_back(v);
        }
      }
    }
    return level_[t_] >= 0;
  }

  double augment(std::size_t u, double limit, OpCounter* ops) {
    if (u == t_) return limit;
    for (std::size_t& e = current_[u]; e < first_[u + 1]; ++e) {
      const std::size_t v = head_[e];
      if (cap_[e] <= 0.0 || level_[v] != level_[u] + 1) continue;
      const double pushed = augment(v, std::min(limit, cap_[e]), ops);
      if (pushed > 0.0) {
        cap_[e] -= pushed;
        cap_[rev_[e]] += pushed;
        if (ops) ops->adds += 2;
        return pushed;
      }
    }
    return 0.0;
  }

  std::size_t n_, s_, t_;
  std::vector<std::size_t> first_, head_, rev_, current_, queue_;
  std::vector<double> cap_;
  std::vector<int> level_;
};

}  // namespace

MaxFlowResult max_flow(const FlowGraph& g, OpCounter* ops) {
  Residual r(g);
  MaxFlowResult out;
  out.value = r.run(ops);
  out.side = r.source_side();
  return out;
}

double cut_capacity(const FlowGraph& g, const std::vector<CutSide>& side) {
  if (side.size() != g.node_count()) throw BadParams("cut assignment size differs from node count");
  auto on_source = [&](FlowGraph::Node v) {
    if (v == FlowGraph::source) return true;
    if (v == FlowGraph::sink) return false;
    return side[static_cast<std::size_t>(v)] == CutSide::source;
  };
  double total = 0.0;
  for (const auto& a : g.arcs()) {
    if (on_source(a.from) && !on_source(a.to)) total += a.capacity;
  }
  return total;
}

}  // namespace pbnn
