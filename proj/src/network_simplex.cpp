// Transportation simplex (the bipartite special case of network simplex).
//
// The basis is a spanning tree on rows + columns with exactly rows+cols-1
// cells, degenerate zero-flow cells included. Pricing is Dantzig's rule with
// ties to the lowest row-major cell; after a run of degenerate pivots the
// solver switches to Bland's rule for good, which cannot cycle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "eviflow/errors.hpp"
#include "eviflow/transport.hpp"

namespace eviflow::detail {

namespace {

struct TreeEdge {
  std::size_t node;
  std::size_t cell;
};

class TransportTableau {
 public:
  TransportTableau(std::span<const double> cost, std::span<const double> supply,
                   std::span<const double> demand)
      : cost_(cost), rows_(supply.size()), cols_(demand.size()),
        flow_(rows_ * cols_, 0.0), basic_(rows_ * cols_, false),
        u_(rows_), v_(cols_), adjacency_(rows_ + cols_) {
    north_west_corner(supply, demand);
  }

  TransportSolution solve() {
    double max_cost = 0.0;
    for (double c : cost_) max_cost = std::max(max_cost, std::abs(c));
    const double tolerance = 1e-13 * std::max(1.0, max_cost);
    const std::size_t pivot_limit = 50 * rows_ * cols_ + 1000;
    const std::size_t degenerate_limit = rows_ + cols_;

    std::size_t pivots = 0;
    std::size_t degenerate_streak = 0;
    bool bland = false;
    while (true) {
      build_tree();
      compute_potentials();
      const std::size_t entering = price(tolerance, bland);
      if (entering == kNone) break;
      if (++pivots > pivot_limit) {
        throw IterationLimitError(
            fmt::format("transportation simplex exceeded {} pivots", pivot_limit), 0.0);
      }
      const double step = pivot(entering);
      if (step == 0.0) {
        if (++degenerate_streak > degenerate_limit) bland = true;
      } else {
        degenerate_streak = 0;
      }
    }

    build_tree();
    compute_potentials();
    return TransportSolution{std::move(flow_), std::move(u_), std::move(v_), pivots};
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  void north_west_corner(std::span<const double> supply, std::span<const double> demand) {
    std::vector<double> s(supply.begin(), supply.end());
    std::vector<double> d(demand.begin(), demand.end());
    std::size_t i = 0, j = 0;
    while (true) {
      const std::size_t cell = i * cols_ + j;
      basic_[cell] = true;
      if (i == rows_ - 1 && j == cols_ - 1) {
        // Whatever is left; differs from d[j] only by rounding.
        flow_[cell] = std::max(0.0, s[i]);
        break;
      }
      const bool advance_row = (j == cols_ - 1) || (i < rows_ - 1 && s[i] <= d[j]);
      if (advance_row) {
        flow_[cell] = s[i];
        d[j] = std::max(0.0, d[j] - s[i]);
        s[i] = 0.0;
        ++i;
      } else {
        flow_[cell] = d[j];
        s[i] = std::max(0.0, s[i] - d[j]);
        d[j] = 0.0;
        ++j;
      }
    }
  }

  void build_tree() {
    for (auto& a : adjacency_) a.clear();
    for (std::size_t cell = 0; cell < basic_.size(); ++cell) {
      if (!basic_[cell]) continue;
      const std::size_t i = cell / cols_, j = cell % cols_;
      adjacency_[i].push_back({rows_ + j, cell});
      adjacency_[rows_ + j].push_back({i, cell});
    }
  }

  void compute_potentials() {
    std::vector<bool> seen(rows_ + cols_, false);
    std::vector<std::size_t> queue{0};
    seen[0] = true;
    u_[0] = 0.0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t node = queue[head];
      for (const TreeEdge& e : adjacency_[node]) {
        if (seen[e.node]) continue;
        seen[e.node] = true;
        const std::size_t i = e.cell / cols_, j = e.cell % cols_;
        if (node < rows_) {
          v_[j] = cost_[e.cell] - u_[i];
        } else {
          u_[i] = cost_[e.cell] - v_[j];
        }
        queue.push_back(e.node);
      }
    }
  }

  std::size_t price(double tolerance, bool bland) const {
    std::size_t entering = kNone;
    double best = -tolerance;
    for (std::size_t cell = 0; cell < basic_.size(); ++cell) {
      if (basic_[cell]) continue;
      const double reduced = cost_[cell] - u_[cell / cols_] - v_[cell % cols_];
      if (reduced < best) {
        if (bland) return cell;
        best = reduced;
        entering = cell;
      }
    }
    return entering;
  }

  // Pushes flow around the cycle closed by the entering cell and returns the
  // step length.
  double pivot(std::size_t entering) {
    const std::size_t row = entering / cols_;
    const std::size_t col_node = rows_ + entering % cols_;

    // Tree path from the entering column back to the entering row.
    std::vector<std::size_t> parent_cell(rows_ + cols_, kNone);
    std::vector<std::size_t> parent_node(rows_ + cols_, kNone);
    std::vector<std::size_t> queue{row};
    parent_node[row] = row;
    for (std::size_t head = 0; head < queue.size() && parent_node[col_node] == kNone; ++head) {
      const std::size_t node = queue[head];
      for (const TreeEdge& e : adjacency_[node]) {
        if (parent_node[e.node] != kNone) continue;
        parent_node[e.node] = node;
        parent_cell[e.node] = e.cell;
        queue.push_back(e.node);
      }
    }

    std::vector<std::size_t> cycle;  // path cells; even positions lose flow
    for (std::size_t node = col_node; node != row; node = parent_node[node]) {
      cycle.push_back(parent_cell[node]);
    }

    std::size_t leaving = kNone;
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const std::size_t cell = cycle[k];
      if (flow_[cell] < step || (flow_[cell] == step && cell < leaving)) {
        step = flow_[cell];
        leaving = cell;
      }
    }

    for (std::size_t k = 0; k < cycle.size(); ++k) {
      const std::size_t cell = cycle[k];
      flow_[cell] = (k % 2 == 0) ? std::max(0.0, flow_[cell] - step) : flow_[cell] + step;
    }
    flow_[entering] = step;
    flow_[leaving] = 0.0;
    basic_[leaving] = false;
    basic_[entering] = true;
    return step;
  }

  std::span<const double> cost_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> flow_;
  std::vector<bool> basic_;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<std::vector<TreeEdge>> adjacency_;
};

}  // namespace

TransportSolution solve_transportation(std::span<const double> cost, std::span<const double> supply,
                                       std::span<const double> demand) {
  if (supply.empty() || demand.empty()) {
    throw std::invalid_argument("transportation problem needs at least one source and sink");
  }
  if (cost.size() != supply.size() * demand.size()) {
    throw std::invalid_argument("cost matrix does not match supply x demand");
  }
  for (double s : supply)
    if (!(s > 0.0)) throw std::invalid_argument("supplies must be positive");
  for (double d : demand)
    if (!(d > 0.0)) throw std::invalid_argument("demands must be positive");
  return TransportTableau(cost, supply, demand).solve();
}

}  // namespace eviflow::detail
