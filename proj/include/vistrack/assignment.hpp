#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace vistrack {

/// Result of a rectangular assignment solve. Pairs are sorted by row index;
/// total_cost sums the matched entries in that order.
struct AssignmentResult {
  std::vector<std::pair<int, int>> pairs;
  double total_cost = 0.0;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Min-cost matching of maximum cardinality by successive shortest augmenting
// paths with potentials. Forbidden (+inf) edges are simply absent from the
// graph; `row_allowed`/`col_allowed` restrict the solve to a sub-problem.
// Costs must be pre-shifted to be non-negative.
struct SspSolver {
  const Eigen::MatrixXd& cost;
  std::vector<char> row_allowed, col_allowed;
  std::vector<int> match_row, match_col;  // -1 = unmatched
  std::vector<double> pot_row, pot_col;

  explicit SspSolver(const Eigen::MatrixXd& c)
      : cost(c),
        row_allowed(c.rows(), 1),
        col_allowed(c.cols(), 1),
        match_row(c.rows(), -1),
        match_col(c.cols(), -1),
        pot_row(c.rows(), 0.0),
        pot_col(c.cols(), 0.0) {}

  // One multi-source Dijkstra over reduced costs; augments along the
  // cheapest path to an unmatched column. Returns false when no augmenting
  // path exists (maximum cardinality reached).
  bool augment() {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    std::vector<double> dist(m, kInf);
    std::vector<int> from_row(m, -1);
    std::vector<char> done(m, 0);
    std::vector<double> row_dist(n, kInf);

    for (int i = 0; i < n; ++i) {
      if (!row_allowed[i] || match_row[i] >= 0) continue;
      row_dist[i] = 0.0;
      for (int j = 0; j < m; ++j) {
        if (!col_allowed[j]) continue;
        const double c = cost(i, j);
        if (!std::isfinite(c)) continue;
        const double d = c - pot_row[i] - pot_col[j];
        if (d < dist[j]) {
          dist[j] = d;
          from_row[j] = i;
        }
      }
    }

    int end_col = -1;
    while (true) {
      int j_best = -1;
      double d_best = kInf;
      for (int j = 0; j < m; ++j) {
        if (done[j] || !col_allowed[j]) continue;
        if (dist[j] < d_best) {
          d_best = dist[j];
          j_best = j;
        }
      }
      if (j_best < 0) break;  // nothing reachable remains
      done[j_best] = 1;
      if (match_col[j_best] < 0) {
        end_col = j_best;
        break;
      }
      // Relax through the row matched to j_best.
      const int i = match_col[j_best];
      row_dist[i] = d_best + cost(i, j_best) - pot_row[i] - pot_col[j_best];
      for (int j = 0; j < m; ++j) {
        if (done[j] || !col_allowed[j]) continue;
        const double c = cost(i, j);
        if (!std::isfinite(c)) continue;
        const double d = row_dist[i] + c - pot_row[i] - pot_col[j];
        if (d < dist[j]) {
          dist[j] = d;
          from_row[j] = i;
        }
      }
    }
    if (end_col < 0) return false;

    // Update potentials to keep reduced costs non-negative.
    const double d_end = dist[end_col];
    for (int j = 0; j < m; ++j)
      if (done[j] && col_allowed[j]) pot_col[j] += dist[j] - d_end;
    for (int i = 0; i < static_cast<int>(cost.rows()); ++i)
      if (row_allowed[i] && row_dist[i] < d_end) pot_row[i] += d_end - row_dist[i];

    // Walk back along the alternating path and flip matches.
    int j = end_col;
    while (j >= 0) {
      const int i = from_row[j];
      const int j_prev = match_row[i];
      match_row[i] = j;
      match_col[j] = i;
      j = j_prev;
    }
    return true;
  }

  // Solves to max cardinality; returns (cardinality, total shifted cost).
  std::pair<int, double> run() {
    int k = 0;
    while (augment()) ++k;
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(cost.rows()); ++i)
      if (match_row[i] >= 0) total += cost(i, match_row[i]);
    return {k, total};
  }
};

inline std::pair<int, double> solve_restricted(const Eigen::MatrixXd& shifted,
                                               const std::vector<char>& row_allowed,
                                               const std::vector<char>& col_allowed) {
  SspSolver s(shifted);
  s.row_allowed = row_allowed;
  s.col_allowed = col_allowed;
  return s.run();
}

}  // namespace detail

/// Minimum-cost assignment on a rectangular cost matrix. +inf entries mark
/// forbidden pairs; rows prefer staying unmatched over using one. Among all
/// maximum-cardinality feasible assignments the cheapest is returned, and
/// among equally cheap ones the lexicographically smallest pair sequence.
inline AssignmentResult solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0 || m == 0) throw std::invalid_argument("empty cost matrix");

  double min_finite = detail::kInf;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (std::isnan(c) || c == -detail::kInf)
        throw std::invalid_argument("cost entries must be finite or +inf");
      if (std::isfinite(c)) min_finite = std::min(min_finite, c);
    }
  if (!std::isfinite(min_finite)) return AssignmentResult{};  // everything forbidden

  Eigen::MatrixXd shifted = cost;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (std::isfinite(shifted(i, j))) shifted(i, j) -= min_finite;

  detail::SspSolver base(shifted);
  const auto [k_opt, c_opt] = base.run();

  // Lexicographic canonicalization: fix rows top-down to the smallest column
  // that still admits an optimal completion. Dual feasibility lets us skip
  // candidates whose reduced cost is positive; they are in no optimal set.
  const double tol = 1e-9 * std::max(1.0, std::abs(c_opt));
  std::vector<char> row_left(n, 1), col_left(m, 1);
  int k_fixed = 0;
  double c_fixed = 0.0;
  AssignmentResult result;
  for (int i = 0; i < n && k_fixed < k_opt; ++i) {
    row_left[i] = 0;
    int chosen = -1;
    for (int j = 0; j < m; ++j) {
      if (!col_left[j] || !std::isfinite(shifted(i, j))) continue;
      if (shifted(i, j) - base.pot_row[i] - base.pot_col[j] > tol) continue;  // not tight
      col_left[j] = 0;
      const auto [k_sub, c_sub] = detail::solve_restricted(shifted, row_left, col_left);
      col_left[j] = 1;
      if (k_fixed + 1 + k_sub == k_opt && c_fixed + shifted(i, j) + c_sub <= c_opt + tol) {
        chosen = j;
        break;
      }
    }
    if (chosen >= 0) {
      col_left[chosen] = 0;
      ++k_fixed;
      c_fixed += shifted(i, chosen);
      result.pairs.emplace_back(i, chosen);
    }
  }
  for (const auto& [i, j] : result.pairs) result.total_cost += cost(i, j);
  return result;
}

}  // namespace vistrack
