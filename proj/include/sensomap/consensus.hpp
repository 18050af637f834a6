#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensomap/rng.hpp"
#include "sensomap/similarity.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

// Maps normalized strengths to layout targets: strong pairs sit close, capped
// below by floor_distance so identical samples never demand distance zero.
inline DistanceMatrix target_distances(const GlobalSimilarityMatrix& g, double floor_distance) {
  if (!(floor_distance > 0.0 && floor_distance < 1.0))
    throw std::invalid_argument("floor distance must be in (0, 1)");
  const Eigen::MatrixXd norm = normalize_strengths(g);
  const int q = g.sample_count();
  DistanceMatrix t = DistanceMatrix::Zero(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      if (i != j) t(i, j) = std::max(1.0 - norm(i, j), floor_distance);
  return t;
}

struct LayoutSettings {
  std::uint64_t seed = 0;
  int max_iterations = 10000;       // node updates per attempt
  double gradient_tolerance = 1e-4;
  double floor_distance = 0.05;
  int restarts = 6;                 // extra random attempts beyond circle/metric inits
};

struct LayoutResult {
  Eigen::MatrixX2d coords;
  double stress = 0.0;
  int node_updates = 0;
  double initial_stress = 0.0;
};

namespace detail {

// Weighted stress against the target metric, each pair counted once.
inline double layout_stress(const Eigen::MatrixX2d& coords, const DistanceMatrix& t) {
  const int q = static_cast<int>(coords.rows());
  double e = 0.0;
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double w = 1.0 / (t(i, j) * t(i, j));
      const double d = (coords.row(i) - coords.row(j)).norm();
      const double r = d - t(i, j);
      e += w * r * r;
    }
  }
  return e;
}

// Stress restricted to the pairs touching node m.
inline double node_stress(const Eigen::MatrixX2d& coords, const DistanceMatrix& t, int m,
                          double mx, double my) {
  const int q = static_cast<int>(coords.rows());
  double e = 0.0;
  for (int i = 0; i < q; ++i) {
    if (i == m) continue;
    const double w = 1.0 / (t(m, i) * t(m, i));
    const double dx = mx - coords(i, 0);
    const double dy = my - coords(i, 1);
    const double d = std::sqrt(dx * dx + dy * dy);
    const double r = d - t(m, i);
    e += w * r * r;
  }
  return e;
}

inline void node_gradient(const Eigen::MatrixX2d& coords, const DistanceMatrix& t, int m,
                          double& gx, double& gy) {
  const int q = static_cast<int>(coords.rows());
  gx = 0.0;
  gy = 0.0;
  for (int i = 0; i < q; ++i) {
    if (i == m) continue;
    const double w = 1.0 / (t(m, i) * t(m, i));
    const double dx = coords(m, 0) - coords(i, 0);
    const double dy = coords(m, 1) - coords(i, 1);
    double d = std::sqrt(dx * dx + dy * dy);
    if (d < 1e-12) d = 1e-12;
    const double f = 2.0 * w * (1.0 - t(m, i) / d);
    gx += f * dx;
    gy += f * dy;
  }
}

// Single-node descent: Newton step on the 2x2 system when it points downhill,
// gradient direction otherwise, halved until the total stress decreases.
// Returns true when the node moved.
inline bool improve_node(Eigen::MatrixX2d& coords, const DistanceMatrix& t, int m) {
  const int q = static_cast<int>(coords.rows());
  double gx, gy;
  node_gradient(coords, t, m, gx, gy);
  if (gx == 0.0 && gy == 0.0) return false;

  double a = 0.0, b = 0.0, c = 0.0;
  for (int i = 0; i < q; ++i) {
    if (i == m) continue;
    const double w = 1.0 / (t(m, i) * t(m, i));
    const double dx = coords(m, 0) - coords(i, 0);
    const double dy = coords(m, 1) - coords(i, 1);
    double d = std::sqrt(dx * dx + dy * dy);
    if (d < 1e-12) d = 1e-12;
    const double d3 = d * d * d;
    a += 2.0 * w * (1.0 - t(m, i) * dy * dy / d3);
    b += 2.0 * w * t(m, i) * dx * dy / d3;
    c += 2.0 * w * (1.0 - t(m, i) * dx * dx / d3);
  }

  double sx = -gx, sy = -gy;
  const double det = a * c - b * b;
  if (std::abs(det) > 1e-30) {
    const double nx = (-gx * c + gy * b) / det;
    const double ny = (-a * gy + b * gx) / det;
    if (std::isfinite(nx) && std::isfinite(ny) && nx * gx + ny * gy < 0.0) {
      sx = nx;
      sy = ny;
    }
  }

  const double mx = coords(m, 0);
  const double my = coords(m, 1);
  const double local_before = node_stress(coords, t, m, mx, my);
  double step = 1.0;
  for (int tries = 0; tries < 60; ++tries) {
    const double local_after = node_stress(coords, t, m, mx + step * sx, my + step * sy);
    if (local_after < local_before) {
      coords(m, 0) = mx + step * sx;
      coords(m, 1) = my + step * sy;
      return true;
    }
    step *= 0.5;
  }
  return false;
}

// Node-wise descent: repeatedly pick the node with the largest gradient norm
// and settle it. Stress never increases; the loop stops when every gradient
// falls below tolerance, the update budget runs out, or no pick can move.
inline LayoutResult descend(Eigen::MatrixX2d coords, const DistanceMatrix& t,
                            const LayoutSettings& settings) {
  const int q = static_cast<int>(coords.rows());
  LayoutResult result;
  result.initial_stress = layout_stress(coords, t);
  std::vector<bool> stuck(q, false);

  int updates = 0;
  while (updates < settings.max_iterations) {
    int best = -1;
    double best_norm = -1.0;
    for (int m = 0; m < q; ++m) {
      if (stuck[m]) continue;
      double gx, gy;
      node_gradient(coords, t, m, gx, gy);
      const double norm = std::sqrt(gx * gx + gy * gy);
      if (norm > best_norm) {
        best_norm = norm;
        best = m;
      }
    }
    if (best < 0 || best_norm < settings.gradient_tolerance) break;

    // Settle the picked node before choosing the next one.
    bool moved_any = false;
    for (int inner = 0; inner < 40 && updates < settings.max_iterations; ++inner) {
      if (!improve_node(coords, t, best)) break;
      moved_any = true;
      ++updates;
      double gx, gy;
      node_gradient(coords, t, best, gx, gy);
      if (std::sqrt(gx * gx + gy * gy) < settings.gradient_tolerance) break;
    }
    if (moved_any) {
      std::fill(stuck.begin(), stuck.end(), false);
    } else {
      stuck[best] = true;
    }
  }

  result.coords = std::move(coords);
  result.stress = layout_stress(result.coords, t);
  result.node_updates = updates;
  return result;
}

inline Eigen::MatrixX2d circle_init(const DistanceMatrix& t) {
  const int q = static_cast<int>(t.rows());
  double mean = 0.0;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) mean += t(i, j);
  mean /= q * (q - 1) / 2.0;
  const double radius = 0.5 * mean;
  Eigen::MatrixX2d coords(q, 2);
  for (int i = 0; i < q; ++i) {
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * i / q;
    coords(i, 0) = radius * std::cos(angle);
    coords(i, 1) = radius * std::sin(angle);
  }
  return coords;
}

inline Eigen::MatrixX2d random_init(int q, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixX2d coords(q, 2);
  for (int i = 0; i < q; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  return coords;
}

// Classical scaling of the target metric. When the targets embed exactly in the
// plane this lands on the optimum directly, so the polish step cannot be
// trapped by a bad start.
inline Eigen::MatrixX2d metric_init(const DistanceMatrix& t) {
  const int q = static_cast<int>(t.rows());
  Eigen::MatrixXd d2 = t.cwiseProduct(t);
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(q, q) - Eigen::MatrixXd::Constant(q, q, 1.0 / q);
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  Eigen::MatrixX2d coords(q, 2);
  for (int k = 0; k < 2; ++k) {
    const int idx = q - 1 - k;  // eigenvalues ascend
    const double lambda = std::max(solver.eigenvalues()(idx), 0.0);
    coords.col(k) = solver.eigenvectors().col(idx) * std::sqrt(lambda);
  }
  return coords;
}

}  // namespace detail

// Stress-minimizing layout of the target metric. Several deterministic attempts
// are run (circle or seeded-random start per settings.seed, a classical-scaling
// start, then settings.restarts seeded-random starts); the lowest final stress
// wins, ties by attempt order. Output is centered at the origin.
inline LayoutResult kamada_kawai_detailed(const DistanceMatrix& targets,
                                          const LayoutSettings& settings = {}) {
  const int q = static_cast<int>(targets.rows());
  if (targets.cols() != q) throw std::invalid_argument("target matrix must be square");
  if (q < 1) throw std::invalid_argument("empty target matrix");
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      if (!std::isfinite(targets(i, j))) throw std::invalid_argument("non-finite target distance");
      if (i != j && !(targets(i, j) > 0.0))
        throw std::invalid_argument("target distances must be positive off the diagonal");
      if (targets(i, j) != targets(j, i)) throw std::invalid_argument("target matrix must be symmetric");
    }
  }

  if (q == 1) {
    LayoutResult single;
    single.coords = Eigen::MatrixX2d::Zero(1, 2);
    return single;
  }

  LayoutResult best;
  const int attempts = 2 + std::max(settings.restarts, 0);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    Eigen::MatrixX2d init;
    if (attempt == 0) {
      init = settings.seed == 0 ? detail::circle_init(targets)
                                : detail::random_init(q, settings.seed);
    } else if (attempt == 1) {
      init = detail::metric_init(targets);
    } else {
      init = detail::random_init(q, derive_seed(settings.seed, 0x1A70u, attempt));
    }
    LayoutResult r = detail::descend(std::move(init), targets, settings);
    if (attempt == 0) {
      best = r;
    } else if (r.stress < best.stress) {
      const double first_init = best.initial_stress;
      best = r;
      best.initial_stress = first_init;
    }
  }

  best.coords.rowwise() -= best.coords.colwise().mean();
  return best;
}

inline Eigen::MatrixX2d kamada_kawai(const DistanceMatrix& targets,
                                     const LayoutSettings& settings = {}) {
  return kamada_kawai_detailed(targets, settings).coords;
}

// Agglomerative clustering, average linkage, on dissimilarity s_max - s.
// Leaves are 0..q-1, merge t creates node q+t. Children are ordered by their
// smallest member, and ties in the pair search are broken the same way, so the
// tree and its leaf order are deterministic.
struct Dendrogram {
  struct Merge {
    int left;
    int right;
    double height;
  };
  int leaf_count = 0;
  std::vector<Merge> merges;
  std::vector<int> leaf_order;
};

inline Dendrogram hierarchical_cluster(const GlobalSimilarityMatrix& g) {
  const int q = g.sample_count();
  if (q < 2) throw std::invalid_argument("need at least 2 samples");

  double s_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) s_max = std::max(s_max, g.values(i, j));

  struct Cluster {
    int node;
    int size;
    int smallest;
  };
  std::vector<Cluster> active;
  for (int i = 0; i < q; ++i) active.push_back({i, 1, i});

  // Dissimilarities between active clusters, indexed like `active`.
  std::vector<std::vector<double>> dist(q, std::vector<double>(q, 0.0));
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      if (i != j) dist[i][j] = s_max - g.values(i, j);

  Dendrogram dend;
  dend.leaf_count = q;

  std::vector<std::vector<int>> members(2 * q - 1);
  for (int i = 0; i < q; ++i) members[i] = {i};

  for (int step = 0; step < q - 1; ++step) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    int best_small = 0, best_other = 0;
    for (int i = 0; i < static_cast<int>(active.size()); ++i) {
      for (int j = i + 1; j < static_cast<int>(active.size()); ++j) {
        const double d = dist[i][j];
        const int small = std::min(active[i].smallest, active[j].smallest);
        const int other = std::max(active[i].smallest, active[j].smallest);
        const bool better =
            d < best || (d == best && (small < best_small ||
                                       (small == best_small && other < best_other)));
        if (better) {
          best = d;
          bi = i;
          bj = j;
          best_small = small;
          best_other = other;
        }
      }
    }

    const Cluster a = active[bi];
    const Cluster b = active[bj];
    const int left = a.smallest <= b.smallest ? a.node : b.node;
    const int right = a.smallest <= b.smallest ? b.node : a.node;
    dend.merges.push_back({left, right, best});

    const int merged_node = q + step;
    members[merged_node] = members[a.node];
    members[merged_node].insert(members[merged_node].end(), members[b.node].begin(),
                                members[b.node].end());

    // Average linkage via the Lance-Williams update.
    std::vector<double> new_row(active.size(), 0.0);
    for (int k = 0; k < static_cast<int>(active.size()); ++k) {
      if (k == bi || k == bj) continue;
      new_row[k] = (a.size * dist[bi][k] + b.size * dist[bj][k]) / (a.size + b.size);
    }

    Cluster merged{merged_node, a.size + b.size, std::min(a.smallest, b.smallest)};

    // Replace slot bi with the merged cluster, drop slot bj.
    active[bi] = merged;
    for (int k = 0; k < static_cast<int>(active.size()); ++k) {
      dist[bi][k] = new_row[k];
      dist[k][bi] = new_row[k];
    }
    dist[bi][bi] = 0.0;
    active.erase(active.begin() + bj);
    for (auto& row : dist) row.erase(row.begin() + bj);
    dist.erase(dist.begin() + bj);
  }

  // Leaf order by in-order traversal; children are already (smaller, larger).
  std::vector<int> stack = {2 * q - 2};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (node < q) {
      dend.leaf_order.push_back(node);
    } else {
      const auto& merge = dend.merges[node - q];
      stack.push_back(merge.right);
      stack.push_back(merge.left);
    }
  }
  return dend;
}

// Cluster labels from keeping the first q - groups merges. Labels are assigned
// in leaf order, so label blocks are contiguous along the dendrogram.
inline std::vector<int> cut_clusters(const Dendrogram& dend, int groups) {
  const int q = dend.leaf_count;
  if (groups < 1 || groups > q) throw std::invalid_argument("group count must be in 1..q");

  std::vector<int> parent(2 * q - 1);
  for (int i = 0; i < 2 * q - 1; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int t = 0; t < q - groups; ++t) {
    parent[find(dend.merges[t].left)] = q + t;
    parent[find(dend.merges[t].right)] = q + t;
  }

  std::vector<int> label(q, -1);
  std::vector<int> root_label(2 * q - 1, -1);
  int next = 0;
  for (int leaf : dend.leaf_order) {
    const int root = find(leaf);
    if (root_label[root] < 0) root_label[root] = next++;
    label[leaf] = root_label[root];
  }
  return label;
}

// Number of groups left by cutting at the widest gap between consecutive merge
// heights. Returns 1 when there is no interior gap to cut.
inline int suggest_cluster_count(const Dendrogram& dend) {
  const int q = dend.leaf_count;
  if (q < 3) return 1;
  int best_t = -1;
  double best_gap = 0.0;
  for (int t = 0; t + 1 < q - 1; ++t) {
    const double gap = dend.merges[t + 1].height - dend.merges[t].height;
    if (gap > best_gap) {
      best_gap = gap;
      best_t = t;
    }
  }
  if (best_t < 0) return 1;
  return q - (best_t + 1);
}

struct ReorderedMatrix {
  GlobalSimilarityMatrix matrix;
  std::vector<int> permutation;
};

// Permutes rows and columns into dendrogram leaf order.
inline ReorderedMatrix reorder_matrix(const GlobalSimilarityMatrix& g, const Dendrogram& dend) {
  const int q = g.sample_count();
  if (dend.leaf_count != q) throw std::invalid_argument("dendrogram size mismatch");
  ReorderedMatrix out;
  out.permutation = dend.leaf_order;
  out.matrix = g;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      out.matrix.values(i, j) = g.values(dend.leaf_order[i], dend.leaf_order[j]);
  return out;
}

/// Nested-parentheses text, e.g. ((a,b):0.5,c):1.25; with one height per merge.
inline void write_dendrogram(std::ostream& os, const Dendrogram& dend,
                             const std::vector<std::string>& codes) {
  if (static_cast<int>(codes.size()) != dend.leaf_count)
    throw std::invalid_argument("code count does not match leaf count");
  auto emit = [&](auto&& self, int node) -> void {
    if (node < dend.leaf_count) {
      os << codes[node];
      return;
    }
    const auto& merge = dend.merges[node - dend.leaf_count];
    os << "(";
    self(self, merge.left);
    os << ",";
    self(self, merge.right);
    os << "):" << format_number(merge.height);
  };
  emit(emit, 2 * dend.leaf_count - 2);
  os << ";\n";
}

}  // namespace sensomap
