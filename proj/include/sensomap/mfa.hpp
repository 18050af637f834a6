#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensomap/panel.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

namespace detail {

// Largest eigenvalue of the block's 2x2 covariance (columns centered, 1/(q-1)
// convention), computed through the singular values of the centered block.
inline double block_top_eigenvalue(const Eigen::MatrixX2d& centered) {
  const int q = static_cast<int>(centered.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const double sigma = svd.singularValues()(0);
  return sigma * sigma / (q - 1);
}

constexpr double kDegenerateEigenvalue = 1e-12;

}  // namespace detail

// Balancing weight 1/lambda_1 for one assessor's q x 2 block. Scaling the block
// by c scales the weight by 1/c^2, so blocks equal up to uniform scaling end up
// identical once weighted.
inline double group_weight(const Eigen::MatrixX2d& block) {
  if (block.rows() < 2) throw std::invalid_argument("need at least 2 samples");
  Eigen::MatrixX2d centered = block;
  centered.rowwise() -= block.colwise().mean();
  const double lambda = detail::block_top_eigenvalue(centered);
  if (lambda <= detail::kDegenerateEigenvalue)
    throw std::domain_error("degenerate block: all samples at one point");
  return 1.0 / lambda;
}

// Per-assessor blocks after centering and weighting, ready for the global
// decomposition. Assessors whose block carries no spread are dropped here.
struct MfaBlocks {
  int q = 0;
  std::vector<std::string> codes;
  std::vector<Eigen::MatrixX2d> weighted;   // centered, scaled by 1/sqrt(lambda_1)
  std::vector<int> panel_index;             // position of each kept block in the panel
  std::vector<double> weights;              // 1/lambda_1 per kept block
  std::vector<std::string> dropped;         // assessor ids excluded as degenerate
};

inline MfaBlocks prepare_mfa_blocks(const Panel& panel) {
  if (panel.sample_count() < 3) throw std::invalid_argument("need at least 3 samples");
  MfaBlocks blocks;
  blocks.q = panel.sample_count();
  blocks.codes = panel.products;
  for (int t = 0; t < panel.assessor_count(); ++t) {
    Eigen::MatrixX2d centered = tablecloth_coordinates(panel.tablecloths[t], panel.products);
    centered.rowwise() -= centered.colwise().mean().eval();
    const double lambda = detail::block_top_eigenvalue(centered);
    if (lambda <= detail::kDegenerateEigenvalue) {
      blocks.dropped.push_back(panel.tablecloths[t].assessor_id);
      continue;
    }
    blocks.weighted.push_back(centered / std::sqrt(lambda));
    blocks.panel_index.push_back(t);
    blocks.weights.push_back(1.0 / lambda);
  }
  return blocks;
}

struct MfaResult {
  Configuration scores;                  // q x min(max_dims, retained)
  std::vector<double> eigenvalues;       // descending, all retained dimensions
  std::vector<double> explained;         // percent per retained dimension
  std::vector<double> group_weights;     // per kept assessor
  std::vector<std::string> dropped_assessors;
};

// Principal components of the concatenated weighted blocks. The concatenation
// is divided by sqrt(#blocks) so duplicating every group leaves scores and
// eigenvalues unchanged. Retains min(q-1, 2 * #blocks) dimensions; explained
// percentages sum to 100 over all of them. Component signs follow the loading
// of largest magnitude.
inline MfaResult mfa_from_blocks(const MfaBlocks& blocks, std::span<const int> use, int max_dims) {
  if (max_dims < 1) throw std::invalid_argument("need at least 1 dimension");
  const int n_used = static_cast<int>(use.size());
  if (n_used < 2) throw std::invalid_argument("fewer than 2 usable assessors");
  const int q = blocks.q;

  Eigen::MatrixXd concat(q, 2 * n_used);
  const double group_scale = 1.0 / std::sqrt(static_cast<double>(n_used));
  for (int k = 0; k < n_used; ++k) {
    const int b = use[k];
    if (b < 0 || b >= static_cast<int>(blocks.weighted.size()))
      throw std::invalid_argument("block index out of range");
    concat.middleCols(2 * k, 2) = blocks.weighted[b] * group_scale;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(concat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();

  const int retained = std::min(q - 1, 2 * n_used);
  MfaResult result;
  result.group_weights = blocks.weights;
  result.dropped_assessors = blocks.dropped;

  double total = 0.0;
  for (int k = 0; k < retained; ++k) {
    const double lambda = sigma(k) * sigma(k) / (q - 1);
    result.eigenvalues.push_back(lambda);
    total += lambda;
  }
  if (total <= 0.0) throw std::domain_error("no variance in the weighted panel");
  for (double lambda : result.eigenvalues) result.explained.push_back(lambda / total * 100.0);

  const int dims = std::min(max_dims, retained);
  Eigen::MatrixXd scores = svd.matrixU().leftCols(dims);
  for (int k = 0; k < dims; ++k) {
    scores.col(k) *= sigma(k);
    // Orient each component by its dominant loading.
    const auto& v = svd.matrixV();
    int arg = 0;
    double best = -1.0;
    for (int r = 0; r < static_cast<int>(v.rows()); ++r) {
      if (std::abs(v(r, k)) > best) {
        best = std::abs(v(r, k));
        arg = r;
      }
    }
    if (v(arg, k) < 0.0) scores.col(k) = -scores.col(k);
  }

  result.scores.codes = blocks.codes;
  result.scores.coords = std::move(scores);
  return result;
}

// Full pipeline on a panel: center each assessor's block, weight it by its
// leading eigenvalue, concatenate, decompose.
inline MfaResult mfa_consensus(const Panel& panel, int max_dims) {
  MfaBlocks blocks = prepare_mfa_blocks(panel);
  std::vector<int> all(blocks.weighted.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return mfa_from_blocks(blocks, all, max_dims);
}

}  // namespace sensomap
