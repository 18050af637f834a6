#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensomap/geometry.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

enum class SimilarityVariant { gabriel, distances };

inline const char* variant_name(SimilarityVariant v) {
  return v == SimilarityVariant::gabriel ? "gabriel" : "distances";
}

// Per-tablecloth similarity. Gabriel variant holds exact 0/1 entries; the
// distance variant holds values in [0, 1]. `p` is set only by the tuned
// distance variant.
struct LocalSimilarityMatrix {
  Eigen::MatrixXd values;
  SimilarityVariant variant;
  std::optional<double> p;
};

// Elementwise sum of local matrices plus its provenance.
struct GlobalSimilarityMatrix {
  Eigen::MatrixXd values;
  SimilarityVariant variant;
  int n = 0;
  std::optional<double> p;

  int sample_count() const { return static_cast<int>(values.rows()); }
};

struct Edge {
  int i;
  int j;
  double strength;
  double normalized;
};

using EdgeSet = std::vector<Edge>;

inline LocalSimilarityMatrix gabriel_similarity(const Eigen::MatrixX2d& pts) {
  return {gabriel_graph(pts).cast<double>(), SimilarityVariant::gabriel, std::nullopt};
}

// Inverse-linear distance similarity: 1 at the closest pair, 0 at the farthest.
// A tablecloth whose pairwise distances are all equal carries no ordering
// information; every pair then gets the neutral value 0.5. The spread test is
// relative so that distances equal up to rounding count as degenerate.
inline LocalSimilarityMatrix raw_distance_similarity(const Eigen::MatrixX2d& pts) {
  const int q = static_cast<int>(pts.rows());
  if (q < 2) throw std::invalid_argument("need at least 2 points");
  const DistanceMatrix d = pairwise_distances(pts);

  double d_min = std::numeric_limits<double>::infinity();
  double d_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      d_min = std::min(d_min, d(i, j));
      d_max = std::max(d_max, d(i, j));
    }
  }
  if (d_min == 0.0) throw std::invalid_argument("coincident points");

  const double spread = d_max - d_min;
  const bool degenerate = spread <= 1e-12 * std::max(d_max, 1.0);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double v = degenerate ? 0.5 : 1.0 - (d(i, j) - d_min) / spread;
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return {std::move(s), SimilarityVariant::distances, std::nullopt};
}

// Piecewise power map fixing 0, 1/2 and 1; pushes similarities towards the
// extremes for p > 1 and is the identity at p = 1. Monotone on [0, 1] and
// symmetric: tune(1-s) = 1 - tune(s).
inline double tune_similarity(double s, double p) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("similarity outside [0, 1]");
  if (!(p >= 1.0)) throw std::invalid_argument("tuning exponent must be >= 1");
  const double scale = std::pow(2.0, p - 1.0);
  if (s < 0.5) return scale * std::pow(s, p);
  return 1.0 - scale * std::pow(1.0 - s, p);
}

inline LocalSimilarityMatrix distance_similarity(const Eigen::MatrixX2d& pts, double p = 2.0) {
  LocalSimilarityMatrix local = raw_distance_similarity(pts);
  const int q = static_cast<int>(local.values.rows());
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j)
      if (i != j) local.values(i, j) = tune_similarity(local.values(i, j), p);
  local.p = p;
  return local;
}

inline LocalSimilarityMatrix distance_similarity(const Tablecloth& tc, const ProductList& products,
                                                 double p = 2.0) {
  return distance_similarity(tablecloth_coordinates(tc, products), p);
}

inline LocalSimilarityMatrix gabriel_similarity(const Tablecloth& tc, const ProductList& products) {
  return gabriel_similarity(tablecloth_coordinates(tc, products));
}

inline GlobalSimilarityMatrix aggregate(std::span<const LocalSimilarityMatrix> locals) {
  if (locals.empty()) throw std::invalid_argument("no local matrices");
  const int q = static_cast<int>(locals[0].values.rows());
  const SimilarityVariant variant = locals[0].variant;
  const std::optional<double> p = locals[0].p;

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(q, q);
  for (const auto& local : locals) {
    if (local.values.rows() != q || local.values.cols() != q)
      throw std::invalid_argument("local matrix dimension mismatch");
    if (local.variant != variant || local.p != p)
      throw std::invalid_argument("mixed similarity variants");
    sum += local.values;
  }
  return {std::move(sum), variant, static_cast<int>(locals.size()), p};
}

inline GlobalSimilarityMatrix aggregate(const std::vector<LocalSimilarityMatrix>& locals) {
  return aggregate(std::span<const LocalSimilarityMatrix>(locals));
}

// Rescales off-diagonal strengths to [0, 1]; a constant matrix maps to 0.5
// everywhere off the diagonal.
inline Eigen::MatrixXd normalize_strengths(const GlobalSimilarityMatrix& g) {
  const int q = g.sample_count();
  if (q < 2) throw std::invalid_argument("need at least 2 samples");

  double s_min = std::numeric_limits<double>::infinity();
  double s_max = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      s_min = std::min(s_min, g.values(i, j));
      s_max = std::max(s_max, g.values(i, j));
    }
  }
  const double spread = s_max - s_min;
  const bool degenerate = spread <= 1e-12 * std::max(std::abs(s_max), 1.0);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double v = degenerate ? 0.5 : (g.values(i, j) - s_min) / spread;
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// Keeps the top k deciles of normalized strength: every pair with normalized
// strength >= 1 - k/10 (closed threshold, small slack for rounding). k = 10
// keeps all pairs. Result is sorted by descending strength, ties by (i, j).
inline EdgeSet filter_deciles(const GlobalSimilarityMatrix& g, int k) {
  if (k < 1 || k > 10) throw std::invalid_argument("decile must be in 1..10");
  const Eigen::MatrixXd norm = normalize_strengths(g);
  const double threshold = 1.0 - k / 10.0 - 1e-12;

  EdgeSet edges;
  const int q = g.sample_count();
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j)
      if (norm(i, j) >= threshold) edges.push_back({i, j, g.values(i, j), norm(i, j)});

  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.strength != b.strength) return a.strength > b.strength;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  return edges;
}

inline void write_similarity_matrix(std::ostream& os, const GlobalSimilarityMatrix& g,
                                    const std::vector<std::string>& codes) {
  if (static_cast<int>(codes.size()) != g.sample_count())
    throw std::invalid_argument("code count does not match matrix size");
  os << "# variant=" << variant_name(g.variant) << " n=" << g.n;
  if (g.p) os << " p=" << format_number(*g.p);
  os << "\n";
  os << "code";
  for (const auto& c : codes) os << "," << c;
  os << "\n";
  for (int i = 0; i < g.sample_count(); ++i) {
    os << codes[i];
    for (int j = 0; j < g.sample_count(); ++j) os << "," << format_number(g.values(i, j));
    os << "\n";
  }
}

struct NamedSimilarityMatrix {
  GlobalSimilarityMatrix matrix;
  std::vector<std::string> codes;
};

inline NamedSimilarityMatrix read_similarity_matrix(std::istream& is) {
  NamedSimilarityMatrix out;
  out.matrix.variant = SimilarityVariant::gabriel;
  out.matrix.n = 0;

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<std::vector<double>> rows;
  while (get_line(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      for (const auto& token : split_fields(t.substr(1), ' ')) {
        if (token.rfind("variant=", 0) == 0) {
          const std::string v = token.substr(8);
          if (v == "gabriel")
            out.matrix.variant = SimilarityVariant::gabriel;
          else if (v == "distances")
            out.matrix.variant = SimilarityVariant::distances;
          else
            throw ParseError("unknown variant '" + v + "'", line_no);
        } else if (token.rfind("n=", 0) == 0) {
          out.matrix.n = static_cast<int>(parse_number(token.substr(2), line_no));
        } else if (token.rfind("p=", 0) == 0) {
          out.matrix.p = parse_number(token.substr(2), line_no);
        }
      }
      continue;
    }
    auto fields = split_fields(t);
    if (!header_seen) {
      if (fields.size() < 3 || fields[0] != "code")
        throw ParseError("expected header 'code,<code>,...'", line_no);
      out.codes.assign(fields.begin() + 1, fields.end());
      header_seen = true;
      continue;
    }
    if (fields.size() != out.codes.size() + 1)
      throw ParseError("expected " + std::to_string(out.codes.size() + 1) + " fields", line_no);
    std::vector<double> row;
    for (size_t j = 1; j < fields.size(); ++j) row.push_back(parse_number(fields[j], line_no));
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw ParseError("missing header row", 1);
  if (rows.size() != out.codes.size())
    throw ParseError("expected " + std::to_string(out.codes.size()) + " rows", line_no);

  const int q = static_cast<int>(out.codes.size());
  out.matrix.values.resize(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) out.matrix.values(i, j) = rows[i][j];
  return out;
}

}  // namespace sensomap
