#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensomap/mfa.hpp"
#include "sensomap/panel.hpp"
#include "sensomap/rng.hpp"
#include "sensomap/similarity.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

// Configuration agreement: trace(XX' YY') / sqrt(trace((XX')^2) trace((YY')^2))
// on column-centered coordinates. In [0, 1]; invariant to rotation, reflection
// and uniform scaling of either argument.
inline double rv_coefficient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("row counts differ");
  if (x.rows() < 2) throw std::invalid_argument("need at least 2 rows");

  Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
  Eigen::MatrixXd sx = xc * xc.transpose();
  Eigen::MatrixXd sy = yc * yc.transpose();

  const double num = sx.cwiseProduct(sy).sum();
  const double den = std::sqrt(sx.cwiseProduct(sx).sum() * sy.cwiseProduct(sy).sum());
  if (den == 0.0) throw std::domain_error("zero configuration");
  return num / den;
}

inline double rv_coefficient(const Configuration& x, const Configuration& y) {
  return rv_coefficient(x.coords, y.coords);
}

// Pearson correlation of the two upper-triangle strength vectors. In [-1, 1].
inline double mantel_coefficient(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int q = static_cast<int>(a.rows());
  if (a.cols() != q || b.rows() != q || b.cols() != q)
    throw std::invalid_argument("matrices must be square and equally sized");
  if (q < 3) throw std::invalid_argument("need at least 3 samples");
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j)
      if (a(i, j) != a(j, i) || b(i, j) != b(j, i))
        throw std::invalid_argument("matrices must be symmetric");

  const int pairs = q * (q - 1) / 2;
  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      ma += a(i, j);
      mb += b(i, j);
    }
  }
  ma /= pairs;
  mb /= pairs;

  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int i = 0; i < q; ++i) {
    for (int j = i + 1; j < q; ++j) {
      const double da = a(i, j) - ma;
      const double db = b(i, j) - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
  }
  if (saa == 0.0 || sbb == 0.0) throw std::domain_error("constant strength vector");
  return sab / std::sqrt(saa * sbb);
}

inline double mantel_coefficient(const GlobalSimilarityMatrix& a, const GlobalSimilarityMatrix& b) {
  return mantel_coefficient(a.values, b.values);
}

struct AnalysisMethod {
  enum class Kind { mfa, gabriel, distances };

  Kind kind = Kind::gabriel;
  int dims = 2;     // score dimensions compared (mfa)
  double p = 2.0;   // tuning exponent (distances)

  std::string label() const {
    switch (kind) {
      case Kind::mfa:
        return "mfa-d" + std::to_string(dims);
      case Kind::gabriel:
        return "gabriel";
      case Kind::distances:
        return "distances-p" + format_number(p);
    }
    return {};
  }
};

// Subsample sizes 10, 20, ... up to n, with n itself always included.
inline std::vector<int> bootstrap_grid(int n, int step = 10) {
  if (n < 2) throw std::invalid_argument("need at least 2 assessors");
  if (step < 1) throw std::invalid_argument("grid step must be positive");
  std::vector<int> grid;
  for (int m = step; m <= n; m += step) grid.push_back(m);
  if (grid.empty() || grid.back() != n) grid.push_back(n);
  return grid;
}

struct StabilityPoint {
  int m;
  double mean;
  double sd;
  int replicates;
};

struct StabilityCurve {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<StabilityPoint> points;
};

struct ReplicateRecord {
  int m;
  int replicate;
  double value;
};

// Bootstrap agreement between subsampled panels and the full panel. For each m
// in the grid, `replicates` multisets of m tablecloths are drawn with
// replacement; the method runs on the subsample and is compared to the
// full-panel reference (RV on the first `dims` score dimensions for mfa,
// Mantel on raw global matrices otherwise). A replicate that degenerates is
// redrawn up to 10 times, then dropped from that point's count. Each (m,
// replicate, attempt) owns a derived seed, so results are a pure function of
// the inputs and curves are reproducible run to run.
inline StabilityCurve bootstrap_stability(const Panel& panel, const AnalysisMethod& method,
                                          std::span<const int> grid, int replicates,
                                          std::uint64_t seed,
                                          std::vector<ReplicateRecord>* dump = nullptr) {
  const int n = panel.assessor_count();
  if (n < 2) throw std::invalid_argument("need at least 2 assessors");
  if (replicates < 1) throw std::invalid_argument("need at least 1 replicate");
  if (grid.empty()) throw std::invalid_argument("empty grid");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 2) throw std::invalid_argument("grid values must be at least 2");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw std::invalid_argument("grid must be strictly increasing");
  }

  // Per-tablecloth pieces are fixed across replicates; compute them once.
  MfaBlocks blocks;
  Eigen::MatrixXd reference_scores;
  std::vector<int> block_of_tablecloth;
  std::vector<LocalSimilarityMatrix> locals;
  Eigen::MatrixXd reference_global;

  if (method.kind == AnalysisMethod::Kind::mfa) {
    blocks = prepare_mfa_blocks(panel);
    if (blocks.weighted.size() < 2) throw std::invalid_argument("fewer than 2 usable assessors");
    block_of_tablecloth.assign(n, -1);
    for (size_t b = 0; b < blocks.panel_index.size(); ++b)
      block_of_tablecloth[blocks.panel_index[b]] = static_cast<int>(b);
    std::vector<int> all(blocks.weighted.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    reference_scores = mfa_from_blocks(blocks, all, method.dims).scores.coords;
  } else {
    locals.reserve(n);
    for (const auto& tc : panel.tablecloths) {
      const Eigen::MatrixX2d pts = tablecloth_coordinates(tc, panel.products);
      locals.push_back(method.kind == AnalysisMethod::Kind::gabriel
                           ? gabriel_similarity(pts)
                           : distance_similarity(pts, method.p));
    }
    reference_global = aggregate(locals).values;
  }

  StabilityCurve curve;
  curve.method = method.label();
  curve.seed = seed;

  std::vector<int> draw;
  for (int m : grid) {
    std::vector<double> values;
    values.reserve(replicates);
    for (int r = 0; r < replicates; ++r) {
      std::optional<double> value;
      for (int attempt = 0; attempt < 10 && !value; ++attempt) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m),
                            static_cast<std::uint64_t>(r) * 16 + attempt));
        draw.clear();
        for (int d = 0; d < m; ++d)
          draw.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n))));

        if (method.kind == AnalysisMethod::Kind::mfa) {
          std::vector<int> use;
          use.reserve(m);
          for (int idx : draw)
            if (block_of_tablecloth[idx] >= 0) use.push_back(block_of_tablecloth[idx]);
          if (use.size() < 2) continue;
          const MfaResult rep = mfa_from_blocks(blocks, use, method.dims);
          value = rv_coefficient(reference_scores, rep.scores.coords);
        } else {
          Eigen::MatrixXd sum = locals[draw[0]].values;
          for (size_t d = 1; d < draw.size(); ++d) sum += locals[draw[d]].values;
          // A replicate whose strengths are all equal has no ordering signal.
          try {
            value = mantel_coefficient(reference_global, sum);
          } catch (const std::domain_error&) {
          }
        }
      }
      if (value) {
        values.push_back(*value);
        if (dump) dump->push_back({m, r, *value});
      }
    }

    StabilityPoint point{m, 0.0, 0.0, static_cast<int>(values.size())};
    if (!values.empty()) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= values.size();
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      point.mean = mean;
      point.sd = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
    }
    curve.points.push_back(point);
  }
  return curve;
}

inline void write_stability_curve(std::ostream& os, const StabilityCurve& curve) {
  os << "# seed=" << curve.seed << "\n";
  os << "method,m,mean,sd,R\n";
  for (const auto& p : curve.points) {
    os << curve.method << "," << p.m << "," << format_number(p.mean) << ","
       << format_number(p.sd) << "," << p.replicates << "\n";
  }
}

inline StabilityCurve read_stability_curve(std::istream& is) {
  StabilityCurve curve;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (get_line(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      for (const auto& token : split_fields(t.substr(1), ' '))
        if (token.rfind("seed=", 0) == 0)
          curve.seed = std::strtoull(token.substr(5).c_str(), nullptr, 10);
      continue;
    }
    auto fields = split_fields(t);
    if (!header_seen) {
      if (fields.size() != 5 || fields[0] != "method")
        throw ParseError("expected header 'method,m,mean,sd,R'", line_no);
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) throw ParseError("expected 5 fields", line_no);
    curve.method = fields[0];
    curve.points.push_back({static_cast<int>(parse_number(fields[1], line_no)),
                            parse_number(fields[2], line_no), parse_number(fields[3], line_no),
                            static_cast<int>(parse_number(fields[4], line_no))});
  }
  if (!header_seen) throw ParseError("missing header row", 1);
  if (curve.points.empty()) throw ParseError("no data rows", line_no);
  return curve;
}

inline void write_replicate_dump(std::ostream& os, const std::string& method,
                                 const std::vector<ReplicateRecord>& records) {
  os << "method,m,replicate,value\n";
  for (const auto& r : records)
    os << method << "," << r.m << "," << r.replicate << "," << format_number(r.value) << "\n";
}

}  // namespace sensomap
