#pragma once

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sensomap/rng.hpp"
#include "sensomap/types.hpp"

namespace sensomap {

using ProductList = std::vector<std::string>;

// One assessor's sheet: every product code placed once.
struct Tablecloth {
  std::string assessor_id;
  std::map<std::string, Point> positions;
  Sheet sheet;

  friend bool operator==(const Tablecloth& a, const Tablecloth& b) {
    return a.assessor_id == b.assessor_id && a.positions == b.positions;
  }
};

struct Panel {
  ProductList products;
  std::vector<Tablecloth> tablecloths;

  int sample_count() const { return static_cast<int>(products.size()); }
  int assessor_count() const { return static_cast<int>(tablecloths.size()); }

  friend bool operator==(const Panel& a, const Panel& b) {
    return a.products == b.products && a.tablecloths == b.tablecloths;
  }
};

// Positions of one tablecloth as a q x 2 matrix in product order.
inline Eigen::MatrixX2d tablecloth_coordinates(const Tablecloth& tc, const ProductList& products) {
  Eigen::MatrixX2d pts(static_cast<int>(products.size()), 2);
  for (int i = 0; i < static_cast<int>(products.size()); ++i) {
    auto it = tc.positions.find(products[i]);
    if (it == tc.positions.end())
      throw std::invalid_argument("assessor '" + tc.assessor_id + "' has no position for sample '" +
                                  products[i] + "'");
    pts(i, 0) = it->second.x;
    pts(i, 1) = it->second.y;
  }
  return pts;
}

struct Violation {
  enum class Kind { missing_code, unknown_code, out_of_bounds, duplicate_coordinates };
  enum class Severity { warning, error };

  Kind kind;
  Severity severity;
  int tablecloth_index = -1;
  std::string assessor_id;
  std::vector<std::string> codes;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }

  bool has_errors() const {
    for (const auto& v : violations)
      if (v.severity == Violation::Severity::error) return true;
    return false;
  }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) {
      os << (v.severity == Violation::Severity::error ? "error" : "warning");
      os << " [" << v.assessor_id << "] " << v.message << "\n";
    }
    return os.str();
  }
};

// Structural checks on an already-parsed panel. Violations are data, not errors:
// out-of-bounds positions are recoverable (warning), missing/unknown codes and
// exactly coincident positions are not (error).
inline ValidationReport validate_panel(const Panel& panel) {
  ValidationReport report;
  std::unordered_set<std::string> product_set(panel.products.begin(), panel.products.end());
  for (int t = 0; t < panel.assessor_count(); ++t) {
    const Tablecloth& tc = panel.tablecloths[t];
    for (const auto& code : panel.products) {
      if (!tc.positions.count(code)) {
        report.violations.push_back({Violation::Kind::missing_code, Violation::Severity::error, t,
                                     tc.assessor_id,
                                     {code},
                                     "missing position for sample '" + code + "'"});
      }
    }
    for (const auto& [code, pt] : tc.positions) {
      if (!product_set.count(code)) {
        report.violations.push_back({Violation::Kind::unknown_code, Violation::Severity::error, t,
                                     tc.assessor_id,
                                     {code},
                                     "sample '" + code + "' is not in the product list"});
      }
      if (pt.x < 0.0 || pt.x > tc.sheet.width || pt.y < 0.0 || pt.y > tc.sheet.height) {
        report.violations.push_back(
            {Violation::Kind::out_of_bounds, Violation::Severity::warning, t, tc.assessor_id,
             {code},
             "sample '" + code + "' at (" + format_number(pt.x) + ", " + format_number(pt.y) +
                 ") lies outside the " + format_number(tc.sheet.width) + " x " +
                 format_number(tc.sheet.height) + " sheet"});
      }
    }
    // Coincidence is checked pairwise and exactly; each coincident pair is one violation.
    std::vector<std::pair<std::string, Point>> placed(tc.positions.begin(), tc.positions.end());
    for (size_t a = 0; a < placed.size(); ++a) {
      for (size_t b = a + 1; b < placed.size(); ++b) {
        if (placed[a].second == placed[b].second) {
          report.violations.push_back({Violation::Kind::duplicate_coordinates,
                                       Violation::Severity::error, t, tc.assessor_id,
                                       {placed[a].first, placed[b].first},
                                       "samples '" + placed[a].first + "' and '" + placed[b].first +
                                           "' share position (" + format_number(placed[a].second.x) +
                                           ", " + format_number(placed[a].second.y) + ")"});
        }
      }
    }
  }
  return report;
}

// Long-format reader. Schema: header `assessor_id,sample_code,x_cm,y_cm`, one row
// per placed sample. Product order is first appearance unless an explicit list is
// given. Every assessor must place the same product set; bounds are left to
// validate_panel.
inline Panel parse_panel(std::istream& in, const Sheet& sheet = {},
                         const ProductList* explicit_products = nullptr) {
  Panel panel;
  if (explicit_products) {
    std::unordered_set<std::string> seen;
    for (const auto& code : *explicit_products)
      if (!seen.insert(code).second)
        throw ParseError("duplicate code '" + code + "' in product list", 0);
    panel.products = *explicit_products;
  }

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::unordered_map<std::string, int> tc_index;
  std::unordered_set<std::string> product_set(panel.products.begin(), panel.products.end());
  std::vector<int> first_line;

  while (get_line(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = split_fields(t);
    if (!header_seen) {
      auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
      };
      if (fields.size() != 4 || lower(fields[0]) != "assessor_id" ||
          lower(fields[1]) != "sample_code" || lower(fields[2]) != "x_cm" ||
          lower(fields[3]) != "y_cm")
        throw ParseError("expected header 'assessor_id,sample_code,x_cm,y_cm'", line_no);
      header_seen = true;
      continue;
    }
    if (fields.size() != 4)
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no);
    const std::string& assessor = fields[0];
    const std::string& code = fields[1];
    if (assessor.empty()) throw ParseError("empty assessor id", line_no);
    if (code.empty()) throw ParseError("empty sample code", line_no);
    const double x = parse_number(fields[2], line_no);
    const double y = parse_number(fields[3], line_no);

    if (explicit_products) {
      if (!product_set.count(code))
        throw ParseError("sample code '" + code + "' is not in the product list", line_no);
    } else if (product_set.insert(code).second) {
      panel.products.push_back(code);
    }

    auto [it, created] = tc_index.try_emplace(assessor, panel.assessor_count());
    if (created) {
      panel.tablecloths.push_back({assessor, {}, sheet});
      first_line.push_back(line_no);
    }
    Tablecloth& tc = panel.tablecloths[it->second];
    if (!tc.positions.emplace(code, Point{x, y}).second)
      throw ParseError("duplicate row for assessor '" + assessor + "', sample '" + code + "'",
                       line_no);
  }

  if (!header_seen) throw ParseError("missing header row", 1);
  if (panel.tablecloths.empty()) throw ParseError("no data rows", line_no);
  if (panel.sample_count() < 2) throw ParseError("need at least 2 samples", line_no);

  // Same product set everywhere is a schema requirement, not a per-row one.
  for (int t = 0; t < panel.assessor_count(); ++t) {
    for (const auto& code : panel.products) {
      if (!panel.tablecloths[t].positions.count(code))
        throw ParseError("assessor '" + panel.tablecloths[t].assessor_id +
                             "' is missing sample '" + code + "' (inconsistent product set)",
                         first_line[t]);
    }
  }
  return panel;
}

// Writes the same long format parse_panel reads: rows grouped by assessor in
// panel order, samples in product order, 6 significant digits.
inline void serialize_panel(std::ostream& os, const Panel& panel) {
  os << "assessor_id,sample_code,x_cm,y_cm\n";
  for (const auto& tc : panel.tablecloths) {
    for (const auto& code : panel.products) {
      auto it = tc.positions.find(code);
      if (it == tc.positions.end())
        throw std::invalid_argument("assessor '" + tc.assessor_id +
                                    "' has no position for sample '" + code + "'");
      os << tc.assessor_id << "," << code << "," << format_number(it->second.x) << ","
         << format_number(it->second.y) << "\n";
    }
  }
}

// Synthetic panel: every tablecloth is `truth` plus per-axis Gaussian noise,
// clamped to the sheet. A pure function of its arguments; a draw that lands
// exactly on an earlier sample of the same tablecloth is redrawn so generated
// panels always pass validation.
inline Panel generate_panel(const Configuration& truth, double noise_sd, int n,
                            std::uint64_t seed, const Sheet& sheet = {}) {
  if (truth.dims() != 2) throw std::invalid_argument("truth configuration must be 2-D");
  if (truth.sample_count() < 2) throw std::invalid_argument("need at least 2 samples");
  if (noise_sd < 0.0) throw std::invalid_argument("noise_sd must be nonnegative");
  if (n < 1) throw std::invalid_argument("need at least 1 tablecloth");
  for (int i = 0; i < truth.sample_count(); ++i) {
    const double x = truth.coords(i, 0), y = truth.coords(i, 1);
    if (x < 0.0 || x > sheet.width || y < 0.0 || y > sheet.height)
      throw std::invalid_argument("truth sample '" + truth.codes[i] + "' lies outside the sheet");
  }

  Panel panel;
  panel.products = truth.codes;
  panel.tablecloths.reserve(n);
  for (int t = 0; t < n; ++t) {
    Rng rng(derive_seed(seed, 0x70A1, static_cast<std::uint64_t>(t)));
    Tablecloth tc{"a" + std::to_string(t + 1), {}, sheet};
    for (int i = 0; i < truth.sample_count(); ++i) {
      Point p;
      for (int attempt = 0; attempt < 100; ++attempt) {
        p.x = std::clamp(truth.coords(i, 0) + noise_sd * rng.normal(), 0.0, sheet.width);
        p.y = std::clamp(truth.coords(i, 1) + noise_sd * rng.normal(), 0.0, sheet.height);
        bool clash = false;
        for (const auto& [code, q] : tc.positions) clash = clash || (q == p);
        if (!clash) break;
      }
      tc.positions.emplace(truth.codes[i], p);
    }
    panel.tablecloths.push_back(std::move(tc));
  }
  return panel;
}

// Breaks exactly coincident positions by perturbing every duplicate after the
// first (product order) with uniform noise in [-eps, eps], clamped to the sheet.
// Returns the number of samples moved.
inline int jitter_duplicates(Panel& panel, double eps = 0.01, std::uint64_t seed = 0x5EED) {
  if (eps <= 0.0) throw std::invalid_argument("jitter amplitude must be positive");
  int moved = 0;
  for (int t = 0; t < panel.assessor_count(); ++t) {
    Tablecloth& tc = panel.tablecloths[t];
    Rng rng(derive_seed(seed, 0x7177, static_cast<std::uint64_t>(t)));
    auto coincides = [&](const std::string& code, const Point& p) {
      for (const auto& [other, q] : tc.positions)
        if (other != code && q == p) return true;
      return false;
    };
    std::unordered_set<std::string> kept;
    for (const auto& code : panel.products) {
      auto it = tc.positions.find(code);
      if (it == tc.positions.end()) continue;
      bool clashes_with_kept = false;
      for (const auto& other : kept)
        clashes_with_kept = clashes_with_kept || (tc.positions.at(other) == it->second);
      if (!clashes_with_kept) {
        kept.insert(code);
        continue;
      }
      Point p = it->second;
      for (int attempt = 0; attempt < 100 && coincides(code, p); ++attempt) {
        p.x = std::clamp(it->second.x + rng.uniform(-eps, eps), 0.0, tc.sheet.width);
        p.y = std::clamp(it->second.y + rng.uniform(-eps, eps), 0.0, tc.sheet.height);
      }
      it->second = p;
      kept.insert(code);
      ++moved;
    }
  }
  return moved;
}

}  // namespace sensomap
