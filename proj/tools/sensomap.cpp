// Command-line front end for the panel analysis library: analyze, stability,
// simulate, validate, render. Exit codes: 0 success, 1 data or validation
// failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sensomap/sensomap.hpp"

namespace fs = std::filesystem;
using namespace sensomap;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

ProductList read_product_list(const std::string& path) {
  std::ifstream in = open_input(path);
  ProductList products;
  std::string line;
  while (get_line(in, line)) {
    const std::string t = trim(line);
    if (!t.empty() && t[0] != '#') products.push_back(t);
  }
  if (products.size() < 2) throw DataError("product list '" + path + "' has fewer than 2 codes");
  return products;
}

struct PanelOptions {
  std::string input;
  std::string products_path;
  double sheet_width = 60.0;
  double sheet_height = 40.0;
  CLI::Option* jitter_opt = nullptr;
};

void add_panel_options(CLI::App* cmd, PanelOptions& opts, bool with_jitter) {
  cmd->add_option("--input", opts.input, "panel CSV (assessor_id,sample_code,x_cm,y_cm)")
      ->required();
  cmd->add_option("--products", opts.products_path,
                  "file with one sample code per line, fixing the product order");
  cmd->add_option("--sheet-width", opts.sheet_width, "sheet width in cm")->capture_default_str();
  cmd->add_option("--sheet-height", opts.sheet_height, "sheet height in cm")
      ->capture_default_str();
  if (with_jitter) {
    opts.jitter_opt = cmd->add_option("--jitter",
                                      "break exactly coincident positions before the analysis; "
                                      "optional amplitude in cm (default 0.01)")
                          ->expected(0, 1);
  }
}

// Parses, validates, and optionally jitters. Warnings go to stderr; errors are
// fatal unless --jitter resolves every one of them.
Panel load_panel(const PanelOptions& opts) {
  Sheet sheet{opts.sheet_width, opts.sheet_height};
  std::optional<ProductList> products;
  if (!opts.products_path.empty()) products = read_product_list(opts.products_path);

  std::ifstream in = open_input(opts.input);
  Panel panel = parse_panel(in, sheet, products ? &*products : nullptr);

  ValidationReport report = validate_panel(panel);
  if (report.has_errors() && opts.jitter_opt && opts.jitter_opt->count() > 0) {
    bool only_duplicates = true;
    for (const auto& v : report.violations)
      if (v.severity == Violation::Severity::error &&
          v.kind != Violation::Kind::duplicate_coordinates)
        only_duplicates = false;
    if (only_duplicates) {
      // A bare --jitter records the placeholder "true"; a value records the number.
      double eps = 0.01;
      if (!opts.jitter_opt->results().empty()) {
        const std::string& raw = opts.jitter_opt->results()[0];
        if (!raw.empty() && raw != "true") eps = std::stod(raw);
      }
      const int moved = jitter_duplicates(panel, eps);
      std::cerr << "jitter: moved " << moved << " coincident samples by up to "
                << format_number(eps) << " cm\n";
      report = validate_panel(panel);
    }
  }

  for (const auto& v : report.violations)
    if (v.severity == Violation::Severity::warning)
      std::cerr << "warning [" << v.assessor_id << "] " << v.message << "\n";
  if (report.has_errors()) {
    for (const auto& v : report.violations)
      if (v.severity == Violation::Severity::error)
        std::cerr << "error [" << v.assessor_id << "] " << v.message << "\n";
    throw DataError("panel validation failed");
  }
  return panel;
}

AnalysisMethod parse_method(const std::string& name, int dims, double p) {
  AnalysisMethod method;
  if (name == "gabriel")
    method.kind = AnalysisMethod::Kind::gabriel;
  else if (name == "distances")
    method.kind = AnalysisMethod::Kind::distances;
  else if (name == "mfa")
    method.kind = AnalysisMethod::Kind::mfa;
  else
    throw CLI::ValidationError("--method", "unknown method '" + name + "'");
  method.dims = dims;
  method.p = p;
  return method;
}

// All artifacts are computed first and written last, so a failure partway
// through a run never leaves partial output behind.
void write_outputs(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  try {
    for (const auto& [name, content] : files) {
      const fs::path path = dir / name;
      std::ofstream out(path, std::ios::binary);
      if (!out) throw DataError("cannot write '" + path.string() + "'");
      out << content;
      if (!out) throw DataError("failed while writing '" + path.string() + "'");
      written.push_back(path);
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (...) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw;
  }
}

std::string locals_failure(const std::string& assessor, const std::string& what) {
  return "assessor '" + assessor + "': " + what;
}

int cmd_analyze(const PanelOptions& popts, const std::string& method_name, double p, int decile,
                std::uint64_t seed, int dims, double delta, int groups, const std::string& out_dir) {
  Panel panel = load_panel(popts);
  const AnalysisMethod method = parse_method(method_name, dims, p);
  RenderSpec spec;
  spec.decile = decile;

  std::vector<std::pair<std::string, std::string>> files;

  if (method.kind == AnalysisMethod::Kind::mfa) {
    const MfaResult result = mfa_consensus(panel, dims);
    for (const auto& id : result.dropped_assessors)
      std::cerr << "warning [" << id << "] dropped from the consensus: all samples at one point\n";

    std::vector<std::string> comments;
    std::string expl = "explained:";
    for (size_t k = 0; k < result.explained.size(); ++k)
      expl += " Dim" + std::to_string(k + 1) + "=" + format_number(result.explained[k]) + "%";
    comments.push_back(expl);
    if (!result.dropped_assessors.empty()) {
      std::string dropped = "dropped:";
      for (const auto& id : result.dropped_assessors) dropped += " " + id;
      comments.push_back(dropped);
    }

    std::ostringstream scores;
    write_configuration(scores, result.scores, {}, comments);

    Configuration plane = result.scores;
    plane.coords = result.scores.coords.leftCols(std::min(2, result.scores.dims())).eval();
    if (plane.dims() < 2) throw DataError("fewer than 2 consensus dimensions");

    files.emplace_back("mfa_scores.csv", scores.str());
    files.emplace_back("consensus.svg", render_consensus(plane, spec));
  } else {
    std::vector<LocalSimilarityMatrix> locals;
    locals.reserve(panel.assessor_count());
    for (const auto& tc : panel.tablecloths) {
      try {
        const Eigen::MatrixX2d pts = tablecloth_coordinates(tc, panel.products);
        locals.push_back(method.kind == AnalysisMethod::Kind::gabriel
                             ? gabriel_similarity(pts)
                             : distance_similarity(pts, method.p));
      } catch (const std::invalid_argument& e) {
        throw DataError(locals_failure(tc.assessor_id, e.what()));
      }
    }
    const GlobalSimilarityMatrix global = aggregate(locals);

    LayoutSettings settings;
    settings.seed = seed;
    settings.floor_distance = delta;
    const Eigen::MatrixX2d coords = kamada_kawai(target_distances(global, delta), settings);
    const Configuration config{panel.products, coords};

    const Dendrogram dend = hierarchical_cluster(global);
    const ReorderedMatrix reordered = reorder_matrix(global, dend);
    std::vector<std::string> ordered_codes;
    for (int idx : reordered.permutation) ordered_codes.push_back(panel.products[idx]);

    const int cluster_count = groups > 0 ? groups : suggest_cluster_count(dend);
    const std::vector<int> labels = cut_clusters(dend, cluster_count);
    std::vector<int> row_labels;
    for (int idx : reordered.permutation) row_labels.push_back(labels[idx]);

    std::ostringstream matrix_out, reordered_out, config_out, dend_out;
    write_similarity_matrix(matrix_out, global, panel.products);
    write_similarity_matrix(reordered_out, reordered.matrix, ordered_codes);
    write_configuration(config_out, config);
    write_dendrogram(dend_out, dend, panel.products);

    files.emplace_back("global_matrix.csv", matrix_out.str());
    files.emplace_back("matrix_reordered.csv", reordered_out.str());
    files.emplace_back("configuration.csv", config_out.str());
    files.emplace_back("dendrogram.txt", dend_out.str());
    files.emplace_back("consensus.svg", render_consensus(config, &global, spec));
    files.emplace_back("heatmap.svg",
                       render_heatmap(reordered.matrix, ordered_codes, spec, &row_labels));
    files.emplace_back("dendrogram.svg", render_dendrogram(dend, panel.products, spec));
  }

  write_outputs(out_dir, files);
  return 0;
}

int cmd_stability(const PanelOptions& popts, const std::string& method_name, double p, int dims,
                  int reps, int grid_step, std::uint64_t seed, bool dump,
                  const std::string& out_dir) {
  Panel panel = load_panel(popts);
  const AnalysisMethod method = parse_method(method_name, dims, p);
  const std::vector<int> grid = bootstrap_grid(panel.assessor_count(), grid_step);

  std::vector<ReplicateRecord> records;
  const StabilityCurve curve =
      bootstrap_stability(panel, method, grid, reps, seed, dump ? &records : nullptr);

  std::ostringstream curve_out;
  write_stability_curve(curve_out, curve);

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("stability_curve.csv", curve_out.str());
  files.emplace_back("stability.svg", render_stability(curve));
  if (dump) {
    std::ostringstream dump_out;
    write_replicate_dump(dump_out, curve.method, records);
    files.emplace_back("replicates.csv", dump_out.str());
  }
  write_outputs(out_dir, files);
  return 0;
}

int cmd_simulate(const std::string& truth_path, double noise_sd, int n, std::uint64_t seed,
                 double sheet_width, double sheet_height, const std::string& out_path) {
  std::ifstream in = open_input(truth_path);
  const Configuration truth = read_configuration(in);
  const Panel panel = generate_panel(truth, noise_sd, n, seed, Sheet{sheet_width, sheet_height});

  std::ostringstream os;
  serialize_panel(os, panel);
  if (!out_path.empty() && out_path != "-") {
    if (out_path.find('/') != std::string::npos)
      fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << os.str();
    std::cout << "wrote " << out_path << "\n";
  } else {
    std::cout << os.str();
  }
  return 0;
}

int cmd_validate(const PanelOptions& popts) {
  Sheet sheet{popts.sheet_width, popts.sheet_height};
  std::optional<ProductList> products;
  if (!popts.products_path.empty()) products = read_product_list(popts.products_path);
  std::ifstream in = open_input(popts.input);
  const Panel panel = parse_panel(in, sheet, products ? &*products : nullptr);
  const ValidationReport report = validate_panel(panel);
  if (report.empty()) {
    std::cout << "ok: " << panel.assessor_count() << " assessors, " << panel.sample_count()
              << " samples, no violations\n";
    return 0;
  }
  std::cout << report.to_string();
  return report.has_errors() ? 1 : 0;
}

int cmd_render(const std::string& kind, const std::string& matrix_path,
               const std::string& config_path, const std::string& curve_path, int decile,
               int groups, double threshold, const std::string& out_path) {
  RenderSpec spec;
  spec.decile = decile;
  spec.threshold = threshold;

  std::string svg;
  if (kind == "consensus") {
    if (config_path.empty()) throw CLI::ValidationError("--config", "required for kind consensus");
    std::ifstream cin = open_input(config_path);
    const Configuration config = read_configuration(cin);
    if (!matrix_path.empty()) {
      std::ifstream min = open_input(matrix_path);
      const NamedSimilarityMatrix named = read_similarity_matrix(min);
      svg = render_consensus(config, &named.matrix, spec);
    } else {
      svg = render_consensus(config, spec);
    }
  } else if (kind == "heatmap") {
    if (matrix_path.empty()) throw CLI::ValidationError("--matrix", "required for kind heatmap");
    std::ifstream min = open_input(matrix_path);
    const NamedSimilarityMatrix named = read_similarity_matrix(min);
    if (groups > 0) {
      const Dendrogram dend = hierarchical_cluster(named.matrix);
      const ReorderedMatrix reordered = reorder_matrix(named.matrix, dend);
      std::vector<std::string> codes;
      std::vector<int> row_labels;
      const std::vector<int> labels = cut_clusters(dend, groups);
      for (int idx : reordered.permutation) {
        codes.push_back(named.codes[idx]);
        row_labels.push_back(labels[idx]);
      }
      svg = render_heatmap(reordered.matrix, codes, spec, &row_labels);
    } else {
      svg = render_heatmap(named.matrix, named.codes, spec);
    }
  } else if (kind == "dendrogram") {
    if (matrix_path.empty())
      throw CLI::ValidationError("--matrix", "required for kind dendrogram");
    std::ifstream min = open_input(matrix_path);
    const NamedSimilarityMatrix named = read_similarity_matrix(min);
    svg = render_dendrogram(hierarchical_cluster(named.matrix), named.codes, spec);
  } else if (kind == "stability") {
    if (curve_path.empty()) throw CLI::ValidationError("--curve", "required for kind stability");
    std::ifstream sin = open_input(curve_path);
    svg = render_stability(read_stability_curve(sin), spec);
  } else {
    throw CLI::ValidationError("--kind", "unknown kind '" + kind + "'");
  }

  if (out_path.find('/') != std::string::npos)
    fs::create_directories(fs::path(out_path).parent_path());
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out << svg;
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projective-mapping panel analysis: graph and distance consensus, factor scores, "
               "bootstrap stability"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "run one method on a panel and write its artifacts");
  PanelOptions an_popts;
  add_panel_options(analyze, an_popts, true);
  std::string an_method;
  double an_p = 2.0, an_delta = 0.05;
  int an_decile = 10, an_dims = 8, an_groups = 0;
  std::uint64_t an_seed = 0;
  std::string an_out;
  analyze->add_option("--method", an_method, "gabriel | distances | mfa")->required();
  analyze->add_option("--p", an_p, "tuning exponent for --method distances (>= 1)")
      ->capture_default_str();
  analyze->add_option("--decile", an_decile, "top deciles of edges drawn in the consensus figure")
      ->capture_default_str();
  analyze->add_option("--dims", an_dims, "consensus dimensions kept by --method mfa")
      ->capture_default_str();
  analyze->add_option("--delta", an_delta, "lower bound for layout target distances")
      ->capture_default_str();
  analyze->add_option("--groups", an_groups,
                      "clusters framed in the heatmap (default: widest dendrogram gap)");
  analyze->add_option("--seed", an_seed, "layout seed (0 = deterministic circle start)")
      ->capture_default_str();
  analyze->add_option("--out", an_out, "output directory")->required();

  // stability
  auto* stability = app.add_subcommand("stability", "bootstrap agreement against panel size");
  PanelOptions st_popts;
  add_panel_options(stability, st_popts, true);
  std::string st_method;
  double st_p = 2.0;
  int st_dims = 2, st_reps = 100, st_step = 10;
  std::uint64_t st_seed = 0;
  bool st_dump = false;
  std::string st_out;
  stability->add_option("--method", st_method, "gabriel | distances | mfa")->required();
  stability->add_option("--p", st_p, "tuning exponent for --method distances")->capture_default_str();
  stability->add_option("--dims", st_dims, "score dimensions compared for --method mfa")
      ->capture_default_str();
  stability->add_option("--reps", st_reps, "replicates per panel size")->capture_default_str();
  stability->add_option("--grid-step", st_step, "panel size grid step")->capture_default_str();
  stability->add_option("--seed", st_seed, "bootstrap master seed")->capture_default_str();
  stability->add_flag("--dump-replicates", st_dump, "also write every replicate value");
  stability->add_option("--out", st_out, "output directory")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic panel around a truth layout");
  std::string si_truth, si_out;
  double si_noise = 3.0, si_width = 60.0, si_height = 40.0;
  int si_n = 100;
  std::uint64_t si_seed = 0;
  simulate->add_option("--truth", si_truth, "truth configuration CSV (code,x,y)")->required();
  simulate->add_option("--noise-sd", si_noise, "per-axis Gaussian noise in cm")
      ->capture_default_str();
  simulate->add_option("--n", si_n, "number of tablecloths")->capture_default_str();
  simulate->add_option("--seed", si_seed, "generator seed")->capture_default_str();
  simulate->add_option("--sheet-width", si_width, "sheet width in cm")->capture_default_str();
  simulate->add_option("--sheet-height", si_height, "sheet height in cm")->capture_default_str();
  simulate->add_option("--out", si_out, "output panel CSV ('-' for stdout)")->required();

  // validate
  auto* validate = app.add_subcommand("validate", "check a panel file and report violations");
  PanelOptions va_popts;
  add_panel_options(validate, va_popts, false);

  // render
  auto* render = app.add_subcommand("render", "re-render a figure from exported artifacts");
  std::string re_kind, re_matrix, re_config, re_curve, re_out;
  int re_decile = 10, re_groups = 0;
  double re_threshold = 0.95;
  render->add_option("--kind", re_kind, "consensus | heatmap | dendrogram | stability")
      ->required();
  render->add_option("--matrix", re_matrix, "similarity matrix CSV");
  render->add_option("--config", re_config, "configuration CSV");
  render->add_option("--curve", re_curve, "stability curve CSV");
  render->add_option("--decile", re_decile, "edge filter for consensus")->capture_default_str();
  render->add_option("--groups", re_groups, "recluster and frame this many blocks (heatmap)");
  render->add_option("--threshold", re_threshold, "dashed reference level (stability)")
      ->capture_default_str();
  render->add_option("--out", re_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed())
      return cmd_analyze(an_popts, an_method, an_p, an_decile, an_seed, an_dims, an_delta,
                         an_groups, an_out);
    if (stability->parsed())
      return cmd_stability(st_popts, st_method, st_p, st_dims, st_reps, st_step, st_seed, st_dump,
                           st_out);
    if (simulate->parsed())
      return cmd_simulate(si_truth, si_noise, si_n, si_seed, si_width, si_height, si_out);
    if (validate->parsed()) return cmd_validate(va_popts);
    if (render->parsed())
      return cmd_render(re_kind, re_matrix, re_config, re_curve, re_decile, re_groups,
                        re_threshold, re_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
