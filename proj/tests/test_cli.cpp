#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sensomap/panel.hpp"
#include "sensomap/rng.hpp"
#include "sensomap/stability.hpp"
#include "sensomap/types.hpp"

using namespace sensomap;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Shared scratch area with a truth layout and one simulated panel, prepared on
// first use so test cases stay order independent.
struct Workspace {
  fs::path dir;
  fs::path truth;
  fs::path panel;
  fs::path dup_panel;
  fs::path oob_panel;

  RunResult run(const std::string& args) const {
    const fs::path log = dir / "last_run.log";
    const std::string cmd =
        std::string(SENSOMAP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    res.output = read_file(log);
    return res;
  }

  Workspace() {
    dir = fs::temp_directory_path() / ("sensomap_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    truth = dir / "truth.csv";
    {
      Configuration config;
      config.codes = {"s1", "s2", "s3", "s4", "s5"};
      config.coords.resize(5, 2);
      config.coords << 12, 12,
                       18, 14,
                       15, 26,
                       44, 24,
                       48, 14;
      std::ofstream out(truth);
      write_configuration(out, config);
    }

    panel = dir / "panel.csv";
    RunResult sim = run("simulate --truth " + truth.string() +
                        " --noise-sd 2.5 --n 12 --seed 5 --out " + panel.string());
    if (sim.exit_code != 0) {
      throw std::runtime_error("simulate failed during setup: " + sim.output);
    }

    dup_panel = dir / "dup.csv";
    {
      std::ofstream out(dup_panel);
      out << "assessor_id,sample_code,x_cm,y_cm\n"
             "a1,s1,10,10\n"
             "a1,s2,10,10\n"
             "a1,s3,30,20\n"
             "a2,s1,5,5\n"
             "a2,s2,20,20\n"
             "a2,s3,40,30\n";
    }

    oob_panel = dir / "oob.csv";
    {
      std::ofstream out(oob_panel);
      out << "assessor_id,sample_code,x_cm,y_cm\n"
             "a1,s1,75,10\n"
             "a1,s2,20,20\n"
             "a1,s3,30,20\n"
             "a2,s1,5,5\n"
             "a2,s2,20,20\n"
             "a2,s3,40,30\n";
    }
  }
};

const Workspace& ws() {
  static Workspace w;
  return w;
}

const std::vector<std::string> kAnalysisArtifacts = {
    "global_matrix.csv", "matrix_reordered.csv", "configuration.csv", "dendrogram.txt",
    "consensus.svg",     "heatmap.svg",          "dendrogram.svg"};

}  // namespace

TEST_CASE("simulate produces a valid, reproducible panel") {
  std::ifstream in(ws().panel);
  Panel panel = parse_panel(in);
  CHECK(panel.assessor_count() == 12);
  CHECK(panel.sample_count() == 5);
  CHECK(validate_panel(panel).empty());

  const fs::path again = ws().dir / "panel_again.csv";
  RunResult res = ws().run("simulate --truth " + ws().truth.string() +
                           " --noise-sd 2.5 --n 12 --seed 5 --out " + again.string());
  CHECK(res.exit_code == 0);
  CHECK(read_file(again) == read_file(ws().panel));

  const fs::path other = ws().dir / "panel_other.csv";
  RunResult res2 = ws().run("simulate --truth " + ws().truth.string() +
                            " --noise-sd 2.5 --n 12 --seed 6 --out " + other.string());
  CHECK(res2.exit_code == 0);
  CHECK(read_file(other) != read_file(ws().panel));
}

TEST_CASE("analyze writes the full artifact set and is deterministic") {
  const fs::path out1 = ws().dir / "an1";
  const fs::path out2 = ws().dir / "an2";
  RunResult first = ws().run("analyze --input " + ws().panel.string() +
                             " --method gabriel --out " + out1.string());
  REQUIRE(first.exit_code == 0);
  for (const std::string& name : kAnalysisArtifacts) {
    INFO(name);
    CHECK(fs::exists(out1 / name));
  }

  RunResult second = ws().run("analyze --input " + ws().panel.string() +
                              " --method gabriel --out " + out2.string());
  REQUIRE(second.exit_code == 0);
  for (const std::string& name : kAnalysisArtifacts) {
    INFO(name);
    CHECK(read_file(out1 / name) == read_file(out2 / name));
  }
}

TEST_CASE("distance analysis accepts its tuning exponent") {
  const fs::path out = ws().dir / "an_dist";
  RunResult res = ws().run("analyze --input " + ws().panel.string() +
                           " --method distances --p 3 --decile 4 --out " + out.string());
  REQUIRE(res.exit_code == 0);
  CHECK(read_file(out / "global_matrix.csv").find("variant=distances n=12 p=3") !=
        std::string::npos);
}

TEST_CASE("mfa analysis writes scores and a consensus map") {
  const fs::path out = ws().dir / "an_mfa";
  RunResult res = ws().run("analyze --input " + ws().panel.string() + " --method mfa --out " +
                           out.string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(out / "consensus.svg"));
  const std::string scores = read_file(out / "mfa_scores.csv");
  CHECK(scores.find("explained:") != std::string::npos);
  CHECK(scores.find("Dim1") != std::string::npos);
  CHECK(scores.find("s1") != std::string::npos);
}

TEST_CASE("coincident samples abort the analysis unless jitter is allowed") {
  const fs::path out = ws().dir / "an_dup";
  RunResult plain = ws().run("analyze --input " + ws().dup_panel.string() +
                             " --method gabriel --out " + out.string());
  CHECK(plain.exit_code == 1);
  CHECK(plain.output.find("error") != std::string::npos);

  RunResult jittered = ws().run("analyze --input " + ws().dup_panel.string() +
                                " --method gabriel --jitter --out " + out.string());
  CHECK(jittered.exit_code == 0);
  CHECK(jittered.output.find("jitter: moved 1") != std::string::npos);
}

TEST_CASE("usage problems exit with code two") {
  CHECK(ws().run("analyze --input " + ws().panel.string() + " --method bogus --out " +
                 (ws().dir / "x").string())
            .exit_code == 2);
  CHECK(ws().run("analyze --frobnicate").exit_code == 2);
  CHECK(ws().run("").exit_code == 2);
  CHECK(ws().run("--help").exit_code == 0);
  CHECK(ws().run("analyze --help").exit_code == 0);
}

TEST_CASE("missing input files exit with code one") {
  CHECK(ws().run("analyze --input /nonexistent.csv --method gabriel --out " +
                 (ws().dir / "x").string())
            .exit_code == 1);
  CHECK(ws().run("render --kind stability --curve /nonexistent.csv --out " +
                 (ws().dir / "x.svg").string())
            .exit_code == 1);
}

TEST_CASE("validate distinguishes warnings from errors") {
  RunResult clean = ws().run("validate --input " + ws().panel.string());
  CHECK(clean.exit_code == 0);
  CHECK(clean.output.find("ok:") != std::string::npos);

  RunResult oob = ws().run("validate --input " + ws().oob_panel.string());
  CHECK(oob.exit_code == 0);
  CHECK(oob.output.find("warning") != std::string::npos);

  RunResult dup = ws().run("validate --input " + ws().dup_panel.string());
  CHECK(dup.exit_code == 1);
  CHECK(dup.output.find("error") != std::string::npos);
}

TEST_CASE("stability writes one row per grid size plus a chart") {
  const fs::path out = ws().dir / "stab";
  RunResult res = ws().run("stability --input " + ws().panel.string() +
                           " --method gabriel --reps 5 --grid-step 5 --seed 3 --out " +
                           out.string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(out / "stability.svg"));

  std::ifstream curve_in(out / "stability_curve.csv");
  StabilityCurve curve = read_stability_curve(curve_in);
  CHECK(curve.method == "gabriel");
  CHECK(curve.seed == 3);
  REQUIRE(curve.points.size() == 3);  // panel sizes 5, 10, 12
  CHECK(curve.points[0].m == 5);
  CHECK(curve.points[2].m == 12);

  const fs::path rerun = ws().dir / "stab_rerun";
  REQUIRE(ws().run("stability --input " + ws().panel.string() +
                   " --method gabriel --reps 5 --grid-step 5 --seed 3 --out " + rerun.string())
              .exit_code == 0);
  CHECK(read_file(rerun / "stability_curve.csv") == read_file(out / "stability_curve.csv"));

  const fs::path dumped = ws().dir / "stab_dump";
  RunResult res2 = ws().run("stability --input " + ws().panel.string() +
                            " --method mfa --dims 2 --reps 4 --grid-step 6 --seed 3 "
                            "--dump-replicates --out " +
                            dumped.string());
  REQUIRE(res2.exit_code == 0);
  const std::string dump = read_file(dumped / "replicates.csv");
  CHECK(dump.find("method,m,replicate,value") != std::string::npos);
  CHECK(dump.find("mfa-d2,6,0,") != std::string::npos);
}

TEST_CASE("options can come from a config file") {
  const fs::path ini = ws().dir / "opts.ini";
  const fs::path out = ws().dir / "an_cfg";
  {
    std::ofstream cfg(ini);
    cfg << "[analyze]\n"
        << "input=" << ws().panel.string() << "\n"
        << "method=gabriel\n"
        << "out=" << out.string() << "\n";
  }
  RunResult res = ws().run("--config " + ini.string() + " analyze");
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(out / "global_matrix.csv"));

  const fs::path direct = ws().dir / "an_direct";
  REQUIRE(ws().run("analyze --input " + ws().panel.string() + " --method gabriel --out " +
                   direct.string())
              .exit_code == 0);
  CHECK(read_file(out / "global_matrix.csv") == read_file(direct / "global_matrix.csv"));
}

TEST_CASE("render rebuilds figures from exported artifacts") {
  const fs::path analysis = ws().dir / "an_render";
  REQUIRE(ws().run("analyze --input " + ws().panel.string() + " --method gabriel --out " +
                   analysis.string())
              .exit_code == 0);

  const fs::path heat = ws().dir / "re_heat.svg";
  RunResult hres = ws().run("render --kind heatmap --matrix " +
                            (analysis / "global_matrix.csv").string() + " --groups 2 --out " +
                            heat.string());
  CHECK(hres.exit_code == 0);
  CHECK(read_file(heat).rfind("<svg", 0) == 0);

  const fs::path cons = ws().dir / "re_cons.svg";
  RunResult cres = ws().run("render --kind consensus --config " +
                            (analysis / "configuration.csv").string() + " --matrix " +
                            (analysis / "global_matrix.csv").string() + " --decile 3 --out " +
                            cons.string());
  CHECK(cres.exit_code == 0);
  CHECK(read_file(cons).find("class=\"edge\"") != std::string::npos);

  const fs::path dend = ws().dir / "re_dend.svg";
  CHECK(ws().run("render --kind dendrogram --matrix " +
                 (analysis / "global_matrix.csv").string() + " --out " + dend.string())
            .exit_code == 0);

  const fs::path stab_dir = ws().dir / "stab_render";
  REQUIRE(ws().run("stability --input " + ws().panel.string() +
                   " --method distances --reps 4 --grid-step 6 --seed 2 --out " +
                   stab_dir.string())
              .exit_code == 0);
  const fs::path stab_svg = ws().dir / "re_stab.svg";
  RunResult sres = ws().run("render --kind stability --curve " +
                            (stab_dir / "stability_curve.csv").string() + " --threshold 0.9 --out " +
                            stab_svg.string());
  CHECK(sres.exit_code == 0);
  CHECK(read_file(stab_svg).find("stroke-dasharray") != std::string::npos);

  CHECK(ws().run("render --kind heatmap --out " + (ws().dir / "no.svg").string()).exit_code == 2);
}
