#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "sensomap/panel.hpp"
#include "sensomap/rng.hpp"
#include "sensomap/stability.hpp"

using namespace sensomap;
using Catch::Approx;

namespace {

Eigen::MatrixXd random_config(Rng& rng, int q, int d) {
  Eigen::MatrixXd m(q, d);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-10.0, 10.0);
  return m;
}

Eigen::MatrixXd random_symmetric(Rng& rng, int q) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) m(i, j) = m(j, i) = rng.uniform(0.0, 5.0);
  return m;
}

Panel repeated_collinear_panel(int n) {
  // Every assessor places the three samples unevenly on one line, so the
  // graph method keeps a non-complete, identical local matrix each time.
  Panel panel;
  panel.products = {"s1", "s2", "s3"};
  for (int t = 0; t < n; ++t) {
    Tablecloth tc;
    tc.assessor_id = "a" + std::to_string(t + 1);
    tc.positions["s1"] = Point{5.0, 20.0};
    tc.positions["s2"] = Point{10.0, 20.0};
    tc.positions["s3"] = Point{25.0, 20.0};
    panel.tablecloths.push_back(std::move(tc));
  }
  return panel;
}

Panel noisy_panel(Rng& rng, int n, int q) {
  Panel panel;
  for (int s = 0; s < q; ++s) panel.products.push_back("s" + std::to_string(s + 1));
  for (int t = 0; t < n; ++t) {
    Tablecloth tc;
    tc.assessor_id = "a" + std::to_string(t + 1);
    for (int s = 0; s < q; ++s) {
      tc.positions[panel.products[s]] =
          Point{10.0 + 8.0 * s + rng.normal() * 2.0, 20.0 + rng.normal() * 2.0};
    }
    panel.tablecloths.push_back(std::move(tc));
  }
  return panel;
}

}  // namespace

TEST_CASE("a configuration agrees with itself completely") {
  Rng rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd x = random_config(rng, 6, 2);
    CHECK(rv_coefficient(x, x) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("rv coefficient ignores rotation, reflection, and scale") {
  Rng rng(72);
  for (int trial = 0; trial < 100; ++trial) {
    const int q = 4 + static_cast<int>(rng.uniform_int(6));
    Eigen::MatrixXd x = random_config(rng, q, 2);
    const double theta = rng.uniform(0.0, 6.28);
    const double scale = rng.uniform(0.2, 5.0);
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    if (trial % 2 == 0) rot.col(1) = -rot.col(1);  // reflect half the time
    Eigen::MatrixXd y = scale * (x * rot.transpose());
    y.col(0).array() += rng.uniform(-5.0, 5.0);
    y.col(1).array() += rng.uniform(-5.0, 5.0);
    CHECK(rv_coefficient(x, y) == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("rv coefficient stays between zero and one") {
  Rng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const int q = 4 + static_cast<int>(rng.uniform_int(6));
    Eigen::MatrixXd x = random_config(rng, q, 2);
    Eigen::MatrixXd y = random_config(rng, q, 3);
    const double rv = rv_coefficient(x, y);
    CHECK(rv >= 0.0);
    CHECK(rv <= 1.0 + 1e-12);
  }
}

TEST_CASE("rv coefficient rejects degenerate input") {
  Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(4, 2);  // centers to zero
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1;
  CHECK_THROWS_AS(rv_coefficient(flat, x), std::domain_error);
  Eigen::MatrixXd mismatched(3, 2);
  mismatched.setZero();
  CHECK_THROWS_AS(rv_coefficient(x, mismatched), std::invalid_argument);
}

TEST_CASE("mantel correlation of a matrix with itself is one") {
  Rng rng(74);
  Eigen::MatrixXd a = random_symmetric(rng, 6);
  CHECK(mantel_coefficient(a, a) == Approx(1.0).margin(1e-12));
}

TEST_CASE("mantel correlation follows affine maps of the entries") {
  Rng rng(75);
  Eigen::MatrixXd a = random_symmetric(rng, 6);
  Eigen::MatrixXd up = (2.5 * a).array() + 1.0;
  up.diagonal().setZero();
  Eigen::MatrixXd down = (-0.5 * a).array() + 4.0;
  down.diagonal().setZero();
  CHECK(mantel_coefficient(a, up) == Approx(1.0).margin(1e-10));
  CHECK(mantel_coefficient(a, down) == Approx(-1.0).margin(1e-10));
}

TEST_CASE("opposite orderings give exactly minus one") {
  Eigen::MatrixXd a(3, 3), b(3, 3);
  a << 0, 1, 2,
       1, 0, 3,
       2, 3, 0;
  b << 0, 3, 2,
       3, 0, 1,
       2, 1, 0;
  CHECK(mantel_coefficient(a, b) == -1.0);
}

TEST_CASE("mantel rejects bad input") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(4, 4);
  constant.diagonal().setZero();
  Eigen::MatrixXd a(4, 4);
  a.setZero();
  a(0, 1) = a(1, 0) = 1;
  a(0, 2) = a(2, 0) = 2;
  a(0, 3) = a(3, 0) = 3;
  a(1, 2) = a(2, 1) = 4;
  a(1, 3) = a(3, 1) = 5;
  a(2, 3) = a(3, 2) = 6;
  CHECK_THROWS_AS(mantel_coefficient(a, constant), std::domain_error);

  Eigen::MatrixXd asym = a;
  asym(0, 1) = 99;
  CHECK_THROWS_AS(mantel_coefficient(asym, a), std::invalid_argument);

  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 1, 0;
  CHECK_THROWS_AS(mantel_coefficient(two, two), std::invalid_argument);
}

TEST_CASE("bootstrap grid steps up and always ends at the panel size") {
  CHECK(bootstrap_grid(25, 10) == std::vector<int>{10, 20, 25});
  CHECK(bootstrap_grid(30, 10) == std::vector<int>{10, 20, 30});
  CHECK(bootstrap_grid(7, 10) == std::vector<int>{7});
  CHECK(bootstrap_grid(10, 10) == std::vector<int>{10});
  CHECK_THROWS_AS(bootstrap_grid(0, 10), std::invalid_argument);
  CHECK_THROWS_AS(bootstrap_grid(10, 0), std::invalid_argument);
}

TEST_CASE("method labels name the variant and its parameters") {
  AnalysisMethod mfa{AnalysisMethod::Kind::mfa, 2, 2.0};
  CHECK(mfa.label() == "mfa-d2");
  AnalysisMethod gabriel{AnalysisMethod::Kind::gabriel, 2, 2.0};
  CHECK(gabriel.label() == "gabriel");
  AnalysisMethod dist{AnalysisMethod::Kind::distances, 2, 2.0};
  CHECK(dist.label() == "distances-p2");
}

TEST_CASE("bootstrap runs are reproducible for a fixed seed") {
  Rng rng(76);
  Panel panel = noisy_panel(rng, 12, 4);
  AnalysisMethod method{AnalysisMethod::Kind::gabriel, 2, 2.0};
  std::vector<int> grid = bootstrap_grid(12, 5);
  StabilityCurve a = bootstrap_stability(panel, method, grid, 20, 99);
  StabilityCurve b = bootstrap_stability(panel, method, grid, 20, 99);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].m == b.points[i].m);
    CHECK(a.points[i].mean == b.points[i].mean);
    CHECK(a.points[i].sd == b.points[i].sd);
    CHECK(a.points[i].replicates == b.points[i].replicates);
  }
  CHECK(a.seed == 99);
  CHECK(a.method == "gabriel");
}

TEST_CASE("identical tablecloths agree perfectly at every subset size") {
  Panel panel = repeated_collinear_panel(15);
  AnalysisMethod method{AnalysisMethod::Kind::gabriel, 2, 2.0};
  std::vector<int> grid = bootstrap_grid(15, 5);
  StabilityCurve curve = bootstrap_stability(panel, method, grid, 15, 7);
  REQUIRE(curve.points.size() == 3);
  for (const StabilityPoint& pt : curve.points) {
    CHECK(pt.mean == Approx(1.0).margin(1e-12));
    CHECK(pt.sd == Approx(0.0).margin(1e-12));
    CHECK(pt.replicates == 15);
  }
}

TEST_CASE("two master seeds give close but not identical curves") {
  Rng rng(77);
  Panel panel = noisy_panel(rng, 20, 5);
  AnalysisMethod method{AnalysisMethod::Kind::distances, 2, 2.0};
  std::vector<int> grid = {20};
  StabilityCurve a = bootstrap_stability(panel, method, grid, 100, 1);
  StabilityCurve b = bootstrap_stability(panel, method, grid, 100, 2);
  CHECK(a.points[0].mean != b.points[0].mean);
  CHECK(std::abs(a.points[0].mean - b.points[0].mean) < 0.02);
}

TEST_CASE("mfa bootstrap produces sensible means") {
  Rng rng(78);
  Panel panel = noisy_panel(rng, 15, 5);
  AnalysisMethod method{AnalysisMethod::Kind::mfa, 2, 2.0};
  std::vector<int> grid = bootstrap_grid(15, 7);
  StabilityCurve curve = bootstrap_stability(panel, method, grid, 25, 3);
  REQUIRE(curve.points.size() == 3);
  for (const StabilityPoint& pt : curve.points) {
    CHECK(pt.mean > 0.0);
    CHECK(pt.mean <= 1.0 + 1e-12);
    CHECK(pt.sd >= 0.0);
    CHECK(pt.replicates > 0);
  }
  CHECK(curve.method == "mfa-d2");
}

TEST_CASE("bootstrap validates its grid") {
  Panel panel = repeated_collinear_panel(5);
  AnalysisMethod method{AnalysisMethod::Kind::gabriel, 2, 2.0};
  std::vector<int> unsorted = {10, 5};
  CHECK_THROWS_AS(bootstrap_stability(panel, method, unsorted, 5, 1), std::invalid_argument);
  std::vector<int> tiny = {1, 5};
  CHECK_THROWS_AS(bootstrap_stability(panel, method, tiny, 5, 1), std::invalid_argument);
  std::vector<int> empty;
  CHECK_THROWS_AS(bootstrap_stability(panel, method, empty, 5, 1), std::invalid_argument);
}

TEST_CASE("replicate dumps expose every drawn value") {
  Panel panel = repeated_collinear_panel(8);
  AnalysisMethod method{AnalysisMethod::Kind::gabriel, 2, 2.0};
  std::vector<int> grid = {4, 8};
  std::vector<ReplicateRecord> dump;
  bootstrap_stability(panel, method, grid, 6, 11, &dump);
  CHECK(dump.size() == 12);
  for (const ReplicateRecord& rec : dump) {
    CHECK((rec.m == 4 || rec.m == 8));
    CHECK(rec.value == Approx(1.0).margin(1e-12));
  }
  std::ostringstream out;
  write_replicate_dump(out, method.label(), dump);
  CHECK(out.str().find("gabriel,4,0,") != std::string::npos);
}

TEST_CASE("stability curves round trip through their file form") {
  Rng rng(79);
  Panel panel = noisy_panel(rng, 10, 4);
  AnalysisMethod method{AnalysisMethod::Kind::distances, 2, 2.0};
  StabilityCurve curve = bootstrap_stability(panel, method, bootstrap_grid(10, 4), 10, 21);

  std::ostringstream out;
  write_stability_curve(out, curve);
  std::istringstream in(out.str());
  StabilityCurve back = read_stability_curve(in);
  CHECK(back.method == curve.method);
  CHECK(back.seed == curve.seed);
  REQUIRE(back.points.size() == curve.points.size());
  for (size_t i = 0; i < curve.points.size(); ++i) {
    CHECK(back.points[i].m == curve.points[i].m);
    CHECK(back.points[i].mean == Approx(curve.points[i].mean).margin(1e-4));
    CHECK(back.points[i].sd == Approx(curve.points[i].sd).margin(1e-4));
    CHECK(back.points[i].replicates == curve.points[i].replicates);
  }
}
