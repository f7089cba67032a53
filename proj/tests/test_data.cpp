#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "letsne/data.hpp"
#include "letsne/rng.hpp"
#include "test_util.hpp"

using namespace letsne;
using testutil::TempDir;

TEST_CASE("load_tabular parses features and remaps string labels") {
  TempDir dir("tabular_basic");
  testutil::write_file(dir / "d.csv", "f0,f1,cls\n1,2,a\n3,4,a\n5,6,b\n");
  const DataMatrix d = load_tabular((dir / "d.csv").string(), "cls");
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 2);
  CHECK(d.values(0, 0) == 1.0);
  CHECK(d.values(2, 1) == 6.0);
  CHECK(d.labels == std::vector<int>{0, 0, 1});
  CHECK(!d.grid.has_value());
}

TEST_CASE("load_tabular remaps numeric labels in sorted order") {
  TempDir dir("tabular_remap");
  testutil::write_file(dir / "d.csv", "x,y\n0.5,5\n0.25,9\n0.75,5\n");
  const DataMatrix d = load_tabular((dir / "d.csv").string(), "y");
  // oracle: sorted unique {5, 9} -> {0, 1}
  std::set<int> raw = {5, 9, 5};
  std::vector<int> sorted_unique(raw.begin(), raw.end());
  CHECK(sorted_unique == std::vector<int>{5, 9});
  CHECK(d.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_tabular rejects bad inputs") {
  TempDir dir("tabular_errors");
  testutil::write_file(dir / "one_row.csv", "a,b\n1,2\n");
  CHECK_THROWS_WITH_AS(load_tabular((dir / "one_row.csv").string()),
                       doctest::Contains("fewer than 2 samples"), ParseError);

  testutil::write_file(dir / "ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(load_tabular((dir / "ragged.csv").string()), doctest::Contains(":3"),
                       ParseError);

  testutil::write_file(dir / "text.csv", "a,b\n1,2\n3,oops\n");
  CHECK_THROWS_AS(load_tabular((dir / "text.csv").string()), ParseError);

  testutil::write_file(dir / "ok.csv", "a,b\n1,2\n3,4\n");
  CHECK_THROWS_WITH_AS(load_tabular((dir / "ok.csv").string(), "missing"),
                       doctest::Contains("missing"), ParseError);
}

TEST_CASE("load_cube shapes and label conventions") {
  TempDir dir("cube");
  DataMatrix cube;
  cube.values.resize(4, 3);
  for (Index i = 0; i < 12; ++i) cube.values(i / 3, i % 3) = static_cast<double>(i) * 0.5;
  cube.grid = {2, 2};
  save_cube(cube, (dir / "c.hsc").string());

  const DataMatrix d = load_cube((dir / "c.hsc").string());
  REQUIRE(d.rows() == 4);
  REQUIRE(d.cols() == 3);
  REQUIRE(d.grid.has_value());
  CHECK(*d.grid == std::pair<int, int>(2, 2));
  CHECK(d.values == cube.values);
  CHECK(!d.has_labels());

  SUBCASE("degenerate single-row image") {
    DataMatrix strip;
    strip.values = Matrix::Random(5, 2);
    strip.grid = {1, 5};
    save_cube(strip, (dir / "s.hsc").string());
    const DataMatrix back = load_cube((dir / "s.hsc").string());
    CHECK(back.rows() == 5);
    CHECK(back.cols() == 2);
    CHECK(*back.grid == std::pair<int, int>(1, 5));
  }

  SUBCASE("all-zero label band means zero supervised samples") {
    DataMatrix lab = cube;
    lab.labels = {-1, -1, -1, -1};
    save_cube(lab, (dir / "l.hsc").string());
    const DataMatrix back = load_cube((dir / "l.hsc").string());
    REQUIRE(back.has_labels());
    CHECK(back.labelled_rows().empty());
    CHECK(back.num_classes() == 0);
  }
}

TEST_CASE("load_cube rejects malformed files") {
  TempDir dir("cube_bad");
  testutil::write_file(dir / "short.hsc",
                       std::string("HSCUBE01") +
                           "{\"height\":2,\"width\":2,\"bands\":3,\"dtype\":\"f64\",\"has_labels\":false}\n" +
                           "only a few bytes");
  CHECK_THROWS_WITH_AS(load_cube((dir / "short.hsc").string()), doctest::Contains("shorter"),
                       FormatError);

  testutil::write_file(dir / "zero.hsc",
                       std::string("HSCUBE01") +
                           "{\"height\":0,\"width\":2,\"bands\":3,\"dtype\":\"f64\",\"has_labels\":false}\n");
  CHECK_THROWS_AS(load_cube((dir / "zero.hsc").string()), FormatError);

  testutil::write_file(dir / "magic.hsc", "NOTACUBE rest");
  CHECK_THROWS_AS(load_cube((dir / "magic.hsc").string()), FormatError);
}

TEST_CASE("cube save/load round-trips bit-exactly") {
  TempDir dir("cube_rt");
  Rng rng(99);
  DataMatrix d;
  d.values.resize(6, 4);
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) d.values(i, j) = rng.normal();
  }
  d.grid = {2, 3};
  d.labels = {0, 1, -1, 2, 1, 0};

  SUBCASE("f64") {
    save_cube(d, (dir / "rt64.hsc").string(), "f64");
    const DataMatrix back = load_cube((dir / "rt64.hsc").string());
    CHECK(back.values == d.values);
    CHECK(back.labels == d.labels);
    // second trip is stable too
    save_cube(back, (dir / "rt64b.hsc").string(), "f64");
    CHECK(testutil::read_file(dir / "rt64.hsc") == testutil::read_file(dir / "rt64b.hsc"));
  }
  SUBCASE("f32 payloads widen exactly and round-trip") {
    DataMatrix f32 = d;
    for (Index i = 0; i < f32.values.size(); ++i) {
      f32.values.data()[i] = static_cast<double>(static_cast<float>(f32.values.data()[i]));
    }
    save_cube(f32, (dir / "rt32.hsc").string(), "f32");
    const DataMatrix back = load_cube((dir / "rt32.hsc").string());
    CHECK(back.values == f32.values);
  }
}

TEST_CASE("standardize hits the documented examples") {
  DataMatrix d;
  d.values.resize(3, 3);
  d.values.col(0) << 0.0, 2.0, 1.0;
  d.values.col(1) << 3.0, 3.0, 3.0;
  d.values.col(2) << 1.0, 2.0, 3.0;
  const DataMatrix s = standardize(d);

  SUBCASE("constant column becomes zero with std recorded as 1") {
    CHECK(s.values.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.feature_stds(1) == 1.0);
    CHECK(s.feature_means(1) == 3.0);
  }
  SUBCASE("[1,2,3] maps to +-sqrt(3/2)") {
    const double r = std::sqrt(1.5);
    CHECK(s.values(0, 2) == doctest::Approx(-r).epsilon(1e-12));
    CHECK(s.values(1, 2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.values(2, 2) == doctest::Approx(r).epsilon(1e-12));
  }
  SUBCASE("two-point column maps to -1, 1") {
    DataMatrix two;
    two.values.resize(2, 1);
    two.values << 0.0, 2.0;
    const DataMatrix st = standardize(two);
    CHECK(st.values(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(st.values(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("standardize is idempotent and normalizes every column") {
  Rng rng(5);
  DataMatrix d;
  d.values.resize(40, 6);
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) d.values(i, j) = 10.0 * rng.normal() + 3.0 * j;
  }
  const DataMatrix s = standardize(d);
  for (Index j = 0; j < s.cols(); ++j) {
    CHECK(std::abs(s.values.col(j).mean()) < 1e-9);
    const double var = s.values.col(j).squaredNorm() / static_cast<double>(s.rows());
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
  }
  const DataMatrix s2 = standardize(s);
  CHECK((s2.values - s.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("make_blobs shape, balance, determinism") {
  const DataMatrix d = make_blobs(50, 3, 10, 1.0, 7);
  REQUIRE(d.rows() == 150);
  REQUIRE(d.cols() == 10);
  int counts[3] = {0, 0, 0};
  for (int l : d.labels) ++counts[l];
  CHECK(counts[0] == 50);
  CHECK(counts[1] == 50);
  CHECK(counts[2] == 50);

  const DataMatrix again = make_blobs(50, 3, 10, 1.0, 7);
  CHECK(again.values == d.values);
  CHECK(again.labels == d.labels);
  CHECK(make_blobs(50, 3, 10, 1.0, 8).values != d.values);
}

TEST_CASE("make_blobs with vanishing spread gives perfect 1-NN accuracy") {
  const DataMatrix d = make_blobs(20, 4, 8, 1e-9, 3);
  // brute-force leave-one-out 1-NN oracle
  Index correct = 0;
  for (Index i = 0; i < d.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index arg = 0;
    for (Index j = 0; j < d.rows(); ++j) {
      if (j == i) continue;
      const double dist = (d.values.row(i) - d.values.row(j)).squaredNorm();
      if (dist < best) {
        best = dist;
        arg = j;
      }
    }
    if (d.labels[static_cast<size_t>(arg)] == d.labels[static_cast<size_t>(i)]) ++correct;
  }
  CHECK(correct == d.rows());
}

TEST_CASE("make_swiss_roll lies on the roll surface") {
  const DataMatrix d = make_swiss_roll(500, 0.0, 1);
  REQUIRE(d.rows() == 500);
  REQUIRE(d.cols() == 3);
  REQUIRE(d.color_proxy.size() == 500);
  for (Index i = 0; i < d.rows(); ++i) {
    const double t = d.color_proxy[static_cast<size_t>(i)];
    CHECK(t >= 1.5 * M_PI);
    CHECK(t <= 4.5 * M_PI);
    CHECK(std::abs(d.values(i, 0) - t * std::cos(t)) < 1e-9);
    CHECK(std::abs(d.values(i, 2) - t * std::sin(t)) < 1e-9);
  }
  CHECK(make_swiss_roll(10, 0.0, 2).rows() == 10);  // minimal n
  CHECK_THROWS_AS(make_swiss_roll(9, 0.0, 2), UsageError);
  CHECK(make_swiss_roll(50, 0.1, 4).values == make_swiss_roll(50, 0.1, 4).values);
}
