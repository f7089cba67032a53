#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "letsne/data.hpp"
#include "letsne/segmentation.hpp"
#include "test_util.hpp"

using testutil::TempDir;

namespace {

const std::string kCli = LETSNE_CLI_PATH;

int run(const std::string& args, const std::filesystem::path& log = {}) {
  std::string cmd = kCli + " " + args;
  if (!log.empty()) {
    cmd += " >" + log.string() + " 2>&1";
  } else {
    cmd += " >/dev/null 2>&1";
  }
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

size_t count_lines(const std::string& text) {
  return static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
}

size_t count_occurrences(const std::string& text, const std::string& needle) {
  size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("synth writes datasets and manifests") {
  TempDir dir("cli_synth");
  REQUIRE(run("synth --kind blobs --n-per-class 50 --classes 3 --dims 4 --seed 1 --out " +
              (dir / "b").string()) == 0);
  const std::string csv = testutil::read_file(dir / "b" / "dataset.csv");
  CHECK(count_lines(csv) == 151);  // header + 150 rows
  CHECK(csv.substr(0, csv.find('\n')) == "x0,x1,x2,x3,label");
  CHECK(std::filesystem::exists(dir / "b" / "manifest.json"));

  REQUIRE(run("synth --kind swissroll --n 60 --seed 2 --out " + (dir / "s").string()) == 0);
  CHECK(count_lines(testutil::read_file(dir / "s" / "dataset.csv")) == 61);
  CHECK(count_lines(testutil::read_file(dir / "s" / "color.csv")) == 61);

  CHECK(run("synth --kind nonsense --out " + (dir / "x").string()) == 2);
}

TEST_CASE("synth is deterministic") {
  TempDir dir("cli_synth_det");
  REQUIRE(run("synth --kind blobs --seed 5 --out " + (dir / "a").string()) == 0);
  REQUIRE(run("synth --kind blobs --seed 5 --out " + (dir / "b").string()) == 0);
  CHECK(testutil::read_file(dir / "a" / "dataset.csv") ==
        testutil::read_file(dir / "b" / "dataset.csv"));
}

TEST_CASE("embed: visualization run produces the full artifact set") {
  TempDir dir("cli_embed");
  REQUIRE(run("synth --kind swissroll --n 96 --seed 3 --out " + (dir / "data").string()) == 0);
  const std::string emb = "embed --input " + (dir / "data" / "dataset.csv").string() +
                          " --mode vis --k 5 --perplexity 8 --epochs 2 --batch-size 32 "
                          "--hidden 16 --hidden 8 --seed 4 --out ";
  REQUIRE(run(emb + (dir / "run").string()) == 0);

  const std::string csv = testutil::read_file(dir / "run" / "embeddings.csv");
  CHECK(count_lines(csv) == 97);
  CHECK(csv.substr(0, csv.find('\n')) == "y0,y1");
  CHECK(count_lines(testutil::read_file(dir / "run" / "loss.csv")) == 3);  // header + 2 epochs
  CHECK(std::filesystem::exists(dir / "run" / "model.bin"));
  CHECK(std::filesystem::exists(dir / "run" / "manifest.json"));

  SUBCASE("re-running with the same seed is byte-identical") {
    REQUIRE(run(emb + (dir / "run2").string()) == 0);
    for (const char* name : {"embeddings.csv", "loss.csv", "model.bin", "manifest.json"}) {
      CHECK(testutil::read_file(dir / "run" / name) == testutil::read_file(dir / "run2" / name));
    }
  }
}

TEST_CASE("embed: labelled mode without labels exits 2 and names the problem") {
  TempDir dir("cli_embed_nolab");
  REQUIRE(run("synth --kind swissroll --n 64 --seed 1 --out " + (dir / "data").string()) == 0);
  const int code = run("embed --input " + (dir / "data" / "dataset.csv").string() +
                           " --mode labelled --out " + (dir / "run").string(),
                       dir / "log.txt");
  CHECK(code == 2);
  const std::string log = testutil::read_file(dir / "log.txt");
  CHECK(log.find("label") != std::string::npos);
}

TEST_CASE("embed honors config files with flag overrides") {
  TempDir dir("cli_config");
  REQUIRE(run("synth --kind blobs --n-per-class 16 --classes 2 --dims 3 --seed 6 --out " +
              (dir / "data").string()) == 0);
  testutil::write_file(dir / "cfg.json",
                       std::string("{\"input\": \"") + (dir / "data" / "dataset.csv").string() +
                           "\", \"label_column\": \"label\", \"mode\": \"labelled\", "
                           "\"epochs\": 3, \"batch_size\": 8, \"perplexity\": 5, "
                           "\"hidden\": [8], \"out\": \"" + (dir / "from_cfg").string() + "\"}");
  REQUIRE(run("embed --config " + (dir / "cfg.json").string()) == 0);
  const std::string manifest = testutil::read_file(dir / "from_cfg" / "manifest.json");
  CHECK(manifest.find("\"epochs\": 3") != std::string::npos);

  // flag wins over the file value
  REQUIRE(run("embed --config " + (dir / "cfg.json").string() + " --epochs 2 --out " +
              (dir / "override").string()) == 0);
  const std::string manifest2 = testutil::read_file(dir / "override" / "manifest.json");
  CHECK(manifest2.find("\"epochs\": 2") != std::string::npos);

  testutil::write_file(dir / "bad.json", "{\"bogus\": 1}");
  CHECK(run("embed --config " + (dir / "bad.json").string()) == 2);
}

TEST_CASE("segment on a small cube tiles it and is deterministic") {
  TempDir dir("cli_segment");
  letsne::DataMatrix cube;
  cube.values = letsne::Matrix::Constant(64, 3, 0.5);
  cube.grid = {8, 8};
  letsne::save_cube(cube, (dir / "cube.hsc").string());

  const std::string cmd = "segment --input " + (dir / "cube.hsc").string() +
                          " --target-regions 4 --channels 1 --out ";
  REQUIRE(run(cmd + (dir / "a").string()) == 0);
  const letsne::RegionMap map = letsne::load_region_map((dir / "a" / "regions.csv").string());
  CHECK(map.region_count == 4);
  CHECK(std::filesystem::exists(dir / "a" / "regions.svg"));

  REQUIRE(run(cmd + (dir / "b").string()) == 0);
  CHECK(testutil::read_file(dir / "a" / "regions.csv") ==
        testutil::read_file(dir / "b" / "regions.csv"));

  SUBCASE("single target region") {
    REQUIRE(run("segment --input " + (dir / "cube.hsc").string() +
                " --target-regions 1 --channels 1 --out " + (dir / "one").string()) == 0);
    CHECK(letsne::load_region_map((dir / "one" / "regions.csv").string()).region_count == 1);
  }
  SUBCASE("tabular input is refused") {
    testutil::write_file(dir / "flat.csv", "a,b\n1,2\n3,4\n");
    CHECK(run("segment --input " + (dir / "flat.csv").string() + " --out " +
              (dir / "no").string()) == 2);
  }
}

TEST_CASE("eval pipeline reports accuracy and is deterministic") {
  TempDir dir("cli_eval");
  REQUIRE(run("synth --kind blobs --n-per-class 20 --classes 3 --dims 4 --spread 0.05 --seed 8 "
              "--out " + (dir / "data").string()) == 0);
  // well-separated blobs: the raw features are already a perfect embedding
  const std::string data_csv = (dir / "data" / "dataset.csv").string();
  REQUIRE(run("embed --input " + data_csv +
              " --label-column label --mode labelled --epochs 6 --batch-size 16 --perplexity 8 "
              "--hidden 16 --seed 9 --out " + (dir / "run").string()) == 0);

  const std::string eval_cmd = "eval --embeddings " + (dir / "run" / "embeddings.csv").string() +
                               " --data " + data_csv + " --label-column label --seed 3 --out ";
  REQUIRE(run(eval_cmd + (dir / "e1").string()) == 0);
  REQUIRE(run(eval_cmd + (dir / "e2").string()) == 0);
  CHECK(testutil::read_file(dir / "e1" / "report.json") ==
        testutil::read_file(dir / "e2" / "report.json"));
  CHECK(testutil::read_file(dir / "e1" / "report.json").find("accuracy") != std::string::npos);

  SUBCASE("missing labels exit 2") {
    REQUIRE(run("synth --kind swissroll --n 60 --seed 1 --out " + (dir / "plain").string()) == 0);
    CHECK(run("eval --embeddings " + (dir / "run" / "embeddings.csv").string() + " --data " +
              (dir / "plain" / "dataset.csv").string() + " --out " + (dir / "e3").string()) == 2);
  }
  SUBCASE("pca baseline report") {
    REQUIRE(run(eval_cmd + (dir / "eb").string() + " --pca-baseline") == 0);
    const std::string baseline = testutil::read_file(dir / "eb" / "pca_baseline.json");
    CHECK(baseline.find("accuracy") != std::string::npos);
    CHECK(baseline.find("kappa") != std::string::npos);
  }
}

TEST_CASE("plot renders one circle per sample with the documented viewport") {
  TempDir dir("cli_plot");
  testutil::write_file(dir / "emb.csv", "y0,y1\n0,0\n10,10\n5,5\n");
  REQUIRE(run("plot --embeddings " + (dir / "emb.csv").string() + " --out " +
              (dir / "p").string()) == 0);
  const std::string svg = testutil::read_file(dir / "p" / "plot.svg");
  CHECK(count_occurrences(svg, "<circle") == 3);
  // 5% margins of an 800x600 viewport: x in [40, 760], y in [30, 570]
  CHECK(svg.find("cx=\"40.000\" cy=\"570.000\"") != std::string::npos);
  CHECK(svg.find("cx=\"760.000\" cy=\"30.000\"") != std::string::npos);
  CHECK(svg.find("cx=\"400.000\" cy=\"300.000\"") != std::string::npos);

  SUBCASE("categorical colors come from the colors file") {
    testutil::write_file(dir / "colors.csv", "label\n0\n1\n0\n");
    REQUIRE(run("plot --embeddings " + (dir / "emb.csv").string() + " --colors " +
                (dir / "colors.csv").string() + " --color-by label --out " +
                (dir / "pc").string()) == 0);
    const std::string colored = testutil::read_file(dir / "pc" / "plot.svg");
    CHECK(count_occurrences(colored, "#1f77b4") == 2);
    CHECK(count_occurrences(colored, "#ff7f0e") == 1);
  }
  SUBCASE("empty input exits 2") {
    testutil::write_file(dir / "empty.csv", "y0,y1\n");
    CHECK(run("plot --embeddings " + (dir / "empty.csv").string() + " --out " +
              (dir / "pe").string()) == 2);
  }
}

TEST_CASE("region-mode embed consumes a region map") {
  TempDir dir("cli_region");
  // 6x6 cube with two vertical halves of contrasting band values
  letsne::DataMatrix cube;
  cube.values.resize(36, 3);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      for (int b = 0; b < 3; ++b) {
        cube.values(r * 6 + c, b) = (c < 3 ? 0.0 : 4.0) + 0.01 * (r + b);
      }
    }
  }
  cube.grid = {6, 6};
  letsne::save_cube(cube, (dir / "cube.hsc").string());

  REQUIRE(run("segment --input " + (dir / "cube.hsc").string() +
              " --target-regions 2 --channels 1 --out " + (dir / "seg").string()) == 0);
  REQUIRE(run("embed --input " + (dir / "cube.hsc").string() + " --mode region --regions " +
              (dir / "seg" / "regions.csv").string() +
              " --epochs 2 --batch-size 12 --perplexity 6 --hidden 8 --out " +
              (dir / "run").string()) == 0);
  CHECK(count_lines(testutil::read_file(dir / "run" / "embeddings.csv")) == 37);

  SUBCASE("region mode without a region map exits 2") {
    CHECK(run("embed --input " + (dir / "cube.hsc").string() + " --mode region --out " +
              (dir / "no").string()) == 2);
  }
}
