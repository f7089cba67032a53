#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "letsne/affinity.hpp"
#include "letsne/common.hpp"
#include "letsne/data.hpp"
#include "letsne/eval.hpp"
#include "letsne/graph.hpp"
#include "letsne/network.hpp"
#include "letsne/objective.hpp"
#include "letsne/segmentation.hpp"
#include "letsne/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw letsne::FormatError("cannot open for write: " + path.string());
  out << text;
}

letsne::DataMatrix load_dataset(const std::string& path,
                                const std::optional<std::string>& label_column) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".hsc") {
    return letsne::load_cube(path);
  }
  return letsne::load_tabular(path, label_column);
}

/// Binds config-file keys to CLI options so that flag > file > default.
class ConfigBinding {
public:
  template <typename T>
  void bind(const std::string& key, CLI::Option* opt, T* target) {
    options_[key] = opt;
    setters_[key] = [target](const json& value) { *target = value.get<T>(); };
  }

  void apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw letsne::UsageError("config: cannot open " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw letsne::UsageError("config: " + path + " is not valid JSON: " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      auto it = setters_.find(key);
      if (it == setters_.end()) throw letsne::UsageError("config: unknown key '" + key + "'");
      if (options_.at(key)->count() > 0) continue;  // explicit flag wins
      try {
        it->second(value);
      } catch (const json::exception& e) {
        throw letsne::UsageError("config: bad value for '" + key + "': " + e.what());
      }
    }
  }

private:
  std::map<std::string, CLI::Option*> options_;
  std::map<std::string, std::function<void(const json&)>> setters_;
};

struct EmbedOptions {
  std::string config_path, input, label_column, regions_path, out = "run";
  std::string mode = "vis";
  double cf = -1.0;  // -1: per-mode default
  double lambda = 1.0, perplexity = 30.0, lr = 1e-3;
  int k = 10, dims = 2, epochs = 50, batch_size = 256;
  uint64_t seed = 0;
  std::vector<int> hidden = {256, 64};
};

void write_embeddings_csv(const fs::path& path, const letsne::Matrix& Y) {
  std::string text;
  for (letsne::Index j = 0; j < Y.cols(); ++j) {
    text += (j ? "," : "") + ("y" + std::to_string(j));
  }
  text += '\n';
  for (letsne::Index i = 0; i < Y.rows(); ++i) {
    for (letsne::Index j = 0; j < Y.cols(); ++j) {
      if (j) text += ',';
      text += fmt17(Y(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

int cmd_embed(const EmbedOptions& opt) {
  const letsne::TrainMode mode = letsne::train_mode_from_string(opt.mode);
  letsne::TrainConfig cfg = letsne::TrainConfig::defaults_for(mode);
  cfg.cf = opt.cf >= 0.0 ? opt.cf : cfg.cf;
  cfg.lambda = opt.lambda;
  cfg.perplexity = opt.perplexity;
  cfg.k = opt.k;
  cfg.embedding_dim = opt.dims;
  cfg.epochs = opt.epochs;
  cfg.batch_size = opt.batch_size;
  cfg.seed = opt.seed;
  cfg.hidden_dims = opt.hidden;
  cfg.adam.lr = opt.lr;
  cfg.validate();

  if (opt.input.empty()) throw letsne::UsageError("embed: --input is required");
  letsne::DataMatrix data = load_dataset(
      opt.input, opt.label_column.empty() ? std::nullopt : std::make_optional(opt.label_column));
  if (mode == letsne::TrainMode::labelled && !data.has_labels()) {
    throw letsne::UsageError(
        "embed: labelled mode needs labels (pass --label-column or a labelled cube)");
  }
  data = letsne::standardize(data);

  std::optional<letsne::SparseAdjacency> adj;
  switch (mode) {
    case letsne::TrainMode::visualization: {
      adj = letsne::knn_adjacency(data, cfg.k);
      break;
    }
    case letsne::TrainMode::labelled: {
      const std::vector<int> rows = data.labelled_rows();
      std::vector<int> labels(rows.size());
      for (size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[static_cast<size_t>(rows[i])];
      if (labels.empty()) throw letsne::UsageError("embed: dataset has no labelled samples");
      adj = letsne::label_adjacency(labels);
      break;
    }
    case letsne::TrainMode::region: {
      if (!data.grid) throw letsne::UsageError("embed: region mode needs grid-shaped input");
      if (opt.regions_path.empty()) {
        throw letsne::UsageError("embed: region mode needs --regions (region map CSV)");
      }
      const letsne::RegionMap map = letsne::load_region_map(opt.regions_path);
      if (map.pixels() != data.rows()) {
        throw letsne::UsageError("embed: region map covers " + std::to_string(map.pixels()) +
                                 " pixels but the dataset has " + std::to_string(data.rows()));
      }
      adj = letsne::region_adjacency(map);
      break;
    }
  }

  const letsne::TrainOutput result = letsne::train(data, *adj, cfg);

  fs::create_directories(opt.out);
  write_embeddings_csv(fs::path(opt.out) / "embeddings.csv", result.embedding.Y);
  {
    std::string text = "epoch,laplacian_term,kl_term,total\n";
    for (size_t e = 0; e < result.embedding.history.size(); ++e) {
      const letsne::LossTerms& l = result.embedding.history[e];
      text += std::to_string(e) + "," + fmt17(l.laplacian) + "," + fmt17(l.kl) + "," +
              fmt17(l.total) + "\n";
    }
    write_text(fs::path(opt.out) / "loss.csv", text);
  }
  letsne::save_model(result.model, (fs::path(opt.out) / "model.bin").string());

  ordered_json manifest;
  manifest["command"] = "embed";
  manifest["input"] = opt.input;
  manifest["mode"] = letsne::to_string(mode);
  manifest["seed"] = cfg.seed;
  manifest["cf"] = cfg.cf;
  manifest["lambda"] = cfg.lambda;
  manifest["perplexity"] = cfg.perplexity;
  manifest["k"] = cfg.k;
  manifest["dims"] = cfg.embedding_dim;
  manifest["epochs"] = cfg.epochs;
  manifest["batch_size"] = cfg.batch_size;
  manifest["hidden"] = cfg.hidden_dims;
  manifest["lr"] = cfg.adam.lr;
  manifest["label_column"] = opt.label_column;
  manifest["regions"] = opt.regions_path;
  manifest["outputs"] = {"embeddings.csv", "loss.csv", "model.bin"};
  write_text(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

struct SegmentOptions {
  std::string config_path, input, out = "run";
  int target_regions = 256;
  double compactness = 10.0;
  int slic_iters = 10;
  double merge_threshold = 0.0;
  int channels = 0;  // 0: 3 when the cube has >= 3 bands, else 1
};

int cmd_segment(const SegmentOptions& opt) {
  if (opt.input.empty()) throw letsne::UsageError("segment: --input is required");
  letsne::DataMatrix data = load_dataset(opt.input, std::nullopt);
  if (!data.grid) {
    throw letsne::UsageError("segment: input has no grid geometry (tabular data cannot be segmented)");
  }
  data = letsne::standardize(data);
  const auto [height, width] = *data.grid;

  int channels = opt.channels;
  if (channels == 0) channels = data.cols() >= 3 ? 3 : 1;
  if (channels != 1 && channels != 3) throw letsne::UsageError("segment: --channels must be 1 or 3");
  if (channels > data.cols()) {
    throw letsne::UsageError("segment: cube has fewer bands than requested channels");
  }

  // Principal components become the segmentation image, min-max scaled to [0,1].
  const letsne::Matrix pcs = letsne::pca_project(data.values, channels);
  std::vector<letsne::Matrix> planes;
  for (int c = 0; c < channels; ++c) {
    letsne::Matrix plane(height, width);
    const double lo = pcs.col(c).minCoeff();
    const double hi = pcs.col(c).maxCoeff();
    const double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
    for (int r = 0; r < height; ++r) {
      for (int col = 0; col < width; ++col) {
        plane(r, col) = (pcs(static_cast<letsne::Index>(r) * width + col, c) - lo) * scale;
      }
    }
    planes.push_back(std::move(plane));
  }

  letsne::RegionMap map = letsne::slic(planes, opt.target_regions, opt.compactness, opt.slic_iters);
  if (opt.merge_threshold > 0.0) {
    map = letsne::merge_regions(map, planes, opt.merge_threshold);
  }

  fs::create_directories(opt.out);
  letsne::save_region_map(map, (fs::path(opt.out) / "regions.csv").string());
  write_text(fs::path(opt.out) / "regions.svg", letsne::region_svg(map));

  ordered_json manifest;
  manifest["command"] = "segment";
  manifest["input"] = opt.input;
  manifest["target_regions"] = opt.target_regions;
  manifest["compactness"] = opt.compactness;
  manifest["slic_iters"] = opt.slic_iters;
  manifest["merge_threshold"] = opt.merge_threshold;
  manifest["channels"] = channels;
  manifest["region_count"] = map.region_count;
  manifest["outputs"] = {"regions.csv", "regions.svg"};
  write_text(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

struct EvalOptions {
  std::string config_path, embeddings, data, label_column, out = "run";
  double train_fraction = 0.7;
  uint64_t seed = 0;
  bool pca_baseline = false;
};

int cmd_eval(const EvalOptions& opt) {
  if (opt.embeddings.empty()) throw letsne::UsageError("eval: --embeddings is required");
  if (opt.data.empty()) throw letsne::UsageError("eval: --data is required (labels source)");
  if (!(opt.train_fraction > 0.0) || !(opt.train_fraction < 1.0)) {
    throw letsne::UsageError("eval: --train-fraction must lie in (0, 1)");
  }

  const letsne::DataMatrix emb = letsne::load_tabular(opt.embeddings, std::nullopt);
  const letsne::DataMatrix data = load_dataset(
      opt.data, opt.label_column.empty() ? std::nullopt : std::make_optional(opt.label_column));
  if (!data.has_labels()) {
    throw letsne::UsageError("eval: dataset has no labels (pass --label-column or a labelled cube)");
  }
  if (emb.rows() != data.rows()) {
    throw letsne::UsageError("eval: embeddings rows (" + std::to_string(emb.rows()) +
                             ") do not match the dataset (" + std::to_string(data.rows()) + ")");
  }

  const std::vector<int> rows = data.labelled_rows();
  if (rows.empty()) throw letsne::UsageError("eval: dataset has no labelled samples");
  letsne::Matrix emb_labelled(static_cast<letsne::Index>(rows.size()), emb.cols());
  std::vector<int> labels(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    emb_labelled.row(static_cast<letsne::Index>(i)) = emb.values.row(rows[i]);
    labels[i] = data.labels[static_cast<size_t>(rows[i])];
  }

  const letsne::EvalReport report = letsne::evaluate(emb_labelled, labels, opt.train_fraction, opt.seed);
  fs::create_directories(opt.out);
  write_text(fs::path(opt.out) / "report.json", letsne::report_to_json(report) + "\n");

  ordered_json manifest;
  manifest["command"] = "eval";
  manifest["embeddings"] = opt.embeddings;
  manifest["data"] = opt.data;
  manifest["label_column"] = opt.label_column;
  manifest["train_fraction"] = opt.train_fraction;
  manifest["seed"] = opt.seed;
  manifest["pca_baseline"] = opt.pca_baseline;
  manifest["outputs"] = {"report.json"};
  write_text(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "accuracy " << report.accuracy << "  kappa " << report.kappa << "\n";

  if (opt.pca_baseline) {
    // same split protocol on a PCA projection of the dataset itself
    const letsne::DataMatrix zs = letsne::standardize(data);
    const letsne::Matrix pcs =
        letsne::pca_project(zs.values, static_cast<int>(std::min(emb.cols(), zs.cols())));
    letsne::Matrix pcs_labelled(static_cast<letsne::Index>(rows.size()), pcs.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
      pcs_labelled.row(static_cast<letsne::Index>(i)) = pcs.row(rows[i]);
    }
    const letsne::EvalReport baseline =
        letsne::evaluate(pcs_labelled, labels, opt.train_fraction, opt.seed);
    write_text(fs::path(opt.out) / "pca_baseline.json", letsne::report_to_json(baseline) + "\n");
    std::cout << "pca baseline accuracy " << baseline.accuracy << "  kappa " << baseline.kappa
              << "\n";
  }
  return 0;
}

struct PlotOptions {
  std::string config_path, embeddings, colors, out = "run";
  std::string color_mode = "label";
  double point_size = 3.0;
};

int cmd_plot(const PlotOptions& opt) {
  if (opt.embeddings.empty()) throw letsne::UsageError("plot: --embeddings is required");
  letsne::DataMatrix emb;
  try {
    emb = letsne::load_tabular(opt.embeddings, std::nullopt);
  } catch (const letsne::ParseError& e) {
    throw letsne::UsageError(std::string("plot: ") + e.what());
  }

  std::vector<double> colors;
  if (!opt.colors.empty()) {
    letsne::DataMatrix cdata;
    try {
      cdata = letsne::load_tabular(opt.colors, std::nullopt);
    } catch (const letsne::ParseError& e) {
      throw letsne::UsageError(std::string("plot: ") + e.what());
    }
    if (cdata.rows() != emb.rows() || cdata.cols() != 1) {
      throw letsne::UsageError("plot: colors file must be a single column matching the points");
    }
    colors.assign(cdata.values.data(), cdata.values.data() + cdata.rows());
  }

  letsne::ColorMode mode;
  if (opt.color_mode == "label" || opt.color_mode == "region") {
    mode = letsne::ColorMode::categorical;
  } else if (opt.color_mode == "component") {
    mode = letsne::ColorMode::continuous;
  } else {
    throw letsne::UsageError("plot: --color-by must be label|region|component");
  }

  fs::create_directories(opt.out);
  write_text(fs::path(opt.out) / "plot.svg",
             letsne::scatter_svg(emb.values, colors, mode, opt.point_size));
  return 0;
}

struct SynthOptions {
  std::string config_path, kind, out = "run";
  std::string format = "csv";
  int n_per_class = 50, classes = 3, dims = 10;
  double spread = 1.0;
  int n = 500;
  double noise = 0.0;
  uint64_t seed = 0;
};

void write_dataset_csv(const fs::path& path, const letsne::DataMatrix& data) {
  std::string text;
  for (letsne::Index j = 0; j < data.cols(); ++j) {
    text += (j ? "," : "") + ("x" + std::to_string(j));
  }
  if (data.has_labels()) text += ",label";
  text += '\n';
  for (letsne::Index i = 0; i < data.rows(); ++i) {
    for (letsne::Index j = 0; j < data.cols(); ++j) {
      if (j) text += ',';
      text += fmt17(data.values(i, j));
    }
    if (data.has_labels()) text += "," + std::to_string(data.labels[static_cast<size_t>(i)]);
    text += '\n';
  }
  write_text(path, text);
}

int cmd_synth(const SynthOptions& opt) {
  if (opt.format != "csv" && opt.format != "hsc") {
    throw letsne::UsageError("synth: --format must be csv or hsc");
  }
  letsne::DataMatrix data;
  if (opt.kind == "blobs") {
    data = letsne::make_blobs(opt.n_per_class, opt.classes, opt.dims, opt.spread, opt.seed);
  } else if (opt.kind == "swissroll") {
    data = letsne::make_swiss_roll(opt.n, opt.noise, opt.seed);
  } else {
    throw letsne::UsageError("synth: kind must be blobs|swissroll");
  }

  fs::create_directories(opt.out);
  if (opt.format == "hsc") {
    letsne::DataMatrix grid_data = data;
    // lay the samples out on a 1 x n image grid
    grid_data.grid = {1, static_cast<int>(data.rows())};
    if (opt.kind == "swissroll") grid_data.labels.clear();
    letsne::save_cube(grid_data, (fs::path(opt.out) / "dataset.hsc").string());
  } else {
    write_dataset_csv(fs::path(opt.out) / "dataset.csv", data);
  }
  if (!data.color_proxy.empty()) {
    std::string text = "t\n";
    for (double v : data.color_proxy) text += fmt17(v) + "\n";
    write_text(fs::path(opt.out) / "color.csv", text);
  }

  ordered_json manifest;
  manifest["command"] = "synth";
  manifest["kind"] = opt.kind;
  manifest["format"] = opt.format;
  manifest["seed"] = opt.seed;
  if (opt.kind == "blobs") {
    manifest["n_per_class"] = opt.n_per_class;
    manifest["classes"] = opt.classes;
    manifest["dims"] = opt.dims;
    manifest["spread"] = opt.spread;
  } else {
    manifest["n"] = opt.n;
    manifest["noise"] = opt.noise;
  }
  write_text(fs::path(opt.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEt-SNE dimensionality reduction toolkit"};
  app.require_subcommand(1);

  EmbedOptions embed;
  SegmentOptions segment;
  EvalOptions eval;
  PlotOptions plot;
  SynthOptions synth;
  ConfigBinding embed_cfg, segment_cfg, eval_cfg, plot_cfg, synth_cfg;

  CLI::App* embed_cmd = app.add_subcommand("embed", "Train an encoder and project the dataset");
  embed_cmd->add_option("--config", embed.config_path, "JSON config file (flags override)");
  embed_cfg.bind("input", embed_cmd->add_option("--input", embed.input, "CSV or HSC dataset"), &embed.input);
  embed_cfg.bind("label_column", embed_cmd->add_option("--label-column", embed.label_column, "label column name (CSV inputs)"), &embed.label_column);
  embed_cfg.bind("regions", embed_cmd->add_option("--regions", embed.regions_path, "region map CSV (region mode)"), &embed.regions_path);
  embed_cfg.bind("out", embed_cmd->add_option("--out", embed.out, "output directory"), &embed.out);
  embed_cfg.bind("mode", embed_cmd->add_option("--mode", embed.mode, "vis|labelled|region"), &embed.mode);
  embed_cfg.bind("cf", embed_cmd->add_option("--cf", embed.cf, "compression factor (>= 1)"), &embed.cf);
  embed_cfg.bind("lambda", embed_cmd->add_option("--lambda", embed.lambda, "KL weight"), &embed.lambda);
  embed_cfg.bind("perplexity", embed_cmd->add_option("--perplexity", embed.perplexity, "sigma calibration target"), &embed.perplexity);
  embed_cfg.bind("k", embed_cmd->add_option("--k", embed.k, "kNN neighbors (vis mode)"), &embed.k);
  embed_cfg.bind("dims", embed_cmd->add_option("--dims", embed.dims, "embedding dimension"), &embed.dims);
  embed_cfg.bind("epochs", embed_cmd->add_option("--epochs", embed.epochs), &embed.epochs);
  embed_cfg.bind("batch_size", embed_cmd->add_option("--batch-size", embed.batch_size), &embed.batch_size);
  embed_cfg.bind("seed", embed_cmd->add_option("--seed", embed.seed), &embed.seed);
  embed_cfg.bind("hidden", embed_cmd->add_option("--hidden", embed.hidden, "hidden layer sizes"), &embed.hidden);
  embed_cfg.bind("lr", embed_cmd->add_option("--lr", embed.lr, "Adam learning rate"), &embed.lr);

  CLI::App* segment_cmd = app.add_subcommand("segment", "SLIC superpixels with optional merging");
  segment_cmd->add_option("--config", segment.config_path, "JSON config file (flags override)");
  segment_cfg.bind("input", segment_cmd->add_option("--input", segment.input, "HSC cube"), &segment.input);
  segment_cfg.bind("out", segment_cmd->add_option("--out", segment.out, "output directory"), &segment.out);
  segment_cfg.bind("target_regions", segment_cmd->add_option("--target-regions", segment.target_regions), &segment.target_regions);
  segment_cfg.bind("compactness", segment_cmd->add_option("--compactness", segment.compactness), &segment.compactness);
  segment_cfg.bind("slic_iters", segment_cmd->add_option("--slic-iters", segment.slic_iters), &segment.slic_iters);
  segment_cfg.bind("merge_threshold", segment_cmd->add_option("--merge-threshold", segment.merge_threshold, "merge regions closer than this (0 = off)"), &segment.merge_threshold);
  segment_cfg.bind("channels", segment_cmd->add_option("--channels", segment.channels, "1 or 3 principal components"), &segment.channels);

  CLI::App* eval_cmd = app.add_subcommand("eval", "SVM accuracy and kappa of an embedding");
  eval_cmd->add_option("--config", eval.config_path, "JSON config file (flags override)");
  eval_cfg.bind("embeddings", eval_cmd->add_option("--embeddings", eval.embeddings, "embeddings CSV"), &eval.embeddings);
  eval_cfg.bind("data", eval_cmd->add_option("--data", eval.data, "dataset carrying the labels"), &eval.data);
  eval_cfg.bind("label_column", eval_cmd->add_option("--label-column", eval.label_column), &eval.label_column);
  eval_cfg.bind("out", eval_cmd->add_option("--out", eval.out, "output directory"), &eval.out);
  eval_cfg.bind("train_fraction", eval_cmd->add_option("--train-fraction", eval.train_fraction), &eval.train_fraction);
  eval_cfg.bind("seed", eval_cmd->add_option("--seed", eval.seed), &eval.seed);
  eval_cfg.bind("pca_baseline", eval_cmd->add_flag("--pca-baseline", eval.pca_baseline, "also evaluate a PCA projection of the dataset"), &eval.pca_baseline);

  CLI::App* plot_cmd = app.add_subcommand("plot", "SVG scatter of an embedding");
  plot_cmd->add_option("--config", plot.config_path, "JSON config file (flags override)");
  plot_cfg.bind("embeddings", plot_cmd->add_option("--embeddings", plot.embeddings, "embeddings CSV"), &plot.embeddings);
  plot_cfg.bind("colors", plot_cmd->add_option("--colors", plot.colors, "single-column CSV of color values"), &plot.colors);
  plot_cfg.bind("color_by", plot_cmd->add_option("--color-by", plot.color_mode, "label|region|component"), &plot.color_mode);
  plot_cfg.bind("point_size", plot_cmd->add_option("--point-size", plot.point_size), &plot.point_size);
  plot_cfg.bind("out", plot_cmd->add_option("--out", plot.out, "output directory"), &plot.out);

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--config", synth.config_path, "JSON config file (flags override)");
  synth_cfg.bind("kind", synth_cmd->add_option("--kind", synth.kind, "blobs|swissroll"), &synth.kind);
  synth_cfg.bind("out", synth_cmd->add_option("--out", synth.out, "output directory"), &synth.out);
  synth_cfg.bind("format", synth_cmd->add_option("--format", synth.format, "csv|hsc"), &synth.format);
  synth_cfg.bind("n_per_class", synth_cmd->add_option("--n-per-class", synth.n_per_class), &synth.n_per_class);
  synth_cfg.bind("classes", synth_cmd->add_option("--classes", synth.classes), &synth.classes);
  synth_cfg.bind("dims", synth_cmd->add_option("--dims", synth.dims), &synth.dims);
  synth_cfg.bind("spread", synth_cmd->add_option("--spread", synth.spread), &synth.spread);
  synth_cfg.bind("n", synth_cmd->add_option("--n", synth.n), &synth.n);
  synth_cfg.bind("noise", synth_cmd->add_option("--noise", synth.noise), &synth.noise);
  synth_cfg.bind("seed", synth_cmd->add_option("--seed", synth.seed), &synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, --help exits 0
  }

  try {
    if (embed_cmd->parsed()) {
      if (!embed.config_path.empty()) embed_cfg.apply_file(embed.config_path);
      return cmd_embed(embed);
    }
    if (segment_cmd->parsed()) {
      if (!segment.config_path.empty()) segment_cfg.apply_file(segment.config_path);
      return cmd_segment(segment);
    }
    if (eval_cmd->parsed()) {
      if (!eval.config_path.empty()) eval_cfg.apply_file(eval.config_path);
      return cmd_eval(eval);
    }
    if (plot_cmd->parsed()) {
      if (!plot.config_path.empty()) plot_cfg.apply_file(plot.config_path);
      return cmd_plot(plot);
    }
    if (synth_cmd->parsed()) {
      if (!synth.config_path.empty()) synth_cfg.apply_file(synth.config_path);
      return cmd_synth(synth);
    }
  } catch (const letsne::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
