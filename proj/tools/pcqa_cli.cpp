#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcqa/dataset.hpp"
#include "pcqa/error.hpp"
#include "pcqa/evaluation.hpp"
#include "pcqa/gcn_model.hpp"
#include "pcqa/graph_builder.hpp"
#include "pcqa/runtime.hpp"
#include "pcqa/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcqa;

namespace {

// shortest text that reads back to the same double
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void log(const std::string& line) { std::cerr << line << "\n"; }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + p.string());
  out << text;
}

ViewCache make_cache(const fs::path& dir) { return ViewCache(dir.empty() ? ViewCache::default_dir() : dir); }

struct Globals {
  unsigned threads = 1;
};

// ---------------------------------------------------------------- synth

struct SynthArgs {
  fs::path out;
  SynthOptions opt;
};

void cmd_synth(const SynthArgs& a) {
  const auto rows = synth_dataset(a.out, a.opt);
  log("wrote " + std::to_string(rows.size()) + " clouds to " + (a.out / "manifest.csv").string());
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  fs::path cloud;
  fs::path manifest;
  fs::path out;
  fs::path cache_dir;
  ProjectionConfig cfg;
};

void cmd_project(const ProjectArgs& a, const Globals& g) {
  a.cfg.validate();
  if (!a.manifest.empty()) {
    // warm the view cache for a whole dataset
    const ViewCache cache = make_cache(a.cache_dir);
    const auto entries = load_manifest(a.manifest);
    for (const auto& e : entries) cache.get_or_render(load_ply(e.path), a.cfg, g.threads);
    log("cached views of " + std::to_string(entries.size()) + " clouds in " + cache.dir().string());
    return;
  }
  if (a.cloud.empty()) fail(Errc::InvalidArgument, "project needs a cloud or --manifest");
  if (a.out.empty()) fail(Errc::InvalidArgument, "project needs --out for a single cloud");
  const ViewGroups v = project_views(load_ply(a.cloud), a.cfg, g.threads);
  fs::create_directories(a.out);
  for (const auto* grp : {&v.horizontal, &v.vertical}) {
    const char tag = grp->direction == ViewDirection::Horizontal ? 'h' : 'v';
    for (std::size_t i = 0; i < grp->images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%c_%02zu.png", tag, i);
      write_png(grp->images[i], a.out / name);
    }
  }
  log("wrote " + std::to_string(v.horizontal.images.size() + v.vertical.images.size()) + " views to " +
      a.out.string());
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path config;
  fs::path manifest;
  fs::path out;
  fs::path cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch, patience, fold, folds;
  std::optional<double> lr, rs;
  bool no_augment = false;
};

void cmd_train(const TrainArgs& a, const Globals& g) {
  cli::RunConfig rc = a.config.empty() ? cli::RunConfig{} : cli::load_run_config(a.config);
  if (!a.manifest.empty()) rc.manifest = a.manifest;
  if (!a.cache_dir.empty()) rc.cache_dir = a.cache_dir;
  if (a.seed) rc.apply_seed(*a.seed);
  if (a.epochs) rc.train.max_epochs = *a.epochs;
  if (a.batch) rc.train.batch_size = *a.batch;
  if (a.patience) rc.train.early_stop_patience = *a.patience;
  if (a.folds) rc.train.folds = *a.folds;
  if (a.lr) rc.train.lr0 = *a.lr;
  if (a.rs) {
    rc.model.projection.rs_deg = *a.rs;
    rc.model.theta_deg = *a.rs;
  }
  if (a.no_augment) rc.train.augment = false;
  if (rc.manifest.empty()) fail(Errc::InvalidArgument, "train needs --manifest (or data.manifest in the config)");
  rc.validate();
  if (a.fold && *a.fold >= rc.train.folds) fail(Errc::InvalidArgument, "--fold must be below --folds");

  const std::string resolved = cli::run_config_to_json(rc);
  log("run config:\n" + resolved);

  const ViewCache cache = make_cache(rc.cache_dir);
  const LabeledDataset ds = load_dataset(rc.manifest, rc.model.projection, &cache, rc.mos_min, rc.mos_max, g.threads);
  std::vector<std::size_t> train_idx, test_idx;
  if (a.fold) {
    const auto folds = kfold_split(ds.content_ids(), rc.train.folds, rc.train.seed);
    train_idx = folds[*a.fold].train;
    test_idx = folds[*a.fold].test;
  } else {
    for (std::size_t i = 0; i < ds.samples.size(); ++i) train_idx.push_back(i);
  }

  QualityModel<float> model{rc.model};
  const TrainResult r = train(model, ds, train_idx, rc.train, [](const EpochLog& e) {
    log("epoch " + std::to_string(e.epoch) + " lr " + num(e.lr) + " train_l1 " + num(e.train_loss) + " val_l1 " +
        num(e.val_loss));
  });

  fs::create_directories(a.out);
  model.save(a.out);
  write_text(a.out / "train_log.csv", log_csv(r.log));
  write_text(a.out / "run_config.json", resolved + "\n");
  log("best epoch " + std::to_string(r.best_epoch) + " (val l1 " + num(r.best_val_loss) + "), checkpoint in " +
      a.out.string());

  if (!test_idx.empty()) {
    const auto pred = predict_samples(model, ds, test_idx);
    std::vector<std::pair<std::string, double>> rows;
    std::vector<double> mos;
    for (std::size_t k = 0; k < test_idx.size(); ++k) {
      rows.emplace_back(ds.samples[test_idx[k]].id, pred[k]);
      mos.push_back(ds.samples[test_idx[k]].mos);
    }
    save_score_csv(a.out / "heldout_predictions.csv", "pred", rows);
    const EvalReport rep = evaluate(pred, mos);
    write_text(a.out / "heldout_report.json", rep.to_json() + "\n");
    log("held-out SRCC " + num(rep.srcc) + " over " + std::to_string(rep.n) + " samples");
  }
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  fs::path checkpoint;
  std::vector<fs::path> clouds;
  fs::path manifest;
  fs::path out;
  fs::path cache_dir;
  std::optional<double> rs;
};

void cmd_score(const ScoreArgs& a, const Globals& g) {
  auto model = QualityModel<float>::load(a.checkpoint);
  ProjectionConfig pc = model->config().projection;
  // a different stride renders a different number of views; predict rejects it
  if (a.rs) pc.rs_deg = *a.rs;

  if (!a.manifest.empty()) {
    const ViewCache cache = make_cache(a.cache_dir);
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& e : load_manifest(a.manifest)) {
      const PackedViews pv = cache.get_or_render(load_ply(e.path), pc, g.threads);
      rows.emplace_back(e.id(), model->predict(pv.horizontal.unpack(), pv.vertical.unpack(), e.id()));
    }
    if (a.out.empty()) {
      for (const auto& [id, s] : rows) std::cout << id << "," << num(s) << "\n";
    } else {
      save_score_csv(a.out, "pred", rows);
      log("scored " + std::to_string(rows.size()) + " clouds into " + a.out.string());
    }
    return;
  }
  if (a.clouds.empty()) fail(Errc::InvalidArgument, "score needs a cloud or --manifest");
  for (const auto& c : a.clouds) {
    const ViewGroups v = project_views(load_ply(c), pc, g.threads);
    const double s = model->predict(v.horizontal, v.vertical, c.stem().string());
    if (a.clouds.size() == 1) {
      std::cout << num(s) << "\n";
    } else {
      std::cout << c.stem().string() << "," << num(s) << "\n";
    }
  }
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path pred;
  fs::path mos;
  fs::path out;
};

void cmd_eval(const EvalArgs& a) {
  std::map<std::string, double> truth;
  for (const auto& [id, m] : load_score_csv(a.mos)) truth[id] = m;
  std::vector<double> p, m;
  for (const auto& [id, s] : load_score_csv(a.pred)) {
    auto it = truth.find(id);
    if (it == truth.end()) fail(Errc::LengthMismatch, "no MOS for prediction id '" + id + "'");
    p.push_back(s);
    m.push_back(it->second);
  }
  const EvalReport rep = evaluate(p, m);
  std::cout << rep.to_json() << "\n";
  if (!a.out.empty()) write_text(a.out, rep.to_json() + "\n");
}

// ---------------------------------------------------------------- graph dump

struct GraphArgs {
  double rs = 36.0;
  double theta = 36.0;
  std::string normalization = "symmetric";
  std::string format = "json";
};

void cmd_graph_dump(const GraphArgs& a) {
  const std::size_t n = view_count(a.rs);
  if (!(a.theta >= 0.0)) fail(Errc::InvalidConfig, "theta must be non-negative");
  const Tensor<double> raw = build_adjacency(n, a.rs, a.theta);
  const Tensor<double> norm = normalize_adjacency(raw, parse_normalization(a.normalization));
  if (a.format == "csv") {
    std::cout << "i,j,adjacency,normalized\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        std::cout << i << "," << j << "," << num(raw.at({i, j})) << "," << num(norm.at({i, j})) << "\n";
    return;
  }
  if (a.format != "json") fail(Errc::InvalidArgument, "unknown format '" + a.format + "' (json|csv)");
  json ja = json::array(), jn = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json ra = json::array(), rn = json::array();
    for (std::size_t j = 0; j < n; ++j) {
      ra.push_back(raw.at({i, j}));
      rn.push_back(norm.at({i, j}));
    }
    ja.push_back(ra);
    jn.push_back(rn);
  }
  const json out{{"n_views", n},          {"rs_deg", a.rs},   {"theta_deg", a.theta},
                 {"normalization", a.normalization}, {"adjacency", ja}, {"normalized", jn}};
  std::cout << out.dump(2) << "\n";
}

// ---------------------------------------------------------------- describe

struct DescribeArgs {
  fs::path checkpoint;
  fs::path config;
};

void cmd_describe(const DescribeArgs& a) {
  std::unique_ptr<QualityModel<float>> model;
  if (!a.checkpoint.empty()) {
    model = QualityModel<float>::load(a.checkpoint);
  } else {
    const cli::RunConfig rc = a.config.empty() ? cli::RunConfig{} : cli::load_run_config(a.config);
    model = std::make_unique<QualityModel<float>>(rc.model);
  }
  const ModelDescription d = model->describe();
  const json out{{"config", json::parse(model_config_to_json(model->config()))},
                 {"n_views", d.n_views},
                 {"feature_dim", d.feature_dim},
                 {"parameters",
                  {{"backbone", d.backbone},
                   {"attention", d.attention},
                   {"gcn_weights_per_direction", d.gcn_weights_per_direction},
                   {"gcn_batchnorm", d.gcn_batchnorm},
                   {"fusion", d.fusion},
                   {"head", d.head},
                   {"total", d.total}}}};
  std::cout << out.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"pcqa: multi-view graph-convolutional point cloud quality assessment"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "worker threads for rendering; 1 = deterministic mode")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic geometry-noise dataset");
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--contents", sa.opt.n_contents, "pristine shapes")->capture_default_str();
  synth->add_option("--levels", sa.opt.noise_levels, "geometry noise sigmas, relative to the shape extent")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_option("--points", sa.opt.points, "points per cloud")->capture_default_str();
  synth->add_option("--mos-max", sa.opt.mos_max, "MOS of undistorted clouds")->capture_default_str();
  synth->add_option("--seed", sa.opt.seed, "dataset seed")->capture_default_str();

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "render the horizontal and vertical view groups of a cloud");
  project->add_option("cloud", pa.cloud, "PLY file")->check(CLI::ExistingFile);
  project->add_option("--out", pa.out, "PNG output directory");
  project->add_option("--manifest", pa.manifest, "render every cloud of a manifest into the view cache instead")
      ->check(CLI::ExistingFile);
  project->add_option("--cache", pa.cache_dir, "view cache directory (default $PCQ_CACHE_DIR or ~/.cache/pcqa)");
  project->add_option("--rs", pa.cfg.rs_deg, "rotation stride in degrees")->capture_default_str();
  project->add_option("--raster", pa.cfg.raster_size, "square render canvas")->capture_default_str();
  project->add_option("--size", pa.cfg.output_size, "output image size after crop")->capture_default_str();
  project->add_option("--radius", pa.cfg.point_radius, "splat radius in pixels")->capture_default_str();

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "train a model and write a checkpoint directory");
  trn->add_option("--config", ta.config, "run config JSON")->check(CLI::ExistingFile);
  trn->add_option("--manifest", ta.manifest, "dataset manifest CSV (content_id,path,mos)")->check(CLI::ExistingFile);
  trn->add_option("--out", ta.out, "checkpoint directory")->required();
  trn->add_option("--cache", ta.cache_dir, "view cache directory");
  trn->add_option("--seed", ta.seed, "seed for initialisation, batching and augmentation");
  trn->add_option("--epochs", ta.epochs, "maximum epochs");
  trn->add_option("--batch", ta.batch, "point clouds per step");
  trn->add_option("--lr", ta.lr, "initial learning rate");
  trn->add_option("--patience", ta.patience, "early-stopping patience in epochs");
  trn->add_option("--rs", ta.rs, "rotation stride; also sets the adjacency threshold");
  trn->add_option("--folds", ta.folds, "K of the content split");
  trn->add_option("--fold", ta.fold, "train on the other folds and score this one");
  trn->add_flag("--no-augment", ta.no_augment, "disable random flips");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "predict the quality of point clouds");
  score->add_option("checkpoint", sc.checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  score->add_option("clouds", sc.clouds, "PLY files")->check(CLI::ExistingFile);
  score->add_option("--manifest", sc.manifest, "score every cloud of a manifest")->check(CLI::ExistingFile);
  score->add_option("--out", sc.out, "CSV output (id,pred) for --manifest");
  score->add_option("--cache", sc.cache_dir, "view cache directory");
  score->add_option("--rs", sc.rs, "render with this stride instead of the checkpoint's");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "SRCC / PLCC / KRCC / RMSE of predictions against MOS");
  ev->add_option("--pred", ea.pred, "CSV id,pred")->required()->check(CLI::ExistingFile);
  ev->add_option("--mos", ea.mos, "CSV id,mos")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ea.out, "also write the JSON report here");

  GraphArgs ga;
  auto* graph = app.add_subcommand("graph", "view-graph inspection");
  graph->require_subcommand(1);
  auto* dump = graph->add_subcommand("dump", "print the adjacency and its normalisation");
  dump->add_option("--rs", ga.rs, "rotation stride in degrees")->capture_default_str();
  dump->add_option("--theta", ga.theta, "adjacency threshold in degrees")->capture_default_str();
  dump->add_option("--normalization", ga.normalization, "symmetric or asymmetric")->capture_default_str();
  dump->add_option("--format", ga.format, "json or csv")->capture_default_str();

  DescribeArgs da;
  auto* describe = app.add_subcommand("describe", "parameter counts and configuration");
  describe->add_option("checkpoint", da.checkpoint, "checkpoint directory")->check(CLI::ExistingDirectory);
  describe->add_option("--config", da.config, "describe a fresh model built from a run config")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) cmd_synth(sa);
    if (*project) cmd_project(pa, g);
    if (*trn) cmd_train(ta, g);
    if (*score) cmd_score(sc, g);
    if (*ev) cmd_eval(ea);
    if (*dump) cmd_graph_dump(ga);
    if (*describe) cmd_describe(da);
  } catch (const Error& e) {
    std::cerr << "error[" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[IoError]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
