// Command-line front end for the two-stage one-shot landmark pipeline.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cc2d/dataset.hpp"
#include "cc2d/detector.hpp"
#include "cc2d/image.hpp"
#include "cc2d/metrics.hpp"
#include "cc2d/pipeline.hpp"
#include "cc2d/ssl_infer.hpp"
#include "cc2d/ssl_train.hpp"
#include "cc2d/visualize.hpp"

namespace fs = std::filesystem;
using namespace cc2d;

namespace {

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  return apply_overrides(cfg, overrides);
}

void add_config_opts(CLI::App* cmd, std::string& config_path, std::vector<std::string>& overrides) {
  cmd->add_option("--config", config_path, "JSON config file (defaults used when omitted)");
  cmd->add_option("--override,-O", overrides, "dotted-path override, e.g. -O ssl.tau=5");
}

LandmarkSet read_point_file(const std::string& path, const ImageGeometry& geom, int k) {
  return load_annotation({path}, geom, k);
}

int run_gen_synthetic(const SyntheticParams& params, const std::string& out) {
  generate_synthetic_dataset(params, out);
  std::cout << "wrote synthetic dataset to " << out << "\n";
  return 0;
}

int run_train_ssl(const std::string& data, const RunConfig& cfg, const std::string& out_ckpt,
                  int64_t max_steps) {
  const DatasetManifest train = load_manifest(data, Split::kTrain, cfg.network_size);
  SslTrainer trainer(SslModel::create(cfg), train);
  trainer.set_checkpoint_path(out_ckpt);
  trainer.set_log_sink([](const SslLogRow& r) {
    std::cout << "step " << r.step << " epoch " << r.epoch << " loss " << r.total << " lr " << r.lr
              << "\n";
  });
  trainer.run(max_steps);
  trainer.model().save(out_ckpt);
  std::cout << "saved stage-I checkpoint to " << out_ckpt << "\n";
  return 0;
}

int run_gen_pseudo(const std::string& data, const std::string& template_id, const std::string& ckpt,
                   const std::string& out, const std::string& diag_dir, bool skip_failed) {
  const SslModel model = SslModel::load(ckpt);
  const DatasetManifest train = load_manifest(data, Split::kTrain, model.config.network_size);
  const std::string tid = template_id.empty() ? train.entries.at(0).image_id : template_id;
  PseudoLabelOptions opts;
  opts.skip_failed_images = skip_failed;
  opts.diagnostics_dir = diag_dir;
  const auto records = generate_pseudo_labels(model, train, tid, opts);
  save_pseudo_labels(records, out);
  std::cout << "wrote " << records.size() << " pseudo-label records to " << out << "\n";
  return 0;
}

int run_train_tpl(const std::string& data, const std::string& pseudo, const RunConfig& cfg,
                  const std::string& out_ckpt, int64_t max_steps) {
  const DatasetManifest train = load_manifest(data, Split::kTrain, cfg.network_size);
  const auto records = load_pseudo_labels(pseudo);
  TplTrainer trainer(TplModel::create(cfg, train.num_landmarks), records, train);
  trainer.set_log_sink([](const TplLogRow& r) {
    std::cout << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr
              << "\n";
  });
  trainer.run(max_steps);
  trainer.model().save(out_ckpt);
  std::cout << "saved stage-II checkpoint to " << out_ckpt << "\n";
  return 0;
}

int run_evaluate(const std::string& data, const std::string& split_name, const std::string& ckpt,
                 const std::string& pseudo, const std::string& report_path) {
  if (ckpt.empty() == pseudo.empty())
    throw std::runtime_error("evaluate needs exactly one of --ckpt or --pseudo");
  const Split split = split_name == "test" ? Split::kTest : Split::kTrain;

  std::vector<LandmarkSet> preds, gts;
  if (!ckpt.empty()) {
    const TplModel model = TplModel::load(ckpt);
    const DatasetManifest set = load_manifest(data, split, model.config.network_size);
    for (const auto& entry : set.entries) {
      const cv::Mat1f img = load_gray(entry.image_path);
      preds.push_back(detect_landmarks(model, img, set.geometry).original);
      gts.push_back(load_ground_truth(set, entry));
    }
  } else {
    // Score pseudo-labels themselves against the (hidden-at-training) truth.
    const auto records = load_pseudo_labels(pseudo);
    const DatasetManifest set = load_manifest(data, split, records.at(0).landmarks.geometry.network_size);
    for (const auto& rec : records) {
      preds.push_back(rec.landmarks);
      gts.push_back(load_ground_truth(set, set.find(rec.image_id)));
    }
  }
  const EvalReport report = evaluate(preds, gts);
  std::cout << report.table();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write report: " + report_path);
    out << report.to_json().dump(2) << "\n";
    std::cout << "wrote report to " << report_path << "\n";
  }
  return 0;
}

int run_visualize(const std::string& image_path, const std::string& pred_path,
                  const std::string& gt_path, const std::string& out, double spacing_mm) {
  const cv::Mat1f img = load_gray(image_path);
  ImageGeometry geom;
  geom.original_width = img.cols;
  geom.original_height = img.rows;
  geom.pixel_spacing_mm = spacing_mm;

  // Count the points first so both files may carry any K.
  std::ifstream probe(pred_path);
  if (!probe) throw std::runtime_error("cannot open predictions: " + pred_path);
  int k = 0;
  for (std::string line; std::getline(probe, line);)
    if (line.find(',') != std::string::npos) ++k;
  const LandmarkSet preds = read_point_file(pred_path, geom, k);
  std::optional<LandmarkSet> gt;
  if (!gt_path.empty()) gt = read_point_file(gt_path, geom, k);
  save_overlay(out, img, preds, gt);
  std::cout << "wrote overlay to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cc2d: one-shot anatomical landmark detection"};
  app.require_subcommand(1);

  // gen-synthetic
  SyntheticParams syn;
  std::string syn_out;
  int syn_seed = 0;
  auto* gen = app.add_subcommand("gen-synthetic", "generate a deterministic synthetic dataset");
  gen->add_option("--out", syn_out, "output dataset root")->required();
  gen->add_option("--seed", syn_seed, "rng seed");
  gen->add_option("--n-train", syn.n_train, "training images");
  gen->add_option("--n-test", syn.n_test, "test images");
  gen->add_option("--k", syn.num_landmarks, "landmarks per image");
  gen->add_option("--size", syn.original_width, "square original side in px");
  gen->add_option("--network-size", syn.network_size, "square working resolution");
  gen->add_option("--jitter", syn.jitter_px, "max structure displacement, original px");

  // train-ssl
  std::string ssl_data, ssl_cfg_path, ssl_out = "ssl.ckpt";
  std::vector<std::string> ssl_ovr;
  int64_t ssl_max_steps = 0;
  auto* tssl = app.add_subcommand("train-ssl", "stage I: train the correspondence extractors");
  tssl->add_option("--data", ssl_data, "dataset root")->required();
  tssl->add_option("--out-ckpt", ssl_out, "checkpoint path");
  tssl->add_option("--max-steps", ssl_max_steps, "cap total steps (0 = full schedule)");
  add_config_opts(tssl, ssl_cfg_path, ssl_ovr);

  // gen-pseudo
  std::string ps_data, ps_tid, ps_ckpt, ps_out = "pseudo.json", ps_diag;
  bool ps_skip = false;
  auto* gps = app.add_subcommand("gen-pseudo", "transfer template landmarks to the training split");
  gps->add_option("--data", ps_data, "dataset root")->required();
  gps->add_option("--template-id", ps_tid, "annotated image id (default: first training image)");
  gps->add_option("--ckpt", ps_ckpt, "stage-I checkpoint")->required();
  gps->add_option("--out", ps_out, "pseudo-label JSON path");
  gps->add_option("--diagnostics-dir", ps_diag, "dump per-level similarity maps here");
  gps->add_flag("--skip-failed", ps_skip, "log and skip unreadable images");

  // train-tpl
  std::string tp_data, tp_pseudo, tp_cfg_path, tp_out = "tpl.ckpt";
  std::vector<std::string> tp_ovr;
  int64_t tp_max_steps = 0;
  auto* ttpl = app.add_subcommand("train-tpl", "stage II: train the detector on pseudo-labels");
  ttpl->add_option("--data", tp_data, "dataset root")->required();
  ttpl->add_option("--pseudo", tp_pseudo, "pseudo-label JSON")->required();
  ttpl->add_option("--out-ckpt", tp_out, "checkpoint path");
  ttpl->add_option("--max-steps", tp_max_steps, "cap total steps (0 = full schedule)");
  add_config_opts(ttpl, tp_cfg_path, tp_ovr);

  // evaluate
  std::string ev_data, ev_split = "test", ev_ckpt, ev_pseudo, ev_report;
  auto* ev = app.add_subcommand("evaluate", "report MRE and SDR against ground truth");
  ev->add_option("--data", ev_data, "dataset root")->required();
  ev->add_option("--split", ev_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--ckpt", ev_ckpt, "stage-II checkpoint to run the detector");
  ev->add_option("--pseudo", ev_pseudo, "score existing pseudo-labels instead");
  ev->add_option("--report", ev_report, "write a JSON report here");

  // visualize
  std::string vz_img, vz_pred, vz_gt, vz_out = "overlay.png";
  double vz_spacing = 1.0;
  auto* vz = app.add_subcommand("visualize", "overlay predictions (and truth) on an image");
  vz->add_option("--image", vz_img, "grayscale image")->required();
  vz->add_option("--pred", vz_pred, "prediction file, one x,y per line")->required();
  vz->add_option("--gt", vz_gt, "optional ground-truth file");
  vz->add_option("--out", vz_out, "output figure path");
  vz->add_option("--spacing-mm", vz_spacing, "pixel spacing (for bounds checking only)");

  // run-cc2d
  PipelineOptions pl;
  std::string pl_cfg_path;
  std::vector<std::string> pl_ovr;
  bool pl_no_figures = false;
  auto* run = app.add_subcommand("run-cc2d", "full pipeline: train, transfer, detect, evaluate");
  run->add_option("--data", pl.data_root, "dataset root")->required();
  run->add_option("--template-id", pl.template_id, "annotated image id");
  run->add_option("--workdir", pl.workdir, "working directory for artifacts")->required();
  run->add_option("--ssl-max-steps", pl.ssl_max_steps, "cap stage-I steps");
  run->add_option("--tpl-max-steps", pl.tpl_max_steps, "cap stage-II steps");
  run->add_flag("--no-figures", pl_no_figures, "skip overlay figures");
  add_config_opts(run, pl_cfg_path, pl_ovr);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      syn.seed = static_cast<uint32_t>(syn_seed);
      syn.original_height = syn.original_width;
      return run_gen_synthetic(syn, syn_out);
    }
    if (tssl->parsed())
      return run_train_ssl(ssl_data, resolve_config(ssl_cfg_path, ssl_ovr), ssl_out, ssl_max_steps);
    if (gps->parsed()) return run_gen_pseudo(ps_data, ps_tid, ps_ckpt, ps_out, ps_diag, ps_skip);
    if (ttpl->parsed())
      return run_train_tpl(tp_data, tp_pseudo, resolve_config(tp_cfg_path, tp_ovr), tp_out,
                           tp_max_steps);
    if (ev->parsed()) return run_evaluate(ev_data, ev_split, ev_ckpt, ev_pseudo, ev_report);
    if (vz->parsed()) return run_visualize(vz_img, vz_pred, vz_gt, vz_out, vz_spacing);
    if (run->parsed()) {
      pl.config = resolve_config(pl_cfg_path, pl_ovr);
      pl.make_figures = !pl_no_figures;
      run_pipeline(pl);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
