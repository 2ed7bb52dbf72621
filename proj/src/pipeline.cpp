#include "cc2d/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "cc2d/dataset.hpp"
#include "cc2d/detector.hpp"
#include "cc2d/image.hpp"
#include "cc2d/ssl_infer.hpp"
#include "cc2d/ssl_train.hpp"
#include "cc2d/visualize.hpp"

namespace fs = std::filesystem;

namespace cc2d {
namespace {

class LockFile {
 public:
  explicit LockFile(const fs::path& path) : path_(path) {
    if (fs::exists(path_))
      throw std::runtime_error("workdir is locked (another run in progress?): " + path_.string() +
                               " - remove the file if the previous run died");
    std::ofstream(path_) << "pid unknown\n";
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

std::ofstream open_log(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open log: " + path.string());
  return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineOptions& opts) {
  opts.config.validate();
  const fs::path wd(opts.workdir);
  for (const char* sub : {"ckpts", "pseudo", "reports", "figures", "logs"})
    fs::create_directories(wd / sub);
  LockFile lock(wd / "lock");
  save_config(opts.config, (wd / "config.json").string());

  DatasetManifest train = load_manifest(opts.data_root, Split::kTrain, opts.config.network_size);
  DatasetManifest test = load_manifest(opts.data_root, Split::kTest, opts.config.network_size);
  const std::string template_id =
      opts.template_id.empty() ? train.entries.at(0).image_id : opts.template_id;
  train.find(template_id);  // fail early on a bad id

  PipelineResult out;
  out.ssl_checkpoint = (wd / "ckpts" / "ssl.ckpt").string();
  out.tpl_checkpoint = (wd / "ckpts" / "tpl.ckpt").string();
  out.pseudo_labels_path = (wd / "pseudo" / "labels.json").string();
  out.report_path = (wd / "reports" / "test.json").string();

  // Stage I: correspondence training.
  if (fs::exists(out.ssl_checkpoint)) {
    std::cout << "[pipeline] stage I checkpoint present, skipping training\n";
  } else {
    std::cout << "[pipeline] stage I: training correspondence extractors\n";
    SslTrainer trainer(SslModel::create(opts.config), train);
    auto log = open_log(wd / "logs" / "ssl.tsv");
    log << "step\tepoch\tlevel_losses\ttotal\tlr\n";
    trainer.set_log_sink([&log](const SslLogRow& r) {
      log << r.step << "\t" << r.epoch << "\t";
      for (size_t i = 0; i < r.level_losses.size(); ++i)
        log << (i ? "," : "") << r.level_losses[i];
      log << "\t" << r.total << "\t" << r.lr << "\n";
    });
    trainer.set_checkpoint_path(out.ssl_checkpoint);
    trainer.run(opts.ssl_max_steps);
    trainer.model().save(out.ssl_checkpoint);
  }

  // Pseudo-labels from the one annotated template.
  if (fs::exists(out.pseudo_labels_path)) {
    std::cout << "[pipeline] pseudo-labels present, skipping transfer\n";
  } else {
    std::cout << "[pipeline] transferring labels from template " << template_id << "\n";
    const SslModel model = SslModel::load(out.ssl_checkpoint);
    const auto records = generate_pseudo_labels(model, train, template_id);
    save_pseudo_labels(records, out.pseudo_labels_path);
  }

  // Stage II: detector on pseudo-labels.
  if (fs::exists(out.tpl_checkpoint)) {
    std::cout << "[pipeline] stage II checkpoint present, skipping training\n";
  } else {
    std::cout << "[pipeline] stage II: training detector on pseudo-labels\n";
    const auto records = load_pseudo_labels(out.pseudo_labels_path);
    TplTrainer trainer(TplModel::create(opts.config, train.num_landmarks), records, train);
    auto log = open_log(wd / "logs" / "tpl.tsv");
    log << "step\tepoch\tloss\tlr\n";
    trainer.set_log_sink([&log](const TplLogRow& r) {
      log << r.step << "\t" << r.epoch << "\t" << r.loss << "\t" << r.lr << "\n";
    });
    trainer.run(opts.tpl_max_steps);
    trainer.model().save(out.tpl_checkpoint);
  }

  // Evaluation on the held-out split.
  std::cout << "[pipeline] evaluating on the test split\n";
  const TplModel model = TplModel::load(out.tpl_checkpoint);
  std::vector<LandmarkSet> preds, gts;
  for (const auto& entry : test.entries) {
    const cv::Mat1f img = load_gray(entry.image_path);
    const DecodeResult det = detect_landmarks(model, img, test.geometry);
    const LandmarkSet gt = load_ground_truth(test, entry);
    preds.push_back(det.original);
    gts.push_back(gt);
    if (opts.make_figures)
      save_overlay((wd / "figures" / (entry.image_id + ".png")).string(), img, det.original, gt);
  }
  out.test_report = evaluate(preds, gts);
  {
    std::ofstream rep(out.report_path);
    rep << out.test_report.to_json().dump(2) << "\n";
    std::ofstream txt(wd / "reports" / "test.txt");
    txt << out.test_report.table();
  }
  std::cout << out.test_report.table();
  return out;
}

}  // namespace cc2d
