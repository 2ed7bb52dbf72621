// Acceptance gate: every criterion prints one PASS/FAIL line with its pinned
// tolerance; the exit code is the number of failures. Criteria 5-8 share one
// stage-I training run on a small synthetic dataset, so the binary takes a
// while on a single CPU core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "cc2d/dataset.hpp"
#include "cc2d/detector.hpp"
#include "cc2d/image.hpp"
#include "cc2d/metrics.hpp"
#include "cc2d/pipeline.hpp"
#include "cc2d/ssl.hpp"
#include "cc2d/ssl_infer.hpp"
#include "cc2d/ssl_train.hpp"

using namespace cc2d;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Tensor rand_tensor(int c, int h, int w, std::mt19937& rng, float s = 1.f) {
  Tensor t(c, h, w);
  std::uniform_real_distribution<float> u(-s, s);
  for (auto& v : t.v) v = u(rng);
  return t;
}

// Reduced-width configuration sized for a single CPU core. The published
// defaults stay in RunConfig; this only shrinks widths and step counts.
RunConfig desk_config() {
  RunConfig cfg;
  cfg.seed = 17;
  cfg.network_size = 192;
  cfg.encoder.embed_dim = 16;
  cfg.encoder.channels = {8, 8, 16, 16, 32, 32};
  cfg.encoder.decoder_channels = {16, 16, 8, 8};
  cfg.encoder.convs_per_block = 1;
  cfg.encoder.aspp_dilations = {1, 4};
  cfg.encoder.init_stddev = 0.f;  // He initialization
  cfg.ssl.patch_size = 96;
  cfg.ssl.target_margin = 24;
  cfg.ssl.batch_size = 8;
  cfg.ssl.epochs = 8000;  // 1 step/epoch on 8 images
  cfg.ssl.lr_halve_every = 2000;
  cfg.ssl.log_every = 10;
  cfg.tpl.channels = {8, 8, 16, 16, 32, 32};
  cfg.tpl.decoder_channels = {16, 16, 8, 8, 8};
  cfg.tpl.convs_per_block = 1;
  cfg.tpl.batch_size = 8;
  cfg.tpl.epochs = 1600;  // 1 step/epoch on 8 images
  cfg.tpl.lr = 1e-3;
  cfg.tpl.lr_halve_every = 500;  // tame the final iterate
  // On a 192 map a small disc is a vanishing fraction of the plain pixel-mean
  // BCE; a wider disc keeps the positive class visible to the gradient.
  cfg.tpl.sigma = 8.0;
  return cfg;
}

SyntheticParams desk_dataset() {
  SyntheticParams p;
  p.seed = 5;
  p.n_train = 8;
  p.n_test = 8;
  p.num_landmarks = 4;
  p.original_width = p.original_height = 512;
  p.pixel_spacing_mm = 0.5;
  p.network_size = 192;
  p.jitter_px = 16.0;
  return p;
}

// --- criterion 1: shape contract ---------------------------------------------

void criterion_shapes() {
  ExtractorConfig cfg;
  cfg.embed_dim = 16;
  cfg.channels = {4, 4, 4, 4, 4, 4};
  cfg.decoder_channels = {4, 4, 4, 4};
  cfg.convs_per_block = 1;
  cfg.aspp_dilations = {1};
  std::mt19937 rng(1);
  CascadeEncoder enc(cfg, rng);
  bool ok = true;
  for (int side : {384, 192}) {
    const CascadeEmbeddings emb = enc.extract(Tensor(3, side, side), EmbedSource::kQuery);
    for (int level = 1; level <= kNumLevels; ++level) {
      const int want = side >> level;
      ok = ok && emb.levels[level - 1].h == want && emb.levels[level - 1].w == want &&
           emb.levels[level - 1].c == 16;
    }
  }
  report(1, ok, "embedding sides halve per level: 384->(192,96,48,24,12), 192->(96,48,24,12,6)");
}

// --- criterion 2: numeric oracles --------------------------------------------

void criterion_oracles() {
  std::mt19937 rng(2);
  bool ok = true;
  std::string detail;

  // Cosine maps against a double-precision oracle.
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int c = 2 + trial % 16;
    Tensor anchor = rand_tensor(c, 1, 1, rng);
    Tensor feat = rand_tensor(c, 4, 6, rng);
    const Tensor sim = cosine_similarity_map(anchor, feat);
    for (int i = 0; i < 24; ++i) {
      double dot = 0, na = 0, nf = 0;
      for (int ch = 0; ch < c; ++ch) {
        dot += double(anchor.v[ch]) * feat.v[ch * 24 + i];
        na += double(anchor.v[ch]) * anchor.v[ch];
        nf += double(feat.v[ch * 24 + i]) * feat.v[ch * 24 + i];
      }
      const double expect = dot / (std::sqrt(na) * std::sqrt(nf) + kNormFloor);
      if (std::fabs(sim.v[i] - expect) > 1e-4) ok = false, detail = "cosine map";
    }
  }

  // Cross-entropy loss against direct evaluation.
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int n = 9 + trial % 40;
    std::vector<double> v(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : v) x = u(rng);
    const int target = trial % n;
    const double tau = 0.5 + trial % 20;
    double z = 0;
    for (double x : v) z += std::exp(x * tau);
    const double direct = std::log(z) - v[target] * tau;
    if (std::fabs(tempered_softmax_ce(v.data(), n, target, tau) - direct) > 1e-6)
      ok = false, detail = "tempered softmax";
  }

  // Matrix-of-interest crops against pad-then-slice.
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int side = 6 + int(rng() % 40), alpha = 19, half = alpha / 2;
    Tensor sim = rand_tensor(1, side, side, rng);
    const int tx = int(rng() % side), ty = int(rng() % side);
    const MatrixOfInterest moi = build_matrix_of_interest(sim, 2, tx, ty, alpha, false);
    for (int r = 0; r < alpha; ++r)
      for (int c2 = 0; c2 < alpha; ++c2) {
        const int sy = ty - half + r, sx = tx - half + c2;
        const float expect = (sy >= 0 && sy < side && sx >= 0 && sx < side) ? sim.at(0, sy, sx) : 0.f;
        if (moi.values.at(0, r, c2) != expect) ok = false, detail = "crop vs pad-slice";
      }
  }

  // Detector loss on a hand-checkable instance (probabilities 0.5, offset off by 0.25).
  {
    ImageGeometry g;
    g.original_width = g.original_height = 16;
    g.network_size = 8;
    LandmarkSet lms;
    lms.geometry = g;
    lms.landmarks = {{0, 3.0, 3.0, Frame::kNetwork}};
    const HeatmapOffsetMaps gt = build_targets(lms, 1.0, 8);
    HeatmapOffsetMaps pred = gt;
    for (auto& v : pred.heat.v) v = 0.5f;
    for (auto& v : pred.off_x.v) v += 0.25f;
    for (auto& v : pred.off_y.v) v -= 0.25f;
    if (std::fabs(tpl_loss(pred, gt) - (std::log(2.0) + 0.5)) > 1e-5)
      ok = false, detail = "detector loss";
  }

  // evaluate() against a brute-force oracle.
  for (int trial = 0; trial < 50 && ok; ++trial) {
    ImageGeometry g;
    g.original_width = g.original_height = 500;
    g.pixel_spacing_mm = 0.2;
    g.network_size = 64;
    std::uniform_real_distribution<double> upos(20.0, 480.0), un(-8.0, 8.0);
    const int k = 1 + trial % 4, n = 1 + trial % 5;
    std::vector<LandmarkSet> preds, gts;
    std::vector<double> errs;
    for (int i = 0; i < n; ++i) {
      LandmarkSet p, q;
      p.geometry = q.geometry = g;
      for (int j = 0; j < k; ++j) {
        const double x = upos(rng), y = upos(rng), px = x + un(rng), py = y + un(rng);
        q.landmarks.push_back({j, x, y, Frame::kOriginal});
        p.landmarks.push_back({j, px, py, Frame::kOriginal});
        errs.push_back(std::hypot(px - x, py - y) * 0.2);
      }
      preds.push_back(p);
      gts.push_back(q);
    }
    const EvalReport r = evaluate(preds, gts);
    double mean = 0;
    for (double e : errs) mean += e;
    mean /= errs.size();
    if (std::fabs(r.mre_mm - mean) > 1e-9) ok = false, detail = "evaluate";
  }

  report(2, ok,
         "numeric oracles (cosine map, softmax CE, crop-vs-pad, detector loss, evaluate) within "
         "1e-6..1e-9 (cosine 1e-4 in float)" +
             (ok ? std::string() : " - failed at: " + detail));
}

// --- criterion 3: gradient checks --------------------------------------------

void criterion_gradients() {
  std::mt19937 rng(3);
  bool ok = true;
  const double h = 1e-4;

  for (int trial = 0; trial < 10 && ok; ++trial) {
    const int n = 49;
    std::vector<double> v(n), grad(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : v) x = u(rng);
    tempered_softmax_ce(v.data(), n, trial % n, 10.0, grad.data());
    for (int i = 0; i < n; i += 7) {
      auto vp = v, vm = v;
      vp[i] += h;
      vm[i] -= h;
      const double fd = (tempered_softmax_ce(vp.data(), n, trial % n, 10.0) -
                         tempered_softmax_ce(vm.data(), n, trial % n, 10.0)) /
                        (2 * h);
      if (std::fabs(fd - grad[i]) / std::max(1e-6, std::fabs(fd)) > 1e-3) ok = false;
    }
  }

  for (int trial = 0; trial < 5 && ok; ++trial) {
    const int n = 25;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> logits(n), offx(n), offy(n), gtx(n), gty(n), gh(n, 0.0);
    for (int i = 0; i < n; ++i) {
      logits[i] = 2 * u(rng);
      offx[i] = u(rng);
      offy[i] = u(rng);
      gtx[i] = u(rng);
      gty[i] = u(rng);
      gh[i] = (rng() % 4 == 0) ? 1.0 : 0.0;
    }
    std::vector<double> gl(n), gx(n), gy(n);
    tpl_loss_single(logits.data(), gh.data(), offx.data(), gtx.data(), offy.data(), gty.data(), n,
                    gl.data(), gx.data(), gy.data());
    auto eval = [&]() {
      return tpl_loss_single(logits.data(), gh.data(), offx.data(), gtx.data(), offy.data(),
                             gty.data(), n);
    };
    for (int i = 0; i < n; i += 6) {
      const double keep = logits[i];
      logits[i] = keep + h;
      const double lp = eval();
      logits[i] = keep - h;
      const double lm = eval();
      logits[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      if (std::fabs(fd - gl[i]) / std::max(1e-6, std::fabs(fd)) > 1e-3) ok = false;
    }
  }
  const bool losses_ok = ok;

  // Reduced encoder, directional finite differences over all parameters.
  ExtractorConfig cfg;
  cfg.embed_dim = 4;
  cfg.channels = {4, 4, 6, 6, 8, 8};
  cfg.decoder_channels = {6, 6, 4, 4};
  cfg.convs_per_block = 1;
  cfg.aspp_dilations = {1, 2};
  cfg.init_stddev = 0.1f;
  CascadeEncoder enc(cfg, rng);
  nn::ParamMap params;
  enc.params(params, "e");
  // Jitter every parameter: zero-init biases plus dead upstream units leave
  // some pre-activations exactly on the ReLU kink, where central differences
  // average the two slopes and cannot match the analytic subgradient.
  {
    std::uniform_real_distribution<float> j(-0.02f, 0.02f);
    for (auto& [name, p] : params)
      for (auto& v2 : p->val.v) v2 += j(rng);
  }
  Tensor x = rand_tensor(3, 32, 32, rng, 0.5f);
  // One level at a time (summing levels invites cancellation that amplifies
  // float noise); minimum over an h sweep rides out rounding in the loss.
  bool enc_ok = true;
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (int only = 0; only < kNumLevels; ++only) {
    std::array<Tensor, kNumLevels> r{};
    {
      CascadeEmbeddings emb = enc.extract(x, EmbedSource::kQuery);
      r[only] = rand_tensor(emb.levels[only].c, emb.levels[only].h, emb.levels[only].w, rng);
    }
    auto loss_fn = [&]() {
      CascadeEmbeddings emb = enc.extract(x, EmbedSource::kQuery);
      double l = 0;
      for (size_t j = 0; j < emb.levels[only].v.size(); ++j)
        l += double(emb.levels[only].v[j]) * r[only].v[j];
      return l;
    };
    (void)loss_fn();
    nn::zero_grads(params);
    enc.backward(r);
    std::map<std::string, Tensor> dir;
    double analytic = 0;
    for (auto& [name, p] : params) {
      Tensor d(p->val.c, p->val.h, p->val.w);
      for (auto& v2 : d.v) v2 = u(rng);
      for (size_t i = 0; i < d.v.size(); ++i) analytic += double(p->grad.v[i]) * d.v[i];
      dir[name] = std::move(d);
    }
    auto shift = [&](float s) {
      for (auto& [name, p] : params)
        for (size_t i = 0; i < p->val.v.size(); ++i) p->val.v[i] += s * dir[name].v[i];
    };
    double best = 1e9;
    for (float hh : {5e-5f, 2e-4f, 1e-3f, 3e-3f, 1e-2f}) {
      shift(hh);
      const double lp = loss_fn();
      shift(-2 * hh);
      const double lm = loss_fn();
      shift(hh);
      const double fd = (lp - lm) / (2 * hh);
      best = std::min(best, std::fabs(fd - analytic) / std::max(1.0, std::fabs(analytic)));
    }
    if (best > 1e-2) enc_ok = false;
  }

  report(3, losses_ok && enc_ok,
         "finite-difference gradients: losses rel err < 1e-3 (h=1e-4), encoder directional < 1e-2");
}

// --- criterion 4: decode round-trip ------------------------------------------

void criterion_decode() {
  std::mt19937 rng(4);
  ImageGeometry g;
  g.original_width = g.original_height = 128;
  g.pixel_spacing_mm = 0.5;
  g.network_size = 64;
  bool ok = true;
  std::uniform_int_distribution<int> u(4, 59);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    LandmarkSet lms;
    lms.geometry = g;
    for (int k = 0; k < 3; ++k)
      lms.landmarks.push_back({k, double(u(rng)), double(u(rng)), Frame::kNetwork});
    const HeatmapOffsetMaps maps = build_targets(lms, 3.0, 64);
    const DecodeResult res = decode(maps, 3.0, g);
    for (int k = 0; k < 3; ++k)
      ok = ok && res.network.landmarks[k].x == lms.landmarks[k].x &&
           res.network.landmarks[k].y == lms.landmarks[k].y;
  }
  // Disc pixel count at sigma = 3.
  LandmarkSet one;
  one.geometry = g;
  one.landmarks = {{0, 30.0, 30.0, Frame::kNetwork}};
  int count = 0;
  for (float v : build_targets(one, 3.0, 64).heat.v) count += v > 0 ? 1 : 0;
  ok = ok && count == 29;
  report(4, ok, "decode(build_targets(L)) == L exactly on 100 random sets; sigma=3 disc has 29 px");
}

// --- criteria 5-8: synthetic end-to-end --------------------------------------

struct SharedRun {
  fs::path root;       // dataset
  fs::path work;       // pipeline workdir
  RunConfig cfg;
  SyntheticParams params;
  std::string ssl_ckpt;
  std::string template_id;
};

void criterion_ssl_learning(SharedRun& sh) {
  generate_synthetic_dataset(sh.params, sh.root.string());
  const DatasetManifest train = load_manifest(sh.root.string(), Split::kTrain, sh.cfg.network_size);
  sh.template_id = train.entries[0].image_id;

  SslTrainer trainer(SslModel::create(sh.cfg), train);
  const auto t0 = std::chrono::steady_clock::now();
  int64_t done = 0;
  trainer.set_log_sink([&](const SslLogRow& row) {
    done = row.step;
    if (row.step % 200 == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("  ssl step %lld loss %.3f lr %.2e (%.0fs)\n",
                  static_cast<long long>(row.step), row.total, row.lr, secs);
      std::fflush(stdout);
    }
  });
  trainer.run();
  trainer.model().save(sh.ssl_ckpt);

  const auto& log = trainer.log();
  double first = 0, last = 0;
  const size_t tail = std::max<size_t>(1, log.size() / 10);
  for (size_t i = 0; i < 10; ++i) first += log[i].total;
  first /= 10;
  for (size_t i = log.size() - tail; i < log.size(); ++i) last += log[i].total;
  last /= tail;

  // Self-localization on the template image.
  const SslModel model = trainer.model();
  const ManifestEntry& te = train.find(sh.template_id);
  const cv::Mat1f timg = load_gray(te.image_path);
  const LandmarkSet tgt = load_ground_truth(train, te);
  const TemplateBank bank = build_template_bank(model, timg, tgt);
  const CascadeEmbeddings emb = embed_query(model, timg, bank.geometry);
  double worst = 0;
  for (size_t i = 0; i < bank.entries.size(); ++i) {
    const LocalizationResult r =
        fuse_and_localize(model, emb, bank.entries[i], model.config.infer_levels);
    const Landmark gt_net = to_network_frame(tgt.landmarks[i], bank.geometry);
    worst = std::max(worst, std::hypot(r.landmark_network.x - gt_net.x,
                                       r.landmark_network.y - gt_net.y));
  }

  const bool loss_ok = last < 0.5 * first && done >= 2000;
  const bool self_ok = worst <= 4.0;
  report(5, loss_ok && self_ok,
         "ssl learning: tail loss " + fmt(last) + " < 50% of early " + fmt(first) + " over " +
             std::to_string(done) + " steps; template self-localization worst " + fmt(worst) +
             " <= 4 network px");
}

void criterion_pipeline(SharedRun& sh) {
  // Reuse the stage-I run by seeding the workdir with its checkpoint.
  fs::create_directories(sh.work / "ckpts");
  fs::copy_file(sh.ssl_ckpt, sh.work / "ckpts" / "ssl.ckpt",
                fs::copy_options::overwrite_existing);
  PipelineOptions opts;
  opts.data_root = sh.root.string();
  opts.template_id = sh.template_id;
  opts.workdir = sh.work.string();
  opts.config = sh.cfg;
  const PipelineResult res = run_pipeline(opts);

  // Pseudo-label error against the hidden truth, in millimetres.
  const DatasetManifest train = load_manifest(sh.root.string(), Split::kTrain, sh.cfg.network_size);
  const auto records = load_pseudo_labels(res.pseudo_labels_path);
  double pseudo_sum = 0;
  int pseudo_n = 0;
  for (const auto& rec : records) {
    const LandmarkSet gt = load_ground_truth(train, train.find(rec.image_id));
    for (int k = 0; k < gt.k(); ++k) {
      pseudo_sum += radial_error_mm(rec.landmarks.landmarks[k], gt.landmarks[k], gt.geometry);
      ++pseudo_n;
    }
  }
  const double pseudo_mean_mm = pseudo_sum / pseudo_n;
  const double jitter_mm = sh.params.jitter_px * sh.params.pixel_spacing_mm;

  const bool artifacts_ok = fs::exists(res.tpl_checkpoint) && fs::exists(res.report_path);
  const bool pseudo_ok = pseudo_mean_mm <= jitter_mm;
  const bool tpl_ok = res.test_report.mre_mm <= 1.5 * pseudo_mean_mm;
  report(6, artifacts_ok && pseudo_ok && tpl_ok,
         "pipeline completes; pseudo-label mean error " + fmt(pseudo_mean_mm) + " mm <= jitter " +
             fmt(jitter_mm) + " mm; detector test MRE " + fmt(res.test_report.mre_mm) +
             " mm <= 1.5x pseudo error");
}

void criterion_tpl_sanity(SharedRun& sh) {
  const DatasetManifest train = load_manifest(sh.root.string(), Split::kTrain, sh.cfg.network_size);
  std::vector<PseudoLabelRecord> records;
  for (const auto& entry : train.entries) {
    PseudoLabelRecord rec;
    rec.image_id = entry.image_id;
    rec.landmarks = load_ground_truth(train, entry);
    rec.landmarks.geometry.network_size = sh.cfg.network_size;
    rec.confidences.assign(rec.landmarks.k(), 1.0);
    rec.source = LabelSource::kGroundTruth;
    records.push_back(std::move(rec));
  }

  TplTrainer trainer(TplModel::create(sh.cfg, train.num_landmarks), records, train);
  const auto t0 = std::chrono::steady_clock::now();
  trainer.set_log_sink([&](const TplLogRow& row) {
    if (row.step % 50 == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("  tpl step %lld loss %.4f (%.0fs)\n", static_cast<long long>(row.step), row.loss,
                  secs);
      std::fflush(stdout);
    }
  });
  trainer.run();

  double sum = 0;
  int n = 0;
  for (const auto& entry : train.entries) {
    const cv::Mat1f img = load_gray(entry.image_path);
    const DecodeResult det = detect_landmarks(trainer.model(), img, train.geometry);
    LandmarkSet gt = load_ground_truth(train, entry);
    gt.geometry.network_size = sh.cfg.network_size;
    for (int k = 0; k < gt.k(); ++k) {
      const Landmark g = to_network_frame(gt.landmarks[k], gt.geometry);
      sum += std::hypot(det.network.landmarks[k].x - g.x, det.network.landmarks[k].y - g.y);
      ++n;
    }
  }
  const double mre_px = sum / n;
  report(7, mre_px < 2.0,
         "detector fits clean labels: train MRE " + fmt(mre_px) + " < 2 network px");
}

void criterion_ablation(SharedRun& sh) {
  const SslModel model = SslModel::load(sh.ssl_ckpt);
  const DatasetManifest test = load_manifest(sh.root.string(), Split::kTest, sh.cfg.network_size);
  const DatasetManifest train = load_manifest(sh.root.string(), Split::kTrain, sh.cfg.network_size);
  const ManifestEntry& te = train.find(sh.template_id);
  const TemplateBank bank =
      build_template_bank(model, load_gray(te.image_path), load_ground_truth(train, te));

  // Embed every test image once; reuse across the six row configurations.
  std::vector<CascadeEmbeddings> embs;
  std::vector<LandmarkSet> gts;
  for (const auto& entry : test.entries) {
    embs.push_back(embed_query(model, load_gray(entry.image_path), bank.geometry));
    LandmarkSet gt = load_ground_truth(test, entry);
    gt.geometry.network_size = sh.cfg.network_size;
    gts.push_back(gt);
  }

  const std::vector<std::vector<int>> rows = {
      {1, 2, 3, 4}, {1, 2, 3, 5}, {1, 2, 4, 5}, {1, 3, 4, 5}, {2, 3, 4, 5}, {1, 2, 3, 4, 5}};
  bool ok = true;
  for (const auto& levels : rows) {
    std::vector<LandmarkSet> preds;
    for (size_t i = 0; i < embs.size(); ++i) {
      LandmarkSet pred;
      pred.geometry = gts[i].geometry;
      for (const auto& be : bank.entries) {
        const LocalizationResult r = fuse_and_localize(model, embs[i], be, levels);
        pred.landmarks.push_back(from_network_frame(r.landmark_network, pred.geometry));
      }
      preds.push_back(std::move(pred));
    }
    const EvalReport rep = evaluate(preds, gts);
    ok = ok && rep.n_images == int(embs.size()) && std::isfinite(rep.mre_mm) &&
         rep.per_landmark.size() == bank.entries.size();
    std::string tag;
    for (int l : levels) tag += std::to_string(l);
    std::printf("  ablation levels {%s}: MRE %.3f mm, SDR@4 %.1f%%\n", tag.c_str(), rep.mre_mm,
                100.0 * rep.sdr.at(4.0));
  }
  report(8, ok, "all six layer-subset configurations run at inference and yield reports");
}

// --- criterion 9: protocol fidelity ------------------------------------------

void criterion_protocol() {
  ImageGeometry g;
  g.original_width = g.original_height = 1000;
  g.pixel_spacing_mm = 1.0;
  g.network_size = 384;
  LandmarkSet gt, pred;
  gt.geometry = pred.geometry = g;
  gt.landmarks = {{0, 100.0, 100.0, Frame::kOriginal},
                  {1, 200.0, 200.0, Frame::kOriginal},
                  {2, 300.0, 300.0, Frame::kOriginal}};
  pred.landmarks = {{0, 101.5, 100.0, Frame::kOriginal},
                    {1, 200.0, 203.2, Frame::kOriginal},
                    {2, 305.0, 300.0, Frame::kOriginal}};
  const EvalReport r = evaluate({pred}, {gt});
  const bool ok = std::fabs(r.mre_mm - (1.5 + 3.2 + 5.0) / 3.0) < 1e-9 &&
                  std::fabs(r.sdr.at(2.0) - 1.0 / 3.0) < 1e-9 &&
                  std::fabs(r.sdr.at(4.0) - 2.0 / 3.0) < 1e-9;
  report(9, ok, "hand fixture {1.5, 3.2, 5.0} mm -> MRE 3.2333..., SDR@2 33.33%, SDR@4 66.67% to 1e-9");
}

}  // namespace

int main() {
  criterion_shapes();
  criterion_oracles();
  criterion_gradients();
  criterion_decode();

  SharedRun sh;
  sh.root = fs::temp_directory_path() / "cc2d_acceptance_data";
  sh.work = fs::temp_directory_path() / "cc2d_acceptance_work";
  fs::remove_all(sh.root);
  fs::remove_all(sh.work);
  sh.cfg = desk_config();
  sh.params = desk_dataset();
  fs::create_directories(sh.work / "ckpts");
  sh.ssl_ckpt = (sh.work / "ckpts" / "ssl_shared.ckpt").string();

  try {
    criterion_ssl_learning(sh);
  } catch (const std::exception& e) {
    report(5, false, std::string("ssl learning threw: ") + e.what());
  }
  try {
    criterion_pipeline(sh);
  } catch (const std::exception& e) {
    report(6, false, std::string("pipeline threw: ") + e.what());
  }
  try {
    criterion_tpl_sanity(sh);
  } catch (const std::exception& e) {
    report(7, false, std::string("detector sanity threw: ") + e.what());
  }
  try {
    criterion_ablation(sh);
  } catch (const std::exception& e) {
    report(8, false, std::string("ablation threw: ") + e.what());
  }
  criterion_protocol();

  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
