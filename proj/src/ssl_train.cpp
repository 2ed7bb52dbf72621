#include "cc2d/ssl_train.hpp"

#include <algorithm>
#include <cmath>

#include "cc2d/augment.hpp"
#include "cc2d/checkpoint.hpp"
#include "cc2d/image.hpp"
#include "cc2d/ssl.hpp"

namespace cc2d {
namespace {

std::vector<int> sorted_levels(std::vector<int> levels) {
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

}  // namespace

SslModel SslModel::create(const RunConfig& cfg) {
  cfg.validate();
  SslModel m;
  m.config = cfg;
  std::mt19937 rng(static_cast<uint32_t>(cfg.seed) * 2654435761u + 1u);
  m.query_encoder = std::make_shared<CascadeEncoder>(cfg.encoder, rng);
  if (cfg.encoder.shared_weights) {
    m.patch_encoder = m.query_encoder;
  } else {
    m.patch_encoder = std::make_shared<CascadeEncoder>(cfg.encoder, rng);
  }
  if (!cfg.encoder.pretrained_encoder.empty()) {
    const Checkpoint pre = load_checkpoint(cfg.encoder.pretrained_encoder);
    nn::ParamMap params = m.all_params();
    if (load_matching_params(params, pre.tensors) == 0)
      throw std::runtime_error("pretrained encoder: no matching parameters in " +
                               cfg.encoder.pretrained_encoder);
  }
  return m;
}

nn::ParamMap SslModel::all_params() const {
  nn::ParamMap params;
  query_encoder->params(params, "er");
  if (patch_encoder != query_encoder) patch_encoder->params(params, "ep");
  return params;
}

void SslModel::save(const std::string& path) const {
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json{{"kind", "ssl"},
                             {"config", to_json(config)},
                             {"epochs_done", epochs_done},
                             {"steps_done", steps_done}};
  for (const auto& [name, p] : all_params()) ckpt.tensors[name] = p->val;
  save_checkpoint(ckpt, path);
}

SslModel SslModel::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "ssl")
    throw std::runtime_error("checkpoint " + path + " is not an ssl checkpoint");
  SslModel m = create(config_from_json(ckpt.meta.at("config")));
  m.epochs_done = ckpt.meta.value("epochs_done", 0);
  m.steps_done = ckpt.meta.value("steps_done", static_cast<int64_t>(0));
  nn::ParamMap params = m.all_params();
  for (auto& [name, p] : params) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw std::runtime_error("checkpoint " + path + " is missing parameter " + name);
    if (!p->val.same_shape(it->second))
      throw std::runtime_error("checkpoint " + path + " has wrong shape for " + name);
    p->val = it->second;
  }
  return m;
}

SslTrainer::SslTrainer(SslModel model, const DatasetManifest& train_set)
    : model_(std::move(model)),
      geom_(train_set.geometry),
      rng_(static_cast<uint32_t>(model_.config.seed) * 40503u + 977u) {
  if (train_set.entries.empty()) throw std::invalid_argument("ssl training: empty dataset");
  geom_.network_size = model_.config.network_size;
  for (const auto& e : train_set.entries) {
    cv::Mat1f img = resize_to_network(load_gray(e.image_path), geom_);
    query_inputs_.push_back(to_input_tensor(img, model_.config.input_mean, model_.config.input_std));
    images_.push_back(std::move(img));
  }
  steps_per_epoch_ =
      (static_cast<int64_t>(images_.size()) + model_.config.ssl.batch_size - 1) / model_.config.ssl.batch_size;
  opt_ = std::make_unique<nn::Adam>(model_.all_params());
}

double SslTrainer::current_lr() const {
  const auto& cfg = model_.config.ssl;
  const int halvings = model_.epochs_done / cfg.lr_halve_every;
  return cfg.lr * std::pow(0.5, halvings);
}

SslLogRow SslTrainer::step() {
  const auto& cfg = model_.config.ssl;
  const int net = model_.config.network_size;
  const auto levels = sorted_levels(cfg.levels_enabled);
  const int deepest = levels.back();
  const double inv_batch = 1.0 / cfg.batch_size;

  opt_->zero_grad();
  std::vector<double> level_losses(levels.size(), 0.0);
  double total = 0.0;

  std::uniform_int_distribution<int> pick(0, static_cast<int>(images_.size()) - 1);
  const double lo = cfg.target_margin;
  const double hi = net - 1.0 - cfg.target_margin;
  std::uniform_real_distribution<double> upos(lo, std::max(lo, hi));

  for (int b = 0; b < cfg.batch_size; ++b) {
    const int idx = pick(rng_);
    const cv::Point2d target(upos(rng_), upos(rng_));

    PatchSample ps = sample_patch(images_[idx], target, cfg.patch_size, cfg.patch_margin, rng_);
    ps = augment_patch(ps, cfg, rng_);

    const Tensor xp = to_input_tensor(ps.patch, model_.config.input_mean, model_.config.input_std);
    CascadeEmbeddings emb_p = model_.patch_encoder->extract(xp, EmbedSource::kPatch);
    const auto anchors = extract_anchor(emb_p, ps.target_in_patch.x, ps.target_in_patch.y);

    CascadeEmbeddings emb_q = model_.query_encoder->extract(query_inputs_[idx], EmbedSource::kQuery);

    std::vector<MatrixOfInterest> mats;
    std::vector<Tensor> sims;
    for (int level : levels) {
      Tensor sim = cosine_similarity_map(anchors[level - 1], emb_q.levels[level - 1]);
      const auto [gx, gy] = downsample_coord(target.x, target.y, level);
      mats.push_back(build_matrix_of_interest(sim, level, gx, gy, cfg.alpha, level == deepest));
      sims.push_back(std::move(sim));
    }
    std::vector<Tensor> moi_grads(levels.size());
    for (size_t li = 0; li < levels.size(); ++li) {
      const int n = mats[li].values.h * mats[li].values.w;
      const int t = mats[li].target_row * mats[li].values.w + mats[li].target_col;
      Tensor g(1, mats[li].values.h, mats[li].values.w);
      level_losses[li] +=
          tempered_softmax_ce<float>(mats[li].values.data(), n, t, static_cast<float>(cfg.tau), g.data());
      moi_grads[li] = std::move(g);
    }

    // Backward: matrix grads -> similarity grids -> (query features, anchors).
    std::array<Tensor, kNumLevels> gq{};
    std::array<Tensor, kNumLevels> gp{};
    for (size_t li = 0; li < levels.size(); ++li) {
      const int level = levels[li];
      for (auto& g : moi_grads[li].v) g = static_cast<float>(g * inv_batch);
      Tensor gsim(1, sims[li].h, sims[li].w);
      scatter_moi_grad(mats[li], moi_grads[li], gsim);

      Tensor ganchor, gfeat;
      cosine_similarity_backward(anchors[level - 1], emb_q.levels[level - 1], gsim, ganchor, gfeat);
      gq[level - 1] = std::move(gfeat);

      // Anchor gradient lands on a single grid cell of the patch embedding.
      const Tensor& pmap = emb_p.levels[level - 1];
      const auto [ax, ay] = downsample_coord(ps.target_in_patch.x, ps.target_in_patch.y, level);
      Tensor gpm(pmap.c, pmap.h, pmap.w);
      for (int c = 0; c < pmap.c; ++c) gpm.at(c, ay, ax) = ganchor.v[c];
      gp[level - 1] = std::move(gpm);
    }

    model_.query_encoder->backward(gq);
    if (model_.patch_encoder == model_.query_encoder) {
      // Shared weights: the query pass clobbered the patch activations;
      // re-run the patch forward to restore them before its backward.
      model_.patch_encoder->extract(xp, EmbedSource::kPatch);
    }
    model_.patch_encoder->backward(gp);
  }

  for (auto& l : level_losses) l *= inv_batch;
  for (double l : level_losses) total += l;

  const double lr = current_lr();
  opt_->step(static_cast<float>(lr));
  ++model_.steps_done;
  if (model_.steps_done % steps_per_epoch_ == 0) ++model_.epochs_done;

  SslLogRow row{model_.steps_done, model_.epochs_done, level_losses, total, lr};
  log_.push_back(row);
  if (sink_) sink_(row);
  return row;
}

void SslTrainer::run(int64_t max_steps) {
  const auto& cfg = model_.config.ssl;
  int64_t target_steps = steps_per_epoch_ * cfg.epochs;
  if (max_steps > 0) target_steps = std::min(target_steps, max_steps);
  while (model_.steps_done < target_steps) {
    step();
    if (!ckpt_path_.empty() && cfg.checkpoint_every > 0 &&
        model_.steps_done % (steps_per_epoch_ * cfg.checkpoint_every) == 0) {
      model_.save(ckpt_path_);
    }
  }
  if (!ckpt_path_.empty()) model_.save(ckpt_path_);
}

}  // namespace cc2d
