#pragma once
// Run configuration: one JSON document holds every hyperparameter, with the
// published defaults baked in. CLI overrides use dotted paths (ssl.tau=5).

#include <string>
#include <vector>

#include "vendor_json.hpp"

namespace cc2d {

struct ExtractorConfig {
  int embed_dim = 16;
  // Channel widths: stem at full resolution, then the five pooled stages.
  std::vector<int> channels{64, 64, 128, 256, 512, 512};
  // Decoder widths for levels 4 down to 1 (level 5 reads the bottleneck directly).
  std::vector<int> decoder_channels{256, 128, 64, 64};
  int convs_per_block = 2;
  std::vector<int> aspp_dilations{1, 6, 12, 18};
  int aspp_branch_channels = 0;  // 0 => max(cin / 4, 4)
  bool shared_weights = false;
  std::string pretrained_encoder;  // optional checkpoint with encoder weights
  float init_stddev = 0.02f;

  void validate() const;
  bool operator==(const ExtractorConfig&) const = default;
};

struct SslConfig {
  double tau = 10.0;
  int alpha = 19;
  int epochs = 3500;
  double lr = 0.001;
  int lr_halve_every = 500;  // epochs
  int batch_size = 8;
  int patch_size = 192;
  int patch_margin = 8;
  int target_margin = 32;  // interior margin for target-point sampling
  double rot_max_deg = 15.0;
  double brightness_jitter = 0.2;
  double contrast_jitter = 0.2;
  std::vector<int> levels_enabled{1, 2, 3, 4, 5};
  int checkpoint_every = 0;  // epochs; 0 => final only
  int log_every = 1;         // steps

  void validate() const;
};

struct TplConfig {
  double sigma = 3.0;
  int epochs = 300;
  double lr = 0.0003;
  int lr_halve_every = 0;  // epochs; 0 => constant rate
  int batch_size = 16;
  std::vector<int> channels{64, 64, 128, 256, 512, 512};
  std::vector<int> decoder_channels{256, 128, 64, 64, 64};  // /16 .. /1
  int convs_per_block = 2;
  std::string pretrained_encoder;  // optional encoder warm start

  void validate() const;
};

struct RunConfig {
  int seed = 0;
  int network_size = 384;
  float input_mean = 0.5f;
  float input_std = 0.5f;
  ExtractorConfig encoder;
  SslConfig ssl;
  TplConfig tpl;
  std::vector<int> infer_levels{1, 2, 3, 4, 5};

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// "a.b.c=value" with JSON-typed value (bare words become strings).
void apply_override(nlohmann::json& j, const std::string& spec);
RunConfig apply_overrides(RunConfig cfg, const std::vector<std::string>& specs);

}  // namespace cc2d
