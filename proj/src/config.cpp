#include "cc2d/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cc2d {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("config: " + msg);
}

void check_levels(const std::vector<int>& levels, const char* who) {
  require(!levels.empty(), std::string(who) + ": levels_enabled must be non-empty");
  for (int l : levels) require(l >= 1 && l <= 5, std::string(who) + ": level out of range 1..5");
}

}  // namespace

void ExtractorConfig::validate() const {
  require(embed_dim >= 1, "encoder.embed_dim must be >= 1");
  require(channels.size() == 6, "encoder.channels needs 6 entries (stem + 5 stages)");
  require(decoder_channels.size() == 4, "encoder.decoder_channels needs 4 entries");
  require(convs_per_block >= 1, "encoder.convs_per_block must be >= 1");
  require(!aspp_dilations.empty(), "encoder.aspp_dilations must be non-empty");
  for (int c : channels) require(c >= 1, "encoder.channels entries must be >= 1");
  for (int c : decoder_channels) require(c >= 1, "encoder.decoder_channels entries must be >= 1");
}

void SslConfig::validate() const {
  require(tau > 0.0, "ssl.tau must be positive");
  require(alpha >= 1 && alpha % 2 == 1, "ssl.alpha must be a positive odd integer");
  require(epochs >= 1 && batch_size >= 1, "ssl.epochs and batch_size must be >= 1");
  require(lr > 0.0 && lr_halve_every >= 1, "ssl learning-rate schedule invalid");
  require(patch_size % 32 == 0, "ssl.patch_size must be divisible by 32");
  require(patch_margin >= 0 && target_margin >= 0, "ssl margins must be non-negative");
  check_levels(levels_enabled, "ssl");
}

void TplConfig::validate() const {
  require(sigma >= 1.0, "tpl.sigma must be >= 1");
  require(epochs >= 1 && batch_size >= 1, "tpl.epochs and batch_size must be >= 1");
  require(lr > 0.0, "tpl.lr must be positive");
  require(lr_halve_every >= 0, "tpl.lr_halve_every must be >= 0");
  require(channels.size() == 6, "tpl.channels needs 6 entries");
  require(decoder_channels.size() == 5, "tpl.decoder_channels needs 5 entries");
}

void RunConfig::validate() const {
  require(network_size % 32 == 0 && network_size > 0, "network_size must be a positive multiple of 32");
  require(input_std > 0.f, "input_std must be positive");
  encoder.validate();
  ssl.validate();
  tpl.validate();
  check_levels(infer_levels, "infer");
  require(ssl.patch_size < network_size || network_size == ssl.patch_size,
          "ssl.patch_size must not exceed network_size");
}

json to_json(const RunConfig& c) {
  return json{
      {"format_version", 1},
      {"seed", c.seed},
      {"network_size", c.network_size},
      {"input_mean", c.input_mean},
      {"input_std", c.input_std},
      {"encoder",
       {{"embed_dim", c.encoder.embed_dim},
        {"channels", c.encoder.channels},
        {"decoder_channels", c.encoder.decoder_channels},
        {"convs_per_block", c.encoder.convs_per_block},
        {"aspp_dilations", c.encoder.aspp_dilations},
        {"aspp_branch_channels", c.encoder.aspp_branch_channels},
        {"shared_weights", c.encoder.shared_weights},
        {"pretrained_encoder", c.encoder.pretrained_encoder},
        {"init_stddev", c.encoder.init_stddev}}},
      {"ssl",
       {{"tau", c.ssl.tau},
        {"alpha", c.ssl.alpha},
        {"epochs", c.ssl.epochs},
        {"lr", c.ssl.lr},
        {"lr_halve_every", c.ssl.lr_halve_every},
        {"batch_size", c.ssl.batch_size},
        {"patch_size", c.ssl.patch_size},
        {"patch_margin", c.ssl.patch_margin},
        {"target_margin", c.ssl.target_margin},
        {"rot_max_deg", c.ssl.rot_max_deg},
        {"brightness_jitter", c.ssl.brightness_jitter},
        {"contrast_jitter", c.ssl.contrast_jitter},
        {"levels_enabled", c.ssl.levels_enabled},
        {"checkpoint_every", c.ssl.checkpoint_every},
        {"log_every", c.ssl.log_every}}},
      {"tpl",
       {{"sigma", c.tpl.sigma},
        {"epochs", c.tpl.epochs},
        {"lr", c.tpl.lr},
        {"lr_halve_every", c.tpl.lr_halve_every},
        {"batch_size", c.tpl.batch_size},
        {"channels", c.tpl.channels},
        {"decoder_channels", c.tpl.decoder_channels},
        {"convs_per_block", c.tpl.convs_per_block},
        {"pretrained_encoder", c.tpl.pretrained_encoder}}},
      {"infer", {{"levels_enabled", c.infer_levels}}},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.network_size = j.value("network_size", c.network_size);
  c.input_mean = j.value("input_mean", c.input_mean);
  c.input_std = j.value("input_std", c.input_std);
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    c.encoder.embed_dim = e.value("embed_dim", c.encoder.embed_dim);
    c.encoder.channels = e.value("channels", c.encoder.channels);
    c.encoder.decoder_channels = e.value("decoder_channels", c.encoder.decoder_channels);
    c.encoder.convs_per_block = e.value("convs_per_block", c.encoder.convs_per_block);
    c.encoder.aspp_dilations = e.value("aspp_dilations", c.encoder.aspp_dilations);
    c.encoder.aspp_branch_channels = e.value("aspp_branch_channels", c.encoder.aspp_branch_channels);
    c.encoder.shared_weights = e.value("shared_weights", c.encoder.shared_weights);
    c.encoder.pretrained_encoder = e.value("pretrained_encoder", c.encoder.pretrained_encoder);
    c.encoder.init_stddev = e.value("init_stddev", c.encoder.init_stddev);
  }
  if (j.contains("ssl")) {
    const auto& s = j.at("ssl");
    c.ssl.tau = s.value("tau", c.ssl.tau);
    c.ssl.alpha = s.value("alpha", c.ssl.alpha);
    c.ssl.epochs = s.value("epochs", c.ssl.epochs);
    c.ssl.lr = s.value("lr", c.ssl.lr);
    c.ssl.lr_halve_every = s.value("lr_halve_every", c.ssl.lr_halve_every);
    c.ssl.batch_size = s.value("batch_size", c.ssl.batch_size);
    c.ssl.patch_size = s.value("patch_size", c.ssl.patch_size);
    c.ssl.patch_margin = s.value("patch_margin", c.ssl.patch_margin);
    c.ssl.target_margin = s.value("target_margin", c.ssl.target_margin);
    c.ssl.rot_max_deg = s.value("rot_max_deg", c.ssl.rot_max_deg);
    c.ssl.brightness_jitter = s.value("brightness_jitter", c.ssl.brightness_jitter);
    c.ssl.contrast_jitter = s.value("contrast_jitter", c.ssl.contrast_jitter);
    c.ssl.levels_enabled = s.value("levels_enabled", c.ssl.levels_enabled);
    c.ssl.checkpoint_every = s.value("checkpoint_every", c.ssl.checkpoint_every);
    c.ssl.log_every = s.value("log_every", c.ssl.log_every);
  }
  if (j.contains("tpl")) {
    const auto& t = j.at("tpl");
    c.tpl.sigma = t.value("sigma", c.tpl.sigma);
    c.tpl.epochs = t.value("epochs", c.tpl.epochs);
    c.tpl.lr = t.value("lr", c.tpl.lr);
    c.tpl.lr_halve_every = t.value("lr_halve_every", c.tpl.lr_halve_every);
    c.tpl.batch_size = t.value("batch_size", c.tpl.batch_size);
    c.tpl.channels = t.value("channels", c.tpl.channels);
    c.tpl.decoder_channels = t.value("decoder_channels", c.tpl.decoder_channels);
    c.tpl.convs_per_block = t.value("convs_per_block", c.tpl.convs_per_block);
    c.tpl.pretrained_encoder = t.value("pretrained_encoder", c.tpl.pretrained_encoder);
  }
  if (j.contains("infer")) c.infer_levels = j.at("infer").value("levels_enabled", c.infer_levels);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_json(cfg).dump(2) << "\n";
}

void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must look like a.b=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw std::invalid_argument("override: empty path");
  for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];

  json value;
  // Accept JSON literals (numbers, arrays, booleans); bare words become strings.
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  (*node)[parts.back()] = value;
}

RunConfig apply_overrides(RunConfig cfg, const std::vector<std::string>& specs) {
  json j = to_json(cfg);
  for (const auto& s : specs) apply_override(j, s);
  return config_from_json(j);
}

}  // namespace cc2d
