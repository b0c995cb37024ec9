#include "askroute/navpolicy.hpp"

#include <set>

namespace askroute::policy {

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"vocab_size", c.vocab_size},
       {"word_dim", c.word_dim},
       {"visual_dim", c.visual_dim},
       {"hidden", c.hidden},
       {"ask_enabled", c.ask_enabled}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known{"vocab_size", "word_dim", "visual_dim", "hidden", "ask_enabled"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("model config: unknown key '" + key + "'");
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.visual_dim = j.value("visual_dim", c.visual_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.ask_enabled = j.value("ask_enabled", c.ask_enabled);
}

std::vector<std::pair<std::string, diff::Shape>> parameter_layout(const ModelConfig& c) {
  const std::size_t v = static_cast<std::size_t>(c.vocab_size);
  const std::size_t w = static_cast<std::size_t>(c.word_dim);
  const std::size_t h = static_cast<std::size_t>(c.hidden);
  const std::size_t f = c.feature_dim();
  return {
      {names::kEmbedding, {v, w}},
      {names::kEncoderForwardWeight, {4 * h, w + h}},
      {names::kEncoderForwardBias, {4 * h}},
      {names::kEncoderBackwardWeight, {4 * h, w + h}},
      {names::kEncoderBackwardBias, {4 * h}},
      {names::kDecoderWeight, {4 * h, 2 * f + h}},
      {names::kDecoderBias, {4 * h}},
      {names::kVisualAttention, {f, h}},
      {names::kInstructionAttention, {2 * h, h}},
      {names::kFusion, {h, 3 * h}},
      {names::kAction, {f, h}},
      {names::kCriticWeight, {1, h}},
      {names::kCriticBias, {1}},
  };
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  if (config.vocab_size <= 0 || config.word_dim <= 0 || config.visual_dim <= 0 || config.hidden <= 0) {
    throw ConfigError("model config: all dimensions must be positive");
  }
  Rng rng(derive_seed(seed, 0x9a7a));
  ModelParams params{config, {}};
  const std::size_t h = static_cast<std::size_t>(config.hidden);
  for (const auto& [name, shape] : parameter_layout(config)) {
    diff::Tensor<float> t(shape);
    auto values = t.values();
    if (name == names::kEmbedding) {
      for (float& x : values) x = static_cast<float>(0.3 * rng.normal());
    } else if (shape.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[1]));
      for (float& x : values) x = static_cast<float>(rng.uniform(-bound, bound));
    } else if (name == names::kEncoderForwardBias || name == names::kEncoderBackwardBias || name == names::kDecoderBias) {
      for (std::size_t i = h; i < 2 * h; ++i) values[i] = 1.0f;
    }
    params.tensors.add(name, std::move(t));
  }
  return params;
}

void validate(const ModelParams& params) {
  const auto layout = parameter_layout(params.config);
  if (params.tensors.size() != layout.size()) {
    throw ConfigError("model: expected " + std::to_string(layout.size()) + " tensors, found " +
                      std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, tensor] = params.tensors.entries()[i];
    if (name != layout[i].first) throw ConfigError("model: expected tensor '" + layout[i].first + "', found '" + name + "'");
    if (tensor.shape() != layout[i].second) {
      throw ConfigError("model: tensor '" + name + "' has shape " + diff::shape_string(tensor.shape()) + ", config implies " +
                        diff::shape_string(layout[i].second));
    }
  }
}

void save_model(const ModelParams& params, const std::filesystem::path& path, const nlohmann::json& extra) {
  validate(params);
  diff::Checkpoint ck;
  ck.tensors = params.tensors;
  ck.meta = {{"model", params.config}, {"ask_enabled", params.config.ask_enabled}};
  if (!extra.is_null()) ck.meta["extra"] = extra;
  diff::save_checkpoint(ck, path);
}

ModelParams load_model(const std::filesystem::path& path) {
  auto ck = diff::load_checkpoint(path);
  ModelParams params;
  try {
    params.config = ck.meta.at("model").get<ModelConfig>();
    params.config.ask_enabled = ck.meta.at("ask_enabled").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw diff::CorruptCheckpoint(std::string("checkpoint: manifest lacks model config: ") + e.what());
  }
  params.tensors = std::move(ck.tensors);
  validate(params);
  return params;
}

ModelParams with_ask(ModelParams params, bool enabled) {
  params.config.ask_enabled = enabled;
  return params;
}

}  // namespace askroute::policy
