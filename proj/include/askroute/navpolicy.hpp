#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "askroute/diff/checkpoint.hpp"
#include "askroute/diff/lstm.hpp"
#include "askroute/diff/ops.hpp"
#include "askroute/diff/params.hpp"
#include "askroute/errors.hpp"
#include "askroute/rng.hpp"
#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::policy {

struct ModelConfig {
  int vocab_size = 0;
  int word_dim = 32;
  int visual_dim = 32;
  int hidden = 64;
  bool ask_enabled = false;

  /// Width of a view row / action feature: visual part plus four angle terms.
  std::size_t feature_dim() const { return static_cast<std::size_t>(visual_dim) + world::kAngleFeatures; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

template <typename T>
struct BasicModelParams {
  ModelConfig config;
  diff::NamedTensors<T> tensors;

  template <typename U>
  BasicModelParams<U> cast() const {
    return {config, tensors.template cast<U>()};
  }
};

using ModelParams = BasicModelParams<float>;

namespace names {
inline constexpr const char* kEmbedding = "embedding";
inline constexpr const char* kEncoderForwardWeight = "encoder.forward.weight";
inline constexpr const char* kEncoderForwardBias = "encoder.forward.bias";
inline constexpr const char* kEncoderBackwardWeight = "encoder.backward.weight";
inline constexpr const char* kEncoderBackwardBias = "encoder.backward.bias";
inline constexpr const char* kDecoderWeight = "decoder.weight";
inline constexpr const char* kDecoderBias = "decoder.bias";
inline constexpr const char* kVisualAttention = "visual_attention";
inline constexpr const char* kInstructionAttention = "instruction_attention";
inline constexpr const char* kFusion = "fusion";
inline constexpr const char* kAction = "action";
inline constexpr const char* kCriticWeight = "critic.weight";
inline constexpr const char* kCriticBias = "critic.bias";
}  // namespace names

/// Names of the tensors only the critic loss reaches.
inline bool is_critic_tensor(const std::string& name) {
  return name == names::kCriticWeight || name == names::kCriticBias;
}

/// Expected shape of every parameter for `config`, in checkpoint order.
std::vector<std::pair<std::string, diff::Shape>> parameter_layout(const ModelConfig& config);

/// Fresh parameters: LSTM and projection weights uniform in ±1/sqrt(fan_in),
/// word embeddings N(0, 0.3²), forget-gate biases 1, everything else 0.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Throws ConfigError if any tensor is missing or mis-shaped for params.config.
void validate(const ModelParams& params);

void save_model(const ModelParams& params, const std::filesystem::path& path, const nlohmann::json& extra = {});
/// Loads and validates; `ask_enabled` is read back from the manifest.
ModelParams load_model(const std::filesystem::path& path);

/// Same tensors with the ask action switched on or off. Asking adds no
/// parameters: the ask logit reuses the action projection.
ModelParams with_ask(ModelParams params, bool enabled);

template <typename T>
struct EncodedInstruction {
  diff::Var<T> rows;  // [l, 2H], forward ‖ backward per token
  std::size_t length = 0;
};

template <typename T>
struct DecoderState {
  diff::Var<T> h;
  diff::Var<T> c;
  diff::Var<T> h_tilde;
  diff::Var<T> prev_action;
  diff::Var<T> alpha;
  diff::Var<T> beta;
};

template <typename T>
struct StepOutput {
  diff::Var<T> logits;  // [m] or [m+1] with ask last
  diff::Var<T> probs;
  diff::Var<T> value;  // [1]
  DecoderState<T> state;
  std::size_t ask_index = world::ActionSet::npos;
};

/// The agent network bound to one tape.
template <typename T>
class Policy {
 public:
  /// With `detach_critic`, the critic reads a constant copy of h̃ so its loss
  /// trains only the critic head.
  Policy(diff::Tape<T>& tape, const BasicModelParams<T>& params, bool detach_critic = true)
      : Policy(tape, params.config, diff::BoundTensors<T>(tape, params.tensors), detach_critic) {}

  /// Over tensors already bound to `tape`, e.g. by a gradient check.
  Policy(diff::Tape<T>& tape, const ModelConfig& config, diff::BoundTensors<T> bound, bool detach_critic = true)
      : tape_(&tape), config_(config), bound_(std::move(bound)), detach_critic_(detach_critic) {
    embedding_ = bound_[names::kEmbedding];
    enc_fwd_ = {bound_[names::kEncoderForwardWeight], bound_[names::kEncoderForwardBias]};
    enc_bwd_ = {bound_[names::kEncoderBackwardWeight], bound_[names::kEncoderBackwardBias]};
    dec_ = {bound_[names::kDecoderWeight], bound_[names::kDecoderBias]};
    w_visual_ = bound_[names::kVisualAttention];
    w_instr_ = bound_[names::kInstructionAttention];
    w_fusion_ = bound_[names::kFusion];
    w_action_ = bound_[names::kAction];
    critic_w_ = bound_[names::kCriticWeight];
    critic_b_ = bound_[names::kCriticBias];
  }

  const ModelConfig& config() const { return config_; }
  const diff::BoundTensors<T>& bound() const { return bound_; }
  diff::Tape<T>& tape() { return *tape_; }

  EncodedInstruction<T> encode(std::span<const int> tokens) {
    if (tokens.empty()) throw std::invalid_argument("encode_instruction: empty instruction");
    for (int id : tokens) {
      if (id < 0 || id >= config_.vocab_size) {
        throw std::out_of_range("encode_instruction: token id " + std::to_string(id) + " >= vocabulary " +
                                std::to_string(config_.vocab_size));
      }
    }
    const std::size_t l = tokens.size();
    auto embedded = diff::embedding_lookup(embedding_, tokens);
    std::vector<diff::Var<T>> words(l);
    for (std::size_t i = 0; i < l; ++i) words[i] = diff::row(embedded, i);

    std::vector<diff::Var<T>> fwd(l), bwd(l);
    diff::LstmState<T> s{zeros(hidden()), zeros(hidden())};
    for (std::size_t i = 0; i < l; ++i) {
      s = diff::lstm_cell(enc_fwd_, words[i], s);
      fwd[i] = s.h;
    }
    s = {zeros(hidden()), zeros(hidden())};
    for (std::size_t i = l; i-- > 0;) {
      s = diff::lstm_cell(enc_bwd_, words[i], s);
      bwd[i] = s.h;
    }
    std::vector<diff::Var<T>> rows(l);
    for (std::size_t i = 0; i < l; ++i) rows[i] = diff::concat({fwd[i], bwd[i]});
    return {diff::stack(std::span<const diff::Var<T>>(rows)), l};
  }

  DecoderState<T> initial_state() {
    return {zeros(hidden()), zeros(hidden()), zeros(hidden()), zeros(config_.feature_dim()), {}, {}};
  }

  /// Attention-weighted panoramic feature; also returns the weights.
  std::pair<diff::Var<T>, diff::Var<T>> attend_visual(const world::ViewFeature& view, diff::Var<T> h_tilde_prev) {
    auto rows = view_matrix(view);
    auto alpha = diff::softmax(diff::matmul(rows, diff::matmul(w_visual_, h_tilde_prev)));
    return {diff::matmul(alpha, rows), alpha};
  }

  StepOutput<T> step(const EncodedInstruction<T>& enc, const world::ViewFeature& view, const world::ActionSet& actions,
                     const DecoderState<T>& state) {
    auto [attended, alpha] = attend_visual(view, state.h_tilde);
    auto cell = diff::lstm_cell(dec_, diff::concat({attended, state.prev_action}), {state.h_tilde, state.c});
    auto beta = diff::softmax(diff::matmul(enc.rows, diff::matmul(w_instr_, cell.h)));
    auto instr = diff::matmul(beta, enc.rows);
    auto h_tilde = diff::tanh(diff::matmul(w_fusion_, diff::concat({instr, cell.h})));

    StepOutput<T> out;
    out.logits = diff::matmul(action_matrix(actions), diff::matmul(w_action_, h_tilde));
    out.probs = diff::softmax(out.logits);
    auto critic_in = detach_critic_ ? diff::stop_gradient(h_tilde) : h_tilde;
    out.value = diff::add(diff::matmul(critic_w_, critic_in), critic_b_);
    out.state = {cell.h, cell.c, h_tilde, state.prev_action, alpha, beta};
    if (config_.ask_enabled) out.ask_index = actions.size();
    return out;
  }

  /// Feature of action `index` as a constant: move feature, zeros for stop,
  /// ones for ask.
  diff::Var<T> action_feature(const world::ActionSet& actions, std::size_t index) {
    const std::size_t f = config_.feature_dim();
    std::vector<T> v(f, T{0});
    if (index < actions.moves.size()) {
      const auto& src = actions.moves[index].feature;
      for (std::size_t i = 0; i < f; ++i) v[i] = static_cast<T>(src[i]);
    } else if (index == actions.size() && config_.ask_enabled) {
      std::fill(v.begin(), v.end(), T{1});
    } else if (index != actions.stop_index()) {
      throw std::out_of_range("action_feature: index " + std::to_string(index));
    }
    return tape_->constant(diff::Shape{f}, std::move(v));
  }

  /// State after executing `index`: its feature becomes the previous action.
  DecoderState<T> advance(DecoderState<T> state, const world::ActionSet& actions, std::size_t index) {
    state.prev_action = action_feature(actions, index);
    return state;
  }

 private:
  std::size_t hidden() const { return static_cast<std::size_t>(config_.hidden); }

  diff::Var<T> zeros(std::size_t n) { return tape_->constant(diff::Shape{n}, std::vector<T>(n, T{0})); }

  diff::Var<T> view_matrix(const world::ViewFeature& view) {
    if (view.row_dim != config_.feature_dim()) {
      throw diff::ShapeError("decode_step: view rows of width " + std::to_string(view.row_dim) +
                             " for feature width " + std::to_string(config_.feature_dim()));
    }
    std::vector<T> v(view.rows.begin(), view.rows.end());
    return tape_->constant(diff::Shape{world::kViewSlots, view.row_dim}, std::move(v));
  }

  diff::Var<T> action_matrix(const world::ActionSet& actions) {
    const std::size_t f = config_.feature_dim();
    if (actions.feature_dim != f) {
      throw diff::ShapeError("decode_step: action features of width " + std::to_string(actions.feature_dim) +
                             " for feature width " + std::to_string(f));
    }
    const std::size_t rows = actions.size() + (config_.ask_enabled ? 1 : 0);
    std::vector<T> v(rows * f, T{0});
    for (std::size_t k = 0; k < actions.moves.size(); ++k)
      for (std::size_t i = 0; i < f; ++i) v[k * f + i] = static_cast<T>(actions.moves[k].feature[i]);
    if (config_.ask_enabled) std::fill(v.end() - static_cast<std::ptrdiff_t>(f), v.end(), T{1});
    return tape_->constant(diff::Shape{rows, f}, std::move(v));
  }

  diff::Tape<T>* tape_;
  ModelConfig config_;
  diff::BoundTensors<T> bound_;
  bool detach_critic_;
  diff::Var<T> embedding_;
  diff::LstmWeights<T> enc_fwd_, enc_bwd_, dec_;
  diff::Var<T> w_visual_, w_instr_, w_fusion_, w_action_, critic_w_, critic_b_;
};

/// Index of the largest probability; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace askroute::policy
