#include "askroute/langgen.hpp"

#include <cmath>
#include <stdexcept>

#include "askroute/rng.hpp"

namespace askroute::lang {

namespace {

const std::vector<std::string>& template_words() {
  static const std::vector<std::string> words{
      "straight", "left", "right", "back", "to", "past", "stop", "near", "at", "the", "then", "and",
      "walk", "go", "turn", "a", "bit", "room", "one", "two", "three", "once", "twice", "wait"};
  return words;
}

const std::vector<std::string>& landmark_names() {
  static const std::vector<std::string> names{
      "bed", "door", "lamp", "sofa", "table", "chair", "sink", "stairs", "window", "plant", "rug", "piano",
      "fridge", "shelf", "tv", "desk", "bathtub", "closet", "mirror", "painting", "fireplace", "bench", "oven",
      "toilet", "counter", "dresser", "curtain", "armchair", "bookcase", "vase", "clock", "statue", "railing",
      "archway", "hallway", "balcony", "pillar", "column", "cabinet", "stove", "washer", "dryer", "shower",
      "towel", "ottoman", "crib", "couch", "nightstand", "doorway", "fountain", "sculpture", "island",
      "pantry", "skylight", "radiator", "wardrobe", "chandelier", "bar", "stool", "carpet"};
  return names;
}

}  // namespace

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  for (const auto& w : template_words()) tokens_.push_back(w);
  first_landmark_ = static_cast<int>(tokens_.size());
  for (const auto& w : landmark_names()) tokens_.push_back(w);
  landmark_count_ = landmark_names().size();
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw std::out_of_range("vocabulary: token id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

int Vocabulary::landmark_token(int landmark) const {
  if (landmark < 0 || static_cast<std::size_t>(landmark) >= landmark_count_) {
    throw std::out_of_range("vocabulary: no noun for landmark " + std::to_string(landmark));
  }
  return first_landmark_ + landmark;
}

int Vocabulary::landmark_of(int token_id) const {
  const int l = token_id - first_landmark_;
  return (l >= 0 && static_cast<std::size_t>(l) < landmark_count_) ? l : -1;
}

const Vocabulary& vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

int turn_word(double prev_heading, double next_heading, const LangConfig& config) {
  const auto& v = vocabulary();
  const double delta = world::wrap_angle(next_heading - prev_heading);
  if (std::abs(delta) <= config.straight_limit) return v.lookup("straight");
  if (delta > config.straight_limit && delta <= config.back_limit) return v.lookup("left");
  if (delta < -config.straight_limit && delta > -config.back_limit) return v.lookup("right");
  return v.lookup("back");
}

Instruction generate_instruction(const world::WorldGraph& world, std::span<const int> trajectory, double ambiguity,
                                 std::uint64_t seed, const LangConfig& config) {
  if (trajectory.empty()) throw std::invalid_argument("generate_instruction: empty trajectory");
  if (ambiguity < 0.0 || ambiguity > 1.0) throw std::invalid_argument("generate_instruction: ambiguity outside [0,1]");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!world.adjacent(trajectory[i - 1], trajectory[i])) {
      throw std::invalid_argument("generate_instruction: trajectory is not a path in the world");
    }
  }
  const auto& v = vocabulary();
  Rng rng(derive_seed(seed, 0x1e7));
  Instruction out;
  double heading = 0.0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    const double next = world::bearing(world, trajectory[i - 1], trajectory[i]);
    const bool dropped = rng.bernoulli(ambiguity);
    const bool past = rng.bernoulli(0.5);
    if (!dropped) {
      out.token_ids.push_back(turn_word(heading, next, config));
      out.token_ids.push_back(v.lookup(past ? "past" : "to"));
      out.token_ids.push_back(v.landmark_token(world.landmark(trajectory[i])));
    }
    heading = next;
  }
  out.token_ids.push_back(v.lookup("stop"));
  out.token_ids.push_back(v.lookup(rng.bernoulli(0.5) ? "near" : "at"));
  out.token_ids.push_back(v.lookup("the"));
  out.token_ids.push_back(v.landmark_token(world.landmark(trajectory.back())));
  return out;
}

std::string render(const Instruction& instruction) {
  std::string s;
  for (int id : instruction.token_ids) {
    if (!s.empty()) s += ' ';
    s += vocabulary().token(id);
  }
  return s;
}

nlohmann::json vocabulary_json() { return vocabulary().tokens(); }

}  // namespace askroute::lang
