#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "askroute/world.hpp"
#include "json.hpp"

namespace askroute::lang {

/// Token table: pad at 0, unk at 1, then template words, then landmark nouns
/// in landmark-id order.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  /// Id of `token`, or the unk id when absent.
  int lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int landmark_token(int landmark) const;
  /// Landmark id named by a token, or -1.
  int landmark_of(int token_id) const;
  std::size_t landmark_count() const { return landmark_count_; }

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int first_landmark_ = 0;
  std::size_t landmark_count_ = 0;
};

const Vocabulary& vocabulary();

enum class Source { generated, augmented };

struct Instruction {
  std::vector<int> token_ids;
  Source source = Source::generated;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct LangConfig {
  /// Turn-word thresholds on the wrapped heading change.
  double straight_limit = world::kPi / 6.0;
  double back_limit = 5.0 * world::kPi / 6.0;
};

/// Direction word for the heading change prev -> next (counter-clockwise
/// positive): |Δ| <= straight_limit is "straight", Δ in (straight, back] is
/// "left", Δ in (-back, -straight) is "right", anything else "back".
int turn_word(double prev_heading, double next_heading, const LangConfig& config = {});

/// One clause per step ("<turn> to|past <landmark>"), each dropped with
/// probability `ambiguity`, then "stop near|at the <target landmark>".
/// The agent is taken to face heading 0 at the start.
Instruction generate_instruction(const world::WorldGraph& world, std::span<const int> trajectory, double ambiguity,
                                 std::uint64_t seed, const LangConfig& config = {});

std::string render(const Instruction& instruction);

/// Vocabulary dump: a JSON array of token strings.
nlohmann::json vocabulary_json();

inline constexpr std::size_t kMinInstructionLength = 3;
inline constexpr std::size_t kMaxInstructionLength = 40;
inline constexpr std::size_t kClauseLength = 3;
inline constexpr std::size_t kTerminalLength = 4;

}  // namespace askroute::lang
