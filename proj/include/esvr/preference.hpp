#pragma once

// Discounted value-reinforcement reward, the emotion-score variant, and DPO
// preference pairs between a turn's initial and alternative responses.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esvr/gateway.hpp"
#include "esvr/simulation.hpp"

namespace esvr {

struct RewardParams {
  std::optional<int> h = 3;  // nullopt: the whole remaining branch
  double gamma = 1.0;
  double t_diff = 2.0;
  double binarize_threshold = 0.5;
  std::optional<double> positivity_gate;  // seeker turns below it count zero
  int judge_samples = 10;

  static RewardParams value_preset();    // h=3, gamma=1, t_diff=2
  static RewardParams emotion_preset();  // h=3, gamma=1, t_diff=0.5
  void validate() const;
};

enum class RewardKind { Value, Emotion };
enum class Branch { Primary, Alternative };
std::optional<RewardKind> parse_reward_kind(std::string_view s);

// sum_{k=1..h} gamma^(k-1) * |targets ∩ binarize(future[k-1])|. Entries past the
// end, and unlabeled ones, contribute zero.
double value_reward(std::span<const std::optional<TurnLabel>> future, const ValueSet& targets,
                    const RewardParams& params);

// Seeker labels after supporter turn t on the given branch, in order.
std::vector<std::optional<TurnLabel>> future_seeker_labels(const Transcript& tr, int t, Branch branch);
// Throws InvalidArgument when t is not a turn of the transcript.
double value_reward(const Transcript& tr, int t, Branch branch, const RewardParams& params);

// worse -1, same -0.5, better 0.5, solved 1; nullopt for anything else.
std::optional<double> map_emotion_reply(const std::string& reply);
// Mean over mappable replies; ParseError when none map.
double emotion_score(const std::vector<std::string>& replies);
// Branch dialogue through its k-th future seeker reply (k >= 1), or nullopt
// past the end of the branch.
std::optional<std::vector<Utterance>> branch_dialogue(const Transcript& tr, int t, Branch branch, int k);
double emotion_reward(const Transcript& tr, int t, Branch branch, const RewardParams& params, Gateway& gw);

struct PreferencePair {
  std::string id;
  std::string transcript_id;
  int turn = 0;
  std::vector<Utterance> history;
  std::vector<ValueId> targets;
  std::string reference;
  SupporterOutput chosen;
  SupporterOutput rejected;
  double chosen_reward = 0.0;
  double rejected_reward = 0.0;
  bool chosen_is_alternative = false;
  RewardKind kind = RewardKind::Value;
  bool operator==(const PreferencePair&) const = default;
};

struct BranchRewards {
  std::string transcript_id;
  int turn = 0;
  double primary = 0.0;
  double alternative = 0.0;
};

struct PairBuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<BranchRewards> rewards;  // every branch point considered
  std::size_t chosen_initial = 0;
  std::size_t chosen_alternative = 0;
};

// Emits a pair iff |r_primary - r_alternative| > t_diff; the higher reward is
// chosen. Emotion rewards need `gw`.
PairBuildResult build_pairs(const std::vector<Transcript>& transcripts, const RewardParams& params, RewardKind kind,
                            Gateway* gw = nullptr, int jobs = 1);

// Four-step template text of a supporter output.
std::string render_supporter_output(const SupporterOutput& s);

json to_json(const PreferencePair& p);
PreferencePair preference_pair_from_json(const json& j);

}  // namespace esvr
