#pragma once

// Thread trees -> target-value and reference-response training data, plus the
// value-expression effectiveness analysis over rated dialogues.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esvr/corpus.hpp"
#include "esvr/gateway.hpp"
#include "esvr/stats.hpp"
#include "esvr/value_core.hpp"

namespace esvr {

struct QualityFilter {
  std::optional<long long> min_score;
  std::optional<double> min_upvote_ratio;
  std::optional<std::size_t> min_length;
  std::optional<std::size_t> max_length;

  // min_score 1, min_upvote_ratio 0.7.
  static QualityFilter defaults();
  void validate() const;
  bool accepts(const ThreadNode& n) const;
};

// Drops failing nodes with their subtrees; trees whose root fails vanish.
std::vector<ThreadTree> filter_threads(const std::vector<ThreadTree>& trees, const QualityFilter& filter);

enum class Setting { SingleTurn, MultiTurn };
std::optional<Setting> parse_setting(std::string_view s);

// A root-to-op path. Op turns map to Role::Seeker, commenter turns to Role::Supporter.
struct ThreadPath {
  std::string id;
  std::string tree_id;
  std::vector<std::string> node_ids;
  std::vector<Utterance> turns;
  bool operator==(const ThreadPath&) const = default;
};

struct LinearizeResult {
  std::vector<ThreadPath> paths;
  std::size_t skipped_non_alternating = 0;  // op->op or commenter->commenter edges
  std::size_t skipped_short = 0;            // branches that never reach a qualifying op turn
};

// single_turn: every (o1, c1, o2) triple under the root.
// multi_turn: maximal alternating root paths of at least five turns that end
// on an op turn.
LinearizeResult linearize_paths(const ThreadTree& tree, Setting setting);

// Labels every turn (sentiment + values). Errors name the path.
std::vector<ThreadPath> label_paths(const std::vector<ThreadPath>& paths, Gateway& gw, int jobs = 1);

struct LabeledTree {
  ThreadTree tree;
  std::map<std::string, TurnLabel> labels;  // by node id; op nodes at least
};
// Labels the op nodes of a tree (those are the only ones targets are read from).
LabeledTree label_tree(const ThreadTree& tree, Gateway& gw);
// Paths of a labeled tree with labels attached from the tree.
std::vector<ThreadPath> labeled_paths(const LabeledTree& lt, Setting setting);

struct MiningParams {
  double positivity_threshold = 0.5;  // gate on o_{t+1} sentiment
  double target_floor = 0.5;          // binarization threshold for observed values
  int max_targets = 3;
};

struct TvdExample {
  std::string id;
  std::string tree_id;
  std::vector<std::string> node_ids;  // history nodes
  std::vector<Utterance> history;     // ends at o_t
  std::vector<ValueId> targets;       // ranked, 1..3
  bool operator==(const TvdExample&) const = default;
};

struct RgSftExample {
  std::string id;
  std::string tree_id;
  std::vector<std::string> node_ids;
  std::vector<Utterance> history;
  std::vector<ValueId> targets;
  std::string completion_id;
  std::string completion;  // c_t
  bool operator==(const RgSftExample&) const = default;
};

struct RgDpoPair {
  std::string id;
  std::string tree_id;
  std::vector<std::string> node_ids;
  std::vector<Utterance> history;
  std::vector<ValueId> targets;  // ranked, disjoint from the rejected reply's values
  std::string chosen_id;
  std::string chosen;
  std::string rejected_id;
  std::string rejected;
  bool operator==(const RgDpoPair&) const = default;
};

// One example per (history, c_t, o_{t+1}) whose o_{t+1} clears the positivity
// gate and shows at least one value at the floor. Duplicate histories from
// overlapping multi-turn paths are emitted once.
std::vector<TvdExample> build_tvd_examples(const std::vector<ThreadPath>& paths, const MiningParams& params);
std::vector<RgSftExample> build_rg_sft(const std::vector<ThreadPath>& paths, const MiningParams& params);

// For each eligible (o_t, c_t, o_{t+1}) with at least one sibling of c_t that
// has a labeled op reply, samples the rejected sibling uniformly. The sibling's
// observed values are the elementwise max over its op replies.
std::vector<RgDpoPair> build_rg_dpo(const std::vector<LabeledTree>& trees, Setting setting,
                                    const MiningParams& params, std::uint64_t seed);

struct EffectivenessParams {
  int window = 4;
  double positivity_threshold = 0.5;
  double binarize_threshold = 0.5;
};

struct EffectivenessResult {
  std::optional<double> high_mean;  // final intensity 1-2
  std::optional<double> low_mean;   // final intensity 3-4
  std::size_t high_count = 0;
  std::size_t low_count = 0;
  std::size_t skipped = 0;  // missing intensities or out-of-scope ratings
  std::vector<double> high_counts;
  std::vector<double> low_counts;
  std::optional<MannWhitneyResult> test;
};

// Seeker turns without a label are labeled through the gateway.
EffectivenessResult effectiveness_analysis(const std::vector<Dialogue>& dialogues, const EffectivenessParams& params,
                                           Gateway* gw);

json to_json(const ThreadPath& p);
ThreadPath thread_path_from_json(const json& j);
json to_json(const TvdExample& e);
json to_json(const RgSftExample& e);
json to_json(const RgDpoPair& p);
TvdExample tvd_from_json(const json& j);
RgSftExample rg_sft_from_json(const json& j);
RgDpoPair rg_dpo_from_json(const json& j);

}  // namespace esvr
