#include "esvr/preference.hpp"

#include <cmath>

#include "esvr/error.hpp"
#include "esvr/prompts.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "preference_builder";
}

RewardParams RewardParams::value_preset() {
  RewardParams p;
  p.h = 3;
  p.gamma = 1.0;
  p.t_diff = 2.0;
  return p;
}

RewardParams RewardParams::emotion_preset() {
  RewardParams p;
  p.h = 3;
  p.gamma = 1.0;
  p.t_diff = 0.5;
  return p;
}

void RewardParams::validate() const {
  if (h && *h < 1) throw InvalidArgument(kModule, "h must be a positive integer or all");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument(kModule, "gamma must be in (0, 1]");
  if (!(t_diff >= 0.0)) throw InvalidArgument(kModule, "t_diff must be >= 0");
  if (!(binarize_threshold >= 0.0 && binarize_threshold <= 1.0))
    throw InvalidArgument(kModule, "binarize_threshold must be in [0, 1]");
  if (positivity_gate && !(*positivity_gate >= 0.0 && *positivity_gate <= 1.0))
    throw InvalidArgument(kModule, "positivity_gate must be in [0, 1]");
  if (judge_samples < 1) throw InvalidArgument(kModule, "judge_samples must be >= 1");
}

std::optional<RewardKind> parse_reward_kind(std::string_view s) {
  if (s == "value") return RewardKind::Value;
  if (s == "emotion") return RewardKind::Emotion;
  return std::nullopt;
}

double value_reward(std::span<const std::optional<TurnLabel>> future, const ValueSet& targets,
                    const RewardParams& params) {
  params.validate();
  const std::size_t horizon = params.h ? static_cast<std::size_t>(*params.h) : future.size();
  double total = 0.0;
  for (std::size_t k = 1; k <= horizon && k <= future.size(); ++k) {
    const auto& label = future[k - 1];
    if (!label) continue;
    if (params.positivity_gate && label->sentiment < *params.positivity_gate) continue;
    std::size_t n = count_value_hits(targets, label->values, params.binarize_threshold);
    total += std::pow(params.gamma, static_cast<double>(k - 1)) * static_cast<double>(n);
  }
  return total;
}

namespace {
void check_turn(const Transcript& tr, int t) {
  if (t < 0 || t >= tr.turn_count())
    throw InvalidArgument(kModule, "turn " + std::to_string(t) + " out of range for transcript " + tr.id + " with " +
                                       std::to_string(tr.turn_count()) + " turns");
}
}  // namespace

std::vector<std::optional<TurnLabel>> future_seeker_labels(const Transcript& tr, int t, Branch branch) {
  check_turn(tr, t);
  std::vector<std::optional<TurnLabel>> out;
  if (branch == Branch::Primary) {
    for (int i = t; i < tr.turn_count(); ++i) out.push_back(tr.turns[static_cast<std::size_t>(i)].seeker_reply.label);
  } else {
    const auto& rec = tr.turns[static_cast<std::size_t>(t)];
    if (!rec.alternative) throw InvalidArgument(kModule, "turn " + std::to_string(t) + " has no alternative branch");
    for (const auto& u : rec.alternative_rollout)
      if (u.role == Role::Seeker) out.push_back(u.label);
  }
  return out;
}

double value_reward(const Transcript& tr, int t, Branch branch, const RewardParams& params) {
  auto future = future_seeker_labels(tr, t, branch);
  const auto& rec = tr.turns[static_cast<std::size_t>(t)];
  ValueSet targets(rec.targets.begin(), rec.targets.end());
  return value_reward(future, targets, params);
}

std::optional<double> map_emotion_reply(const std::string& reply) {
  if (util::icontains(reply, "feels worse")) return -1.0;
  if (util::icontains(reply, "feels the same")) return -0.5;
  if (util::icontains(reply, "feels better")) return 0.5;
  if (util::icontains(reply, "has been solved") || util::icontains(reply, "been resolved")) return 1.0;
  return std::nullopt;
}

double emotion_score(const std::vector<std::string>& replies) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : replies) {
    if (auto s = map_emotion_reply(r)) {
      sum += *s;
      ++n;
    }
  }
  if (n == 0)
    throw ParseError(kModule, "none of " + std::to_string(replies.size()) + " emotion judge replies could be mapped",
                     replies.empty() ? std::string() : replies.front());
  return sum / static_cast<double>(n);
}

std::optional<std::vector<Utterance>> branch_dialogue(const Transcript& tr, int t, Branch branch, int k) {
  check_turn(tr, t);
  if (k < 1) throw InvalidArgument(kModule, "k must be >= 1");
  if (branch == Branch::Primary) {
    if (t + k > tr.turn_count()) return std::nullopt;
    return tr.history_before(t + k);
  }
  const auto& rec = tr.turns[static_cast<std::size_t>(t)];
  if (!rec.alternative) throw InvalidArgument(kModule, "turn " + std::to_string(t) + " has no alternative branch");
  std::vector<Utterance> d = tr.history_before(t);
  d.push_back({Role::Supporter, rec.alternative->response, rec.alternative->strategy, std::nullopt});
  int seen = 0;
  for (const auto& u : rec.alternative_rollout) {
    d.push_back(u);
    if (u.role == Role::Seeker && ++seen == k) return d;
  }
  return std::nullopt;
}

double emotion_reward(const Transcript& tr, int t, Branch branch, const RewardParams& params, Gateway& gw) {
  params.validate();
  double total = 0.0;
  for (int k = 1; !params.h || k <= *params.h; ++k) {
    auto d = branch_dialogue(tr, t, branch, k);
    if (!d) break;
    auto replies =
        gw.chat_n("judge", prompts::emotion_judge(tr.persona.emotion, tr.persona.problem_category, *d),
                  params.judge_samples);
    total += std::pow(params.gamma, static_cast<double>(k - 1)) * emotion_score(replies);
  }
  return total;
}

PairBuildResult build_pairs(const std::vector<Transcript>& transcripts, const RewardParams& params, RewardKind kind,
                            Gateway* gw, int jobs) {
  params.validate();
  if (kind == RewardKind::Emotion && !gw) throw InvalidArgument(kModule, "emotion rewards need a judge gateway");
  std::vector<std::vector<BranchRewards>> per(transcripts.size());
  util::parallel_for(transcripts.size(), jobs, [&](std::size_t i) {
    const Transcript& tr = transcripts[i];
    for (int t = 0; t < tr.turn_count(); ++t) {
      if (!tr.turns[static_cast<std::size_t>(t)].alternative) continue;
      BranchRewards b{tr.id, t, 0.0, 0.0};
      if (kind == RewardKind::Value) {
        b.primary = value_reward(tr, t, Branch::Primary, params);
        b.alternative = value_reward(tr, t, Branch::Alternative, params);
      } else {
        b.primary = emotion_reward(tr, t, Branch::Primary, params, *gw);
        b.alternative = emotion_reward(tr, t, Branch::Alternative, params, *gw);
      }
      per[i].push_back(b);
    }
  });

  PairBuildResult out;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const Transcript& tr = transcripts[i];
    for (const auto& b : per[i]) {
      out.rewards.push_back(b);
      double delta = b.primary - b.alternative;
      if (!(std::abs(delta) > params.t_diff)) continue;
      const TurnRecord& rec = tr.turns[static_cast<std::size_t>(b.turn)];
      PreferencePair p;
      p.transcript_id = tr.id;
      p.turn = b.turn;
      p.id = tr.id + "#" + std::to_string(b.turn);
      p.history = tr.history_before(b.turn);
      p.targets = rec.targets;
      p.reference = rec.reference;
      p.kind = kind;
      p.chosen_is_alternative = delta < 0;
      if (p.chosen_is_alternative) {
        p.chosen = *rec.alternative;
        p.rejected = rec.primary;
        p.chosen_reward = b.alternative;
        p.rejected_reward = b.primary;
        ++out.chosen_alternative;
      } else {
        p.chosen = rec.primary;
        p.rejected = *rec.alternative;
        p.chosen_reward = b.primary;
        p.rejected_reward = b.alternative;
        ++out.chosen_initial;
      }
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

std::string render_supporter_output(const SupporterOutput& s) {
  return "Step 1. Understanding the patient's issues and current state\n-Reasoning: " + s.step1 +
         "\nStep 2. Identifying the key points of the reference response\n-Reasoning: " + s.step2 +
         "\nStep 3. Determination of reference response usage\n-Reasoning: " + s.step3 +
         "\nStep 4. Therapist's next strategy and response\n-Strategy: " + std::string(strategy_name(s.strategy)) +
         "\n-Response: " + s.response;
}

json to_json(const PreferencePair& p) {
  json history = json::array();
  for (const auto& u : p.history) history.push_back(to_json(u));
  json targets = json::array();
  for (auto v : p.targets) targets.push_back(value_name(v));
  ValueSet ts(p.targets.begin(), p.targets.end());
  json prompt = json::array();
  for (const auto& m : prompts::supporter(p.history, ts, p.reference, ValueCatalog::builtin()))
    prompt.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"schema", schema::kPreferencePair},
              {"id", p.id},
              {"transcript_id", p.transcript_id},
              {"turn", p.turn},
              {"history", std::move(history)},
              {"targets", std::move(targets)},
              {"reference", p.reference},
              {"chosen", to_json(p.chosen)},
              {"rejected", to_json(p.rejected)},
              {"chosen_reward", p.chosen_reward},
              {"rejected_reward", p.rejected_reward},
              {"chosen_branch", p.chosen_is_alternative ? "alternative" : "initial"},
              {"reward", p.kind == RewardKind::Value ? "value" : "emotion"},
              {"prompt", std::move(prompt)},
              {"chosen_text", render_supporter_output(p.chosen)},
              {"rejected_text", render_supporter_output(p.rejected)}};
}

PreferencePair preference_pair_from_json(const json& j) {
  schema::expect(j, schema::kPreferencePair);
  PreferencePair p;
  p.id = schema::require_string(j, "id", true);
  p.transcript_id = schema::require_string(j, "transcript_id", true);
  p.turn = static_cast<int>(schema::require_integer(j, "turn"));
  const json& h = schema::require(j, "history");
  if (!h.is_array()) throw SchemaError(kModule, "history", "expected array");
  for (const auto& u : h) p.history.push_back(utterance_from_json(u));
  const json& targets = schema::require(j, "targets");
  value_set_from_json(targets, "targets");
  for (const auto& e : targets) p.targets.push_back(*parse_value(e.get<std::string>()));
  p.reference = schema::require_string(j, "reference");
  p.chosen = supporter_output_from_json(schema::require(j, "chosen"));
  p.rejected = supporter_output_from_json(schema::require(j, "rejected"));
  p.chosen_reward = schema::require_number(j, "chosen_reward");
  p.rejected_reward = schema::require_number(j, "rejected_reward");
  std::string branch = schema::require_string(j, "chosen_branch");
  if (branch != "initial" && branch != "alternative")
    throw SchemaError(kModule, "chosen_branch", "expected 'initial' or 'alternative'");
  p.chosen_is_alternative = branch == "alternative";
  std::string kind = schema::require_string(j, "reward");
  auto k = parse_reward_kind(kind);
  if (!k) throw SchemaError(kModule, "reward", "expected 'value' or 'emotion'");
  p.kind = *k;
  return p;
}

}  // namespace esvr
