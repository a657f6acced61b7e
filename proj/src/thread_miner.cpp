#include "esvr/thread_miner.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "esvr/error.hpp"
#include "esvr/prompts.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "thread_miner";

Utterance to_utterance(const ThreadNode& n) {
  Utterance u;
  u.role = n.author_role == AuthorRole::Op ? Role::Seeker : Role::Supporter;
  u.text = n.text;
  return u;
}

TurnLabel label_text(Gateway& gw, const std::string& text) {
  TurnLabel l;
  l.sentiment = gw.score_sentiment(text);
  l.values = gw.detect_values(text);
  return l;
}

std::vector<Utterance> history_of(const LabeledTree& lt, const std::vector<std::string>& ids) {
  std::vector<Utterance> out;
  for (const auto& id : ids) {
    Utterance u = to_utterance(lt.tree.node(id));
    if (auto it = lt.labels.find(id); it != lt.labels.end()) u.label = it->second;
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<ValueId> observed_targets(const ValueProbVector& v, const MiningParams& p) {
  return rank_within(v, binarize(v, p.target_floor), static_cast<std::size_t>(p.max_targets));
}

json utterances_json(const std::vector<Utterance>& us) {
  json a = json::array();
  for (const auto& u : us) a.push_back(to_json(u));
  return a;
}

std::vector<Utterance> utterances_from(const json& j, const std::string& field) {
  const json& a = schema::require(j, field);
  if (!a.is_array()) throw SchemaError(kModule, field, "expected array");
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    try {
      out.push_back(utterance_from_json(a[i]));
    } catch (const SchemaError& e) {
      throw SchemaError(e.module(), field + "[" + std::to_string(i) + "]." + e.field(), e.message());
    }
  }
  return out;
}

std::vector<std::string> strings_from(const json& j, const std::string& field) {
  const json& a = schema::require(j, field);
  if (!a.is_array()) throw SchemaError(kModule, field, "expected array of strings");
  std::vector<std::string> out;
  for (const auto& e : a) {
    if (!e.is_string()) throw SchemaError(kModule, field, "expected array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

json ranked_json(const std::vector<ValueId>& vs) {
  json a = json::array();
  for (auto v : vs) a.push_back(value_name(v));
  return a;
}

std::vector<ValueId> ranked_from(const json& j, const std::string& field) {
  ValueSet seen = value_set_from_json(schema::require(j, field), field);
  std::vector<ValueId> out;
  for (const auto& e : j[field]) out.push_back(*parse_value(e.get<std::string>()));
  if (out.empty() || out.size() > 3) throw SchemaError(kModule, field, "expected 1 to 3 target values");
  (void)seen;
  return out;
}

std::string target_line(const std::vector<ValueId>& vs) {
  std::vector<std::string> names;
  for (auto v : vs) names.emplace_back(value_name(v));
  return util::join(names, ", ");
}

json messages_json(const std::vector<ChatMessage>& msgs) {
  json a = json::array();
  for (const auto& m : msgs) a.push_back({{"role", m.role}, {"content", m.content}});
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Filtering

QualityFilter QualityFilter::defaults() {
  QualityFilter f;
  f.min_score = 1;
  f.min_upvote_ratio = 0.7;
  return f;
}

void QualityFilter::validate() const {
  if (min_upvote_ratio && !(*min_upvote_ratio >= 0.0 && *min_upvote_ratio <= 1.0))
    throw InvalidArgument(kModule, "min_upvote_ratio must be in [0,1]");
  if (min_length && max_length && *min_length > *max_length)
    throw InvalidArgument(kModule, "min_length exceeds max_length");
}

bool QualityFilter::accepts(const ThreadNode& n) const {
  if (min_score && n.score < *min_score) return false;
  if (min_upvote_ratio && n.upvote_ratio && *n.upvote_ratio < *min_upvote_ratio) return false;
  if (min_length && n.text.size() < *min_length) return false;
  if (max_length && n.text.size() > *max_length) return false;
  return true;
}

std::vector<ThreadTree> filter_threads(const std::vector<ThreadTree>& trees, const QualityFilter& filter) {
  filter.validate();
  std::vector<ThreadTree> out;
  for (const auto& t : trees) {
    ThreadTree kept = t.pruned([&](const ThreadNode& n) { return filter.accepts(n); });
    if (!kept.empty()) out.push_back(std::move(kept));
  }
  return out;
}

std::optional<Setting> parse_setting(std::string_view s) {
  if (s == "single" || s == "single_turn") return Setting::SingleTurn;
  if (s == "multi" || s == "multi_turn") return Setting::MultiTurn;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Linearization

LinearizeResult linearize_paths(const ThreadTree& tree, Setting setting) {
  LinearizeResult r;
  if (tree.empty()) return r;
  auto make_path = [&](const std::vector<std::string>& ids) {
    ThreadPath p;
    p.tree_id = tree.id();
    p.id = tree.id() + ":" + ids.back();
    p.node_ids = ids;
    for (const auto& id : ids) p.turns.push_back(to_utterance(tree.node(id)));
    return p;
  };

  const ThreadNode& root = tree.root();
  if (setting == Setting::SingleTurn) {
    for (const auto& cid : root.children) {
      const ThreadNode& c = tree.node(cid);
      if (c.author_role != AuthorRole::Commenter) {
        ++r.skipped_non_alternating;
        continue;
      }
      bool any = false;
      for (const auto& oid : c.children) {
        const ThreadNode& o = tree.node(oid);
        if (o.author_role != AuthorRole::Op) {
          ++r.skipped_non_alternating;
          continue;
        }
        any = true;
        r.paths.push_back(make_path({root.id, c.id, o.id}));
      }
      if (!any) ++r.skipped_short;
    }
    return r;
  }

  std::vector<std::string> stack;
  std::function<void(const ThreadNode&)> walk = [&](const ThreadNode& n) {
    stack.push_back(n.id);
    bool extended = false;
    for (const auto& cid : n.children) {
      const ThreadNode& c = tree.node(cid);
      if (c.author_role == n.author_role) {
        ++r.skipped_non_alternating;
        continue;
      }
      if (n.author_role == AuthorRole::Op) {
        bool has_reply = std::any_of(c.children.begin(), c.children.end(), [&](const std::string& g) {
          return tree.node(g).author_role == AuthorRole::Op;
        });
        if (!has_reply) {
          ++r.skipped_short;
          for (const auto& g : c.children)
            if (tree.node(g).author_role != AuthorRole::Op) ++r.skipped_non_alternating;
          continue;
        }
        extended = true;
      }
      walk(c);
    }
    if (n.author_role == AuthorRole::Op && !extended) {
      if (stack.size() >= 5) {
        r.paths.push_back(make_path(stack));
      } else if (stack.size() > 1) {
        ++r.skipped_short;
      }
    }
    stack.pop_back();
  };
  walk(root);
  return r;
}

// ---------------------------------------------------------------------------
// Labeling

std::vector<ThreadPath> label_paths(const std::vector<ThreadPath>& paths, Gateway& gw, int jobs) {
  std::vector<ThreadPath> out = paths;
  util::parallel_for(out.size(), jobs, [&](std::size_t i) {
    ThreadPath& p = out[i];
    try {
      for (auto& u : p.turns) u.label = label_text(gw, u.text);
    } catch (const Error& e) {
      throw Error(e.module(), "path " + p.id + ": " + e.what());
    }
  });
  return out;
}

LabeledTree label_tree(const ThreadTree& tree, Gateway& gw) {
  LabeledTree lt{tree, {}};
  try {
    for (const auto& n : tree.nodes()) lt.labels.emplace(n.id, label_text(gw, n.text));
  } catch (const Error& e) {
    throw Error(e.module(), "thread " + tree.id() + ": " + e.what());
  }
  return lt;
}

std::vector<ThreadPath> labeled_paths(const LabeledTree& lt, Setting setting) {
  auto r = linearize_paths(lt.tree, setting);
  for (auto& p : r.paths) {
    for (std::size_t i = 0; i < p.turns.size(); ++i) {
      if (auto it = lt.labels.find(p.node_ids[i]); it != lt.labels.end()) p.turns[i].label = it->second;
    }
  }
  return r.paths;
}

// ---------------------------------------------------------------------------
// Example construction

namespace {

struct Eligible {
  const ThreadPath* path;
  std::size_t t;  // index of o_t
  std::vector<ValueId> targets;
};

std::vector<Eligible> eligible_positions(const std::vector<ThreadPath>& paths, const MiningParams& params) {
  std::vector<Eligible> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& p : paths) {
    for (std::size_t t = 0; t + 2 < p.turns.size(); t += 2) {
      if (p.turns[t].role != Role::Seeker || p.turns[t + 1].role != Role::Supporter ||
          p.turns[t + 2].role != Role::Seeker)
        continue;
      std::vector<std::string> key(p.node_ids.begin(), p.node_ids.begin() + static_cast<long>(t) + 3);
      if (!seen.insert(key).second) continue;
      const Utterance& next = p.turns[t + 2];
      if (!next.label)
        throw InvalidArgument(kModule, "path " + p.id + " turn " + std::to_string(t + 2) + " has no label");
      if (next.label->sentiment < params.positivity_threshold) continue;
      auto targets = observed_targets(next.label->values, params);
      if (targets.empty()) continue;
      out.push_back({&p, t, std::move(targets)});
    }
  }
  return out;
}

}  // namespace

std::vector<TvdExample> build_tvd_examples(const std::vector<ThreadPath>& paths, const MiningParams& params) {
  std::vector<TvdExample> out;
  for (const auto& e : eligible_positions(paths, params)) {
    const ThreadPath& p = *e.path;
    TvdExample ex;
    ex.tree_id = p.tree_id;
    ex.id = p.tree_id + ":" + p.node_ids[e.t + 1] + ">" + p.node_ids[e.t + 2];
    ex.node_ids.assign(p.node_ids.begin(), p.node_ids.begin() + static_cast<long>(e.t) + 1);
    ex.history.assign(p.turns.begin(), p.turns.begin() + static_cast<long>(e.t) + 1);
    ex.targets = e.targets;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<RgSftExample> build_rg_sft(const std::vector<ThreadPath>& paths, const MiningParams& params) {
  std::vector<RgSftExample> out;
  for (const auto& e : eligible_positions(paths, params)) {
    const ThreadPath& p = *e.path;
    RgSftExample ex;
    ex.tree_id = p.tree_id;
    ex.id = p.tree_id + ":" + p.node_ids[e.t + 1] + ">" + p.node_ids[e.t + 2];
    ex.node_ids.assign(p.node_ids.begin(), p.node_ids.begin() + static_cast<long>(e.t) + 1);
    ex.history.assign(p.turns.begin(), p.turns.begin() + static_cast<long>(e.t) + 1);
    ex.targets = e.targets;
    ex.completion_id = p.node_ids[e.t + 1];
    ex.completion = p.turns[e.t + 1].text;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<RgDpoPair> build_rg_dpo(const std::vector<LabeledTree>& trees, Setting setting,
                                    const MiningParams& params, std::uint64_t seed) {
  std::vector<RgDpoPair> out;
  for (const auto& lt : trees) {
    const ThreadTree& tree = lt.tree;
    if (tree.empty()) continue;
    auto labeled_op_replies = [&](const ThreadNode& c) {
      std::vector<const ThreadNode*> rs;
      for (const auto& gid : c.children) {
        const ThreadNode& g = tree.node(gid);
        if (g.author_role == AuthorRole::Op && lt.labels.count(g.id)) rs.push_back(&g);
      }
      return rs;
    };

    // Op turns o_t with their alternating root paths.
    std::vector<std::vector<std::string>> anchors;
    if (setting == Setting::SingleTurn) {
      anchors.push_back({tree.root().id});
    } else {
      std::vector<std::string> stack;
      std::function<void(const ThreadNode&)> walk = [&](const ThreadNode& n) {
        stack.push_back(n.id);
        if (n.author_role == AuthorRole::Op) anchors.push_back(stack);
        for (const auto& cid : n.children) {
          const ThreadNode& c = tree.node(cid);
          if (c.author_role != n.author_role) walk(c);
        }
        stack.pop_back();
      };
      walk(tree.root());
    }

    for (const auto& history_ids : anchors) {
      const ThreadNode& ot = tree.node(history_ids.back());
      std::vector<const ThreadNode*> commenters;
      for (const auto& cid : ot.children) {
        const ThreadNode& c = tree.node(cid);
        if (c.author_role == AuthorRole::Commenter) commenters.push_back(&c);
      }
      for (const ThreadNode* c : commenters) {
        std::vector<const ThreadNode*> siblings;
        for (const ThreadNode* s : commenters)
          if (s != c && !labeled_op_replies(*s).empty()) siblings.push_back(s);
        if (siblings.empty()) continue;
        for (const ThreadNode* o : labeled_op_replies(*c)) {
          const TurnLabel& next = lt.labels.at(o->id);
          if (next.sentiment < params.positivity_threshold) continue;
          util::Rng rng(util::derive_seed(seed, "rg_dpo|" + tree.id() + "|" + c->id + "|" + o->id));
          const ThreadNode* rejected = siblings[rng.uniform_index(siblings.size())];
          std::array<double, kValueCount> vmax{};
          for (const ThreadNode* r : labeled_op_replies(*rejected)) {
            const auto& d = lt.labels.at(r->id).values.data();
            for (std::size_t i = 0; i < kValueCount; ++i) vmax[i] = std::max(vmax[i], d[i]);
          }
          ValueProbVector vprime(vmax);
          ValueSet distinct = distinct_targets(next.values, vprime, params.target_floor, params.max_targets);
          if (distinct.empty()) continue;
          RgDpoPair pair;
          pair.tree_id = tree.id();
          pair.id = tree.id() + ":" + c->id + ">" + o->id;
          pair.node_ids = history_ids;
          pair.history = history_of(lt, history_ids);
          pair.targets = rank_within(next.values, distinct, static_cast<std::size_t>(params.max_targets));
          pair.chosen_id = c->id;
          pair.chosen = c->text;
          pair.rejected_id = rejected->id;
          pair.rejected = rejected->text;
          out.push_back(std::move(pair));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Effectiveness analysis

EffectivenessResult effectiveness_analysis(const std::vector<Dialogue>& dialogues, const EffectivenessParams& params,
                                           Gateway* gw) {
  if (params.window < 1) throw InvalidArgument(kModule, "window must be positive");
  EffectivenessResult r;
  for (const auto& d : dialogues) {
    if (!d.initial_intensity || !d.final_intensity || *d.initial_intensity != 5 || *d.final_intensity < 1 ||
        *d.final_intensity > 4) {
      ++r.skipped;
      continue;
    }
    std::vector<const Utterance*> seeker;
    for (const auto& u : d.turns)
      if (u.role == Role::Seeker) seeker.push_back(&u);
    std::size_t from = seeker.size() > static_cast<std::size_t>(params.window)
                           ? seeker.size() - static_cast<std::size_t>(params.window)
                           : 0;
    double count = 0.0;
    for (std::size_t i = from; i < seeker.size(); ++i) {
      TurnLabel label;
      if (seeker[i]->label) {
        label = *seeker[i]->label;
      } else if (gw) {
        label = label_text(*gw, seeker[i]->text);
      } else {
        throw InvalidArgument(kModule, "dialogue " + d.id + " has unlabeled seeker turns and no gateway");
      }
      if (label.sentiment >= params.positivity_threshold)
        count += static_cast<double>(binarize(label.values, params.binarize_threshold).size());
    }
    if (*d.final_intensity <= 2) {
      r.high_counts.push_back(count);
    } else {
      r.low_counts.push_back(count);
    }
  }
  auto mean = [](const std::vector<double>& xs) -> std::optional<double> {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };
  r.high_count = r.high_counts.size();
  r.low_count = r.low_counts.size();
  r.high_mean = mean(r.high_counts);
  r.low_mean = mean(r.low_counts);
  if (!r.high_counts.empty() && !r.low_counts.empty()) r.test = mann_whitney_u(r.high_counts, r.low_counts);
  return r;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const ThreadPath& p) {
  return json{{"schema", schema::kLabeledPath},
              {"id", p.id},
              {"tree_id", p.tree_id},
              {"node_ids", p.node_ids},
              {"turns", utterances_json(p.turns)}};
}

ThreadPath thread_path_from_json(const json& j) {
  schema::expect(j, schema::kLabeledPath);
  ThreadPath p;
  p.id = schema::require_string(j, "id", true);
  p.tree_id = schema::require_string(j, "tree_id", true);
  p.node_ids = strings_from(j, "node_ids");
  p.turns = utterances_from(j, "turns");
  if (p.node_ids.size() != p.turns.size()) throw SchemaError(kModule, "node_ids", "length differs from turns");
  return p;
}

json to_json(const TvdExample& e) {
  return json{{"schema", schema::kTvd},
              {"id", e.id},
              {"tree_id", e.tree_id},
              {"node_ids", e.node_ids},
              {"history", utterances_json(e.history)},
              {"targets", ranked_json(e.targets)},
              {"prompt", messages_json(prompts::tvd(e.history))},
              {"completion", target_line(e.targets)}};
}

TvdExample tvd_from_json(const json& j) {
  schema::expect(j, schema::kTvd);
  TvdExample e;
  e.id = schema::require_string(j, "id", true);
  e.tree_id = schema::require_string(j, "tree_id", true);
  e.node_ids = strings_from(j, "node_ids");
  e.history = utterances_from(j, "history");
  e.targets = ranked_from(j, "targets");
  return e;
}

json to_json(const RgSftExample& e) {
  ValueSet ts(e.targets.begin(), e.targets.end());
  return json{{"schema", schema::kRgSft},
              {"id", e.id},
              {"tree_id", e.tree_id},
              {"node_ids", e.node_ids},
              {"history", utterances_json(e.history)},
              {"targets", ranked_json(e.targets)},
              {"completion_id", e.completion_id},
              {"completion", e.completion},
              {"prompt", messages_json(prompts::rg(e.history, ts, ValueCatalog::builtin()))}};
}

RgSftExample rg_sft_from_json(const json& j) {
  schema::expect(j, schema::kRgSft);
  RgSftExample e;
  e.id = schema::require_string(j, "id", true);
  e.tree_id = schema::require_string(j, "tree_id", true);
  e.node_ids = strings_from(j, "node_ids");
  e.history = utterances_from(j, "history");
  e.targets = ranked_from(j, "targets");
  e.completion_id = schema::require_string(j, "completion_id", true);
  e.completion = schema::require_string(j, "completion", true);
  return e;
}

json to_json(const RgDpoPair& p) {
  ValueSet ts(p.targets.begin(), p.targets.end());
  return json{{"schema", schema::kRgDpo},
              {"id", p.id},
              {"tree_id", p.tree_id},
              {"node_ids", p.node_ids},
              {"history", utterances_json(p.history)},
              {"targets", ranked_json(p.targets)},
              {"chosen_id", p.chosen_id},
              {"chosen", p.chosen},
              {"rejected_id", p.rejected_id},
              {"rejected", p.rejected},
              {"prompt", messages_json(prompts::rg(p.history, ts, ValueCatalog::builtin()))}};
}

RgDpoPair rg_dpo_from_json(const json& j) {
  schema::expect(j, schema::kRgDpo);
  RgDpoPair p;
  p.id = schema::require_string(j, "id", true);
  p.tree_id = schema::require_string(j, "tree_id", true);
  p.node_ids = strings_from(j, "node_ids");
  p.history = utterances_from(j, "history");
  p.targets = ranked_from(j, "targets");
  p.chosen_id = schema::require_string(j, "chosen_id", true);
  p.chosen = schema::require_string(j, "chosen", true);
  p.rejected_id = schema::require_string(j, "rejected_id", true);
  p.rejected = schema::require_string(j, "rejected", true);
  if (p.chosen_id == p.rejected_id) throw SchemaError(kModule, "rejected_id", "must differ from chosen_id");
  return p;
}

}  // namespace esvr
