#include "esvr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_set>

#include "esvr/error.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {

constexpr const char* kModule = "corpus";

constexpr std::array<Strategy, kStrategyCount> kStrategies = {
    Strategy::Question,    Strategy::Restatement, Strategy::Reflection,  Strategy::SelfDisclosure,
    Strategy::Affirmation, Strategy::Suggestions, Strategy::Information, Strategy::Others,
};

constexpr std::array<std::string_view, kStrategyCount> kStrategyNames = {
    "Question", "Restatement", "Reflection", "Self-disclosure", "Affirmation", "Suggestions", "Information", "Others",
};

constexpr std::array<std::string_view, kStrategyCount> kStrategyDescriptions = {
    "Ask open-ended or specific questions to help the seeker articulate and clarify the issues they are facing.",
    "Rephrase the seeker's statements in a clearer, more concise way to help them better understand their "
    "situation.",
    "Express and describe the emotions that the seeker is experiencing to validate their feelings.",
    "Share similar experiences or emotions to convey empathy and build connection with the seeker.",
    "Highlight the seeker's strengths and abilities while offering encouragement and reassurance.",
    "Offer practical advice or actionable steps to the seeker.",
    "Share useful facts, resources, or data to help the seeker make informed decisions or gain clarity.",
    "Use other support strategies that do not fall into the above categories.",
};

constexpr std::array<Emotion, kEmotionCount> kEmotions = {
    Emotion::Frustration, Emotion::Anxiety, Emotion::Sadness,    Emotion::Fear,     Emotion::Guilt,
    Emotion::Shame,       Emotion::Anger,   Emotion::Depression, Emotion::Jealousy, Emotion::Disgust,
};

constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "Frustration", "Anxiety", "Sadness", "Fear", "Guilt", "Shame", "Anger", "Depression", "Jealousy", "Disgust",
};

std::string strip_decorations(std::string_view raw) {
  std::string s = util::trim(raw);
  auto strip_char = [](char c) {
    return c == '"' || c == '\'' || c == '`' || c == '*' || c == '[' || c == ']' || c == '(' || c == ')' ||
           c == '.' || c == ',' || c == ':' || c == '-';
  };
  while (!s.empty() && strip_char(s.front())) s.erase(s.begin());
  while (!s.empty() && strip_char(s.back())) s.pop_back();
  return util::trim(s);
}

}  // namespace

const std::array<Strategy, kStrategyCount>& all_strategies() noexcept { return kStrategies; }
std::string_view strategy_name(Strategy s) noexcept { return kStrategyNames[static_cast<std::size_t>(s)]; }
std::string_view strategy_description(Strategy s) noexcept {
  return kStrategyDescriptions[static_cast<std::size_t>(s)];
}

std::optional<Strategy> parse_strategy(std::string_view raw) {
  std::string s = strip_decorations(raw);
  for (std::size_t i = 0; i < kStrategyCount; ++i) {
    if (util::iequals(s, kStrategyNames[i])) return kStrategies[i];
  }
  if (util::iequals(s, "self disclosure") || util::iequals(s, "selfdisclosure")) return Strategy::SelfDisclosure;
  if (util::iequals(s, "suggestion")) return Strategy::Suggestions;
  if (util::iequals(s, "providing suggestions")) return Strategy::Suggestions;
  return std::nullopt;
}

std::string_view termination_name(TerminationReason r) noexcept {
  switch (r) {
    case TerminationReason::EndToken: return "end_token";
    case TerminationReason::Relieved: return "relieved";
    case TerminationReason::TurnCap: return "turn_cap";
    case TerminationReason::Ongoing: return "ongoing";
  }
  return "ongoing";
}

std::optional<TerminationReason> parse_termination(std::string_view s) noexcept {
  for (auto r : {TerminationReason::EndToken, TerminationReason::Relieved, TerminationReason::TurnCap,
                 TerminationReason::Ongoing}) {
    if (termination_name(r) == s) return r;
  }
  return std::nullopt;
}

const std::array<Emotion, kEmotionCount>& all_emotions() noexcept { return kEmotions; }
std::string_view emotion_name(Emotion e) noexcept { return kEmotionNames[static_cast<std::size_t>(e)]; }

std::optional<Emotion> parse_emotion(std::string_view raw) {
  std::string s = strip_decorations(raw);
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (util::iequals(s, kEmotionNames[i])) return kEmotions[i];
  }
  return std::nullopt;
}

const std::vector<ProblemCategory>& problem_categories() {
  static const std::vector<ProblemCategory> categories = {
      {"Romantic Relationship Challenges",
       {"Breakups or divorce", "Starting a romantic relationship", "Challenges in establishing a marriage",
        "Communication difficulties in relationships"}},
      {"Family Dynamics and Conflicts",
       {"Financial issues within the family", "Sibling rivalry or family disputes",
        "Challenges in parenthood and parenting", "Coping with loss or grief of a family member"}},
      {"Friendship and Interpersonal Challenges",
       {"Difficulty adapting to new social environments", "Challenges in maintaining friendships",
        "Conflicts with friends"}},
      {"Career and Work-Related Challenges",
       {"Work-related stress and burnout", "Job loss or career setbacks", "Adjusting to a new job or role",
        "Concerns about salary and bonuses", "Dissatisfaction with current job", "Stress related to unemployment",
        "Ongoing depression"}},
      {"Academic and Educational Stress",
       {"Dissatisfaction with current school or major", "Concerns about academic performance",
        "Stress related to studies", "Difficulty entering higher education", "Lack or excess of motivation to study"}},
      {"Self-Esteem, Identity, and Personal Growth",
       {"Issues with self-esteem and confidence", "Searching for meaning and purpose in life",
        "Cultural identity and sense of belonging", "Concerns about body image"}},
  };
  return categories;
}

const ProblemCategory* find_problem_category(std::string_view name) {
  for (const auto& c : problem_categories())
    if (c.name == name) return &c;
  return nullptr;
}

std::string_view role_name(Role r) noexcept { return r == Role::Seeker ? "seeker" : "supporter"; }

void validate_simulated_dialogue(const Dialogue& d, std::string_view situation) {
  if (d.turns.size() < 2) throw SchemaError(kModule, "turns", "simulated dialogue needs the opener and situation");
  if (d.turns[0].role != Role::Supporter || d.turns[0].text != kSupporterOpener)
    throw SchemaError(kModule, "turns[0]", "first turn must be the supporter greeting");
  if (d.turns[1].role != Role::Seeker || d.turns[1].text != situation)
    throw SchemaError(kModule, "turns[1]", "second turn must be the persona situation");
  for (std::size_t i = 1; i < d.turns.size(); ++i) {
    if (d.turns[i].role == d.turns[i - 1].role)
      throw SchemaError(kModule, "turns[" + std::to_string(i) + "].role", "roles must alternate");
  }
}

// ---------------------------------------------------------------------------
// Thread trees

bool is_deleted_text(std::string_view text) {
  std::string t = util::trim(text);
  return t.empty() || t == "[deleted]" || t == "[removed]";
}

void ThreadTree::index() {
  by_id_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id.empty()) throw SchemaError(kModule, "nodes[].id", "node id must be nonempty");
    if (!by_id_.emplace(nodes_[i].id, i).second)
      throw SchemaError(kModule, "nodes[].id", "duplicate node id '" + nodes_[i].id + "' in thread " + id_);
  }
}

ThreadTree ThreadTree::build(std::string id, std::vector<ThreadNode> nodes) {
  ThreadTree t;
  t.id_ = std::move(id);
  t.nodes_ = std::move(nodes);
  t.index();

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    auto& n = t.nodes_[i];
    n.children.clear();
    if (!n.parent) {
      roots.push_back(i);
    } else if (!t.by_id_.count(*n.parent)) {
      throw SchemaError(kModule, "nodes[].parent",
                        "node '" + n.id + "' references unknown parent '" + *n.parent + "'");
    }
  }
  if (roots.size() != 1)
    throw SchemaError(kModule, "nodes[].parent",
                      "thread " + t.id_ + " must have exactly one root, found " + std::to_string(roots.size()));
  t.root_ = roots.front();
  if (t.nodes_[t.root_].author_role != AuthorRole::Op)
    throw SchemaError(kModule, "nodes[].author_role", "thread " + t.id_ + " root must be an op post");

  for (auto& n : t.nodes_) {
    if (n.parent) t.nodes_[t.by_id_.at(*n.parent)].children.push_back(n.id);
  }

  // Reachability from the root rules out cycles (every node has one parent).
  std::vector<bool> seen(t.nodes_.size(), false);
  std::vector<std::size_t> stack{t.root_};
  std::size_t reached = 0;
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    if (seen[i]) throw SchemaError(kModule, "nodes[].parent", "cycle in thread " + t.id_);
    seen[i] = true;
    ++reached;
    for (const auto& c : t.nodes_[i].children) stack.push_back(t.by_id_.at(c));
  }
  if (reached != t.nodes_.size())
    throw SchemaError(kModule, "nodes[].parent", "thread " + t.id_ + " contains a cycle or detached nodes");

  // Deleted or empty nodes go with their subtrees.
  bool any_deleted = std::any_of(t.nodes_.begin(), t.nodes_.end(),
                                 [](const ThreadNode& n) { return is_deleted_text(n.text); });
  if (any_deleted) {
    std::size_t before = t.nodes_.size();
    ThreadTree kept = t.pruned([](const ThreadNode& n) { return !is_deleted_text(n.text); });
    kept.dropped_ = before - kept.nodes_.size();
    return kept;
  }
  return t;
}

const ThreadNode* ThreadTree::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &nodes_[it->second];
}

const ThreadNode& ThreadTree::node(std::string_view id) const {
  const ThreadNode* n = find(id);
  if (!n) throw InvalidArgument(kModule, "unknown node '" + std::string(id) + "' in thread " + id_);
  return *n;
}

std::vector<ThreadTree> assemble_pushshift(const std::vector<json>& submissions, const std::vector<json>& comments) {
  auto strip_prefix = [](std::string s) {
    if (s.size() > 3 && s[0] == 't' && s[2] == '_') s = s.substr(3);
    return s;
  };
  auto get_str = [](const json& j, const char* k) -> std::string {
    if (!j.contains(k) || j[k].is_null()) return {};
    if (j[k].is_string()) return j[k].get<std::string>();
    return j[k].dump();
  };
  struct Pending {
    std::string author;
    std::vector<ThreadNode> nodes;
  };
  std::map<std::string, Pending> by_post;
  std::vector<std::string> order;
  for (const auto& s : submissions) {
    std::string id = strip_prefix(get_str(s, "id"));
    if (id.empty()) throw SchemaError(kModule, "id", "submission without id");
    ThreadNode root;
    root.id = id;
    root.author_role = AuthorRole::Op;
    std::string title = get_str(s, "title");
    std::string body = get_str(s, "selftext");
    // A removed body marks the whole post as deleted even if the title survives.
    if (is_deleted_text(body) && !util::trim(body).empty()) {
      root.text = body;
    } else {
      root.text = title.empty() ? body : (util::trim(body).empty() ? title : title + "\n\n" + body);
    }
    root.score = s.value("score", 0LL);
    if (s.contains("upvote_ratio") && s["upvote_ratio"].is_number()) root.upvote_ratio = s["upvote_ratio"].get<double>();
    auto& p = by_post[id];
    if (p.nodes.empty()) order.push_back(id);
    p.author = get_str(s, "author");
    p.nodes.insert(p.nodes.begin(), std::move(root));
  }
  for (const auto& c : comments) {
    std::string link = strip_prefix(get_str(c, "link_id"));
    auto it = by_post.find(link);
    if (it == by_post.end()) continue;
    ThreadNode n;
    n.id = strip_prefix(get_str(c, "id"));
    n.text = get_str(c, "body");
    n.score = c.value("score", 0LL);
    std::string author = get_str(c, "author");
    n.author_role = (!author.empty() && author != "[deleted]" && author == it->second.author) ? AuthorRole::Op
                                                                                              : AuthorRole::Commenter;
    n.parent = strip_prefix(get_str(c, "parent_id"));
    it->second.nodes.push_back(std::move(n));
  }
  std::vector<ThreadTree> trees;
  for (const auto& id : order) {
    auto& p = by_post[id];
    // Comments whose parent never appeared in the dump cannot be placed.
    std::unordered_set<std::string> known;
    for (const auto& n : p.nodes) known.insert(n.id);
    std::vector<ThreadNode> placed;
    for (auto& n : p.nodes)
      if (!n.parent || known.count(*n.parent)) placed.push_back(std::move(n));
    if (is_deleted_text(placed.front().text)) continue;
    // Iterate until no orphan remains after removing unplaceable ones.
    bool changed = true;
    while (changed) {
      changed = false;
      std::unordered_set<std::string> ids;
      for (const auto& n : placed) ids.insert(n.id);
      std::vector<ThreadNode> next;
      for (auto& n : placed) {
        if (n.parent && !ids.count(*n.parent)) {
          changed = true;
          continue;
        }
        next.push_back(std::move(n));
      }
      placed = std::move(next);
    }
    trees.push_back(ThreadTree::build(id, std::move(placed)));
  }
  return trees;
}

void validate_persona(const Persona& p) {
  const ProblemCategory* cat = find_problem_category(p.problem_category);
  if (!cat) throw SchemaError(kModule, "problem_category", "unknown problem category '" + p.problem_category + "'");
  if (p.subcategory &&
      std::find(cat->subcategories.begin(), cat->subcategories.end(), *p.subcategory) == cat->subcategories.end())
    throw SchemaError(kModule, "subcategory", "'" + *p.subcategory + "' is not a subcategory of " + cat->name);
  if (util::trim(p.situation).empty()) throw SchemaError(kModule, "situation", "must be nonempty");
  if (p.alignment && (*p.alignment < 1 || *p.alignment > 5))
    throw SchemaError(kModule, "alignment", "must be in 1..5");
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace schema {

void expect(const json& j, std::string_view schema_id) {
  if (!j.is_object()) throw SchemaError(kModule, "<record>", "expected a JSON object");
  if (!j.contains("schema")) throw SchemaError(kModule, "schema", "missing");
  if (!j["schema"].is_string() || j["schema"].get<std::string>() != schema_id)
    throw SchemaError(kModule, "schema", "expected '" + std::string(schema_id) + "', got " + j["schema"].dump());
}

const json& require(const json& j, std::string_view field) {
  if (!j.is_object()) throw SchemaError(kModule, std::string(field), "parent is not an object");
  auto it = j.find(std::string(field));
  if (it == j.end() || it->is_null()) throw SchemaError(kModule, std::string(field), "missing");
  return *it;
}

std::string require_string(const json& j, std::string_view field, bool nonempty) {
  const json& v = require(j, field);
  if (!v.is_string()) throw SchemaError(kModule, std::string(field), "expected string");
  std::string s = v.get<std::string>();
  if (nonempty && util::trim(s).empty()) throw SchemaError(kModule, std::string(field), "must be nonempty");
  return s;
}

double require_number(const json& j, std::string_view field) {
  const json& v = require(j, field);
  if (!v.is_number()) throw SchemaError(kModule, std::string(field), "expected number");
  return v.get<double>();
}

long long require_integer(const json& j, std::string_view field) {
  const json& v = require(j, field);
  if (!v.is_number_integer()) throw SchemaError(kModule, std::string(field), "expected integer");
  return v.get<long long>();
}

bool require_bool(const json& j, std::string_view field) {
  const json& v = require(j, field);
  if (!v.is_boolean()) throw SchemaError(kModule, std::string(field), "expected boolean");
  return v.get<bool>();
}

std::optional<std::string> optional_string(const json& j, std::string_view field) {
  auto it = j.find(std::string(field));
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(kModule, std::string(field), "expected string");
  return it->get<std::string>();
}

}  // namespace schema

namespace {

// Prefixes nested schema errors with their parent path.
template <typename F>
auto nested(const std::string& prefix, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError& e) {
    throw SchemaError(e.module(), prefix + "." + e.field(), e.message());
  }
}

}  // namespace

json to_json(const ValueProbVector& v) { return json(v.data()); }
json to_json(const ValueSet& s) { return json(value_names(s)); }

ValueProbVector value_vector_from_json(const json& j, std::string_view field) {
  if (!j.is_array()) throw SchemaError(kModule, std::string(field), "expected array of 20 numbers");
  if (j.size() != kValueCount)
    throw SchemaError(kModule, std::string(field), "expected 20 entries, got " + std::to_string(j.size()));
  std::array<double, kValueCount> a{};
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (!j[i].is_number()) throw SchemaError(kModule, std::string(field), "entry " + std::to_string(i) + " not a number");
    a[i] = j[i].get<double>();
    if (!(a[i] >= 0.0 && a[i] <= 1.0))
      throw SchemaError(kModule, std::string(field), "entry " + std::to_string(i) + " outside [0,1]");
  }
  return ValueProbVector(a);
}

ValueSet value_set_from_json(const json& j, std::string_view field) {
  if (!j.is_array()) throw SchemaError(kModule, std::string(field), "expected array of value names");
  ValueSet s;
  for (const auto& e : j) {
    if (!e.is_string()) throw SchemaError(kModule, std::string(field), "expected value name string");
    auto v = parse_value(e.get<std::string>());
    if (!v) throw SchemaError(kModule, std::string(field), "unknown value '" + e.get<std::string>() + "'");
    if (s.contains(*v)) throw SchemaError(kModule, std::string(field), "duplicate value '" + e.get<std::string>() + "'");
    s.insert(*v);
  }
  return s;
}

json to_json(const TurnLabel& l) { return json{{"sentiment", l.sentiment}, {"values", to_json(l.values)}}; }

TurnLabel turn_label_from_json(const json& j) {
  TurnLabel l;
  l.sentiment = schema::require_number(j, "sentiment");
  if (!(l.sentiment >= 0.0 && l.sentiment <= 1.0)) throw SchemaError(kModule, "sentiment", "outside [0,1]");
  l.values = value_vector_from_json(schema::require(j, "values"));
  return l;
}

json to_json(const Utterance& u) {
  json j{{"role", role_name(u.role)}, {"text", u.text}};
  if (u.strategy) j["strategy"] = strategy_name(*u.strategy);
  if (u.label) j["label"] = to_json(*u.label);
  return j;
}

Utterance utterance_from_json(const json& j) {
  Utterance u;
  std::string role = schema::require_string(j, "role");
  if (role == "seeker") {
    u.role = Role::Seeker;
  } else if (role == "supporter") {
    u.role = Role::Supporter;
  } else {
    throw SchemaError(kModule, "role", "expected 'seeker' or 'supporter', got '" + role + "'");
  }
  u.text = schema::require_string(j, "text", true);
  if (auto s = schema::optional_string(j, "strategy")) {
    u.strategy = parse_strategy(*s);
    if (!u.strategy) throw SchemaError(kModule, "strategy", "unknown strategy '" + *s + "'");
  }
  if (j.contains("label") && !j["label"].is_null())
    u.label = nested("label", [&] { return turn_label_from_json(j["label"]); });
  return u;
}

json to_json(const Dialogue& d) {
  json turns = json::array();
  for (const auto& u : d.turns) turns.push_back(to_json(u));
  json j{{"schema", schema::kDialogue}, {"id", d.id}, {"turns", std::move(turns)}};
  if (d.persona_ref) j["persona_ref"] = *d.persona_ref;
  if (d.termination) j["termination"] = termination_name(*d.termination);
  if (d.initial_intensity) j["initial_intensity"] = *d.initial_intensity;
  if (d.final_intensity) j["final_intensity"] = *d.final_intensity;
  return j;
}

Dialogue dialogue_from_json(const json& j) {
  schema::expect(j, schema::kDialogue);
  Dialogue d;
  d.id = schema::require_string(j, "id", true);
  d.persona_ref = schema::optional_string(j, "persona_ref");
  const json& turns = schema::require(j, "turns");
  if (!turns.is_array()) throw SchemaError(kModule, "turns", "expected array");
  for (std::size_t i = 0; i < turns.size(); ++i)
    d.turns.push_back(nested("turns[" + std::to_string(i) + "]", [&] { return utterance_from_json(turns[i]); }));
  if (auto t = schema::optional_string(j, "termination")) {
    d.termination = parse_termination(*t);
    if (!d.termination) throw SchemaError(kModule, "termination", "unknown termination '" + *t + "'");
  }
  for (const char* f : {"initial_intensity", "final_intensity"}) {
    if (j.contains(f) && !j[f].is_null()) {
      long long v = schema::require_integer(j, f);
      if (v < 1 || v > 5) throw SchemaError(kModule, f, "must be in 1..5");
      (std::string_view(f) == "initial_intensity" ? d.initial_intensity : d.final_intensity) = static_cast<int>(v);
    }
  }
  return d;
}

json to_json(const ThreadTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes()) {
    json jn{{"id", n.id},
            {"author_role", n.author_role == AuthorRole::Op ? "op" : "commenter"},
            {"text", n.text},
            {"score", n.score}};
    if (n.upvote_ratio) jn["upvote_ratio"] = *n.upvote_ratio;
    if (n.parent) jn["parent"] = *n.parent;
    nodes.push_back(std::move(jn));
  }
  return json{{"schema", schema::kThread}, {"id", t.id()}, {"nodes", std::move(nodes)}};
}

ThreadTree thread_from_json(const json& j) {
  schema::expect(j, schema::kThread);
  std::string id = schema::require_string(j, "id", true);
  const json& nodes = schema::require(j, "nodes");
  if (!nodes.is_array() || nodes.empty()) throw SchemaError(kModule, "nodes", "expected nonempty array");
  std::vector<ThreadNode> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out.push_back(nested("nodes[" + std::to_string(i) + "]", [&] {
      const json& jn = nodes[i];
      ThreadNode n;
      n.id = schema::require_string(jn, "id", true);
      std::string role = schema::require_string(jn, "author_role");
      if (role == "op") {
        n.author_role = AuthorRole::Op;
      } else if (role == "commenter") {
        n.author_role = AuthorRole::Commenter;
      } else {
        throw SchemaError(kModule, "author_role", "expected 'op' or 'commenter'");
      }
      n.text = schema::require_string(jn, "text");
      n.score = schema::require_integer(jn, "score");
      if (jn.contains("upvote_ratio") && !jn["upvote_ratio"].is_null()) {
        double r = schema::require_number(jn, "upvote_ratio");
        if (!(r >= 0.0 && r <= 1.0)) throw SchemaError(kModule, "upvote_ratio", "outside [0,1]");
        n.upvote_ratio = r;
      }
      n.parent = schema::optional_string(jn, "parent");
      return n;
    }));
  }
  return ThreadTree::build(std::move(id), std::move(out));
}

json to_json(const Persona& p) {
  json j{{"schema", schema::kPersona},
         {"id", p.id},
         {"problem_category", p.problem_category},
         {"emotion", emotion_name(p.emotion)},
         {"situation", p.situation},
         {"demographics",
          {{"age_range", p.demographics.age_range},
           {"gender", p.demographics.gender},
           {"occupation", p.demographics.occupation}}}};
  if (p.subcategory) j["subcategory"] = *p.subcategory;
  if (p.source_value) j["source_value"] = value_name(*p.source_value);
  if (p.alignment) j["alignment"] = *p.alignment;
  if (p.split) j["split"] = *p.split;
  return j;
}

Persona persona_from_json(const json& j) {
  schema::expect(j, schema::kPersona);
  Persona p;
  p.id = schema::require_string(j, "id", true);
  p.problem_category = schema::require_string(j, "problem_category", true);
  p.subcategory = schema::optional_string(j, "subcategory");
  std::string emotion = schema::require_string(j, "emotion");
  auto e = parse_emotion(emotion);
  if (!e) throw SchemaError(kModule, "emotion", "unknown emotion '" + emotion + "'");
  p.emotion = *e;
  p.situation = schema::require_string(j, "situation", true);
  const json& demo = schema::require(j, "demographics");
  p.demographics = nested("demographics", [&] {
    return Demographics{schema::require_string(demo, "age_range"), schema::require_string(demo, "gender"),
                        schema::require_string(demo, "occupation")};
  });
  if (auto v = schema::optional_string(j, "source_value")) {
    p.source_value = parse_value(*v);
    if (!p.source_value) throw SchemaError(kModule, "source_value", "unknown value '" + *v + "'");
  }
  if (j.contains("alignment") && !j["alignment"].is_null())
    p.alignment = static_cast<int>(schema::require_integer(j, "alignment"));
  p.split = schema::optional_string(j, "split");
  validate_persona(p);
  return p;
}

}  // namespace esvr
