#pragma once

// Dialogues, threads, personas and labeled turns, plus their JSON forms.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "esvr/value_core.hpp"

namespace esvr {

using json = nlohmann::json;

enum class Role { Seeker, Supporter };

// The eight emotional support strategies.
enum class Strategy {
  Question,
  Restatement,
  Reflection,
  SelfDisclosure,
  Affirmation,
  Suggestions,
  Information,
  Others,
};
inline constexpr std::size_t kStrategyCount = 8;
const std::array<Strategy, kStrategyCount>& all_strategies() noexcept;
std::string_view strategy_name(Strategy s) noexcept;
std::string_view strategy_description(Strategy s) noexcept;
// Case-insensitive; tolerates surrounding quotes/brackets and a trailing period.
std::optional<Strategy> parse_strategy(std::string_view raw);

enum class TerminationReason { EndToken, Relieved, TurnCap, Ongoing };
std::string_view termination_name(TerminationReason r) noexcept;
std::optional<TerminationReason> parse_termination(std::string_view s) noexcept;

// The ten negative emotions used for persona labeling, in fixed list order.
enum class Emotion { Frustration, Anxiety, Sadness, Fear, Guilt, Shame, Anger, Depression, Jealousy, Disgust };
inline constexpr std::size_t kEmotionCount = 10;
const std::array<Emotion, kEmotionCount>& all_emotions() noexcept;
std::string_view emotion_name(Emotion e) noexcept;
std::optional<Emotion> parse_emotion(std::string_view raw);

struct ProblemCategory {
  std::string name;
  std::vector<std::string> subcategories;
};
// Six problem categories with their 27 subcategories.
const std::vector<ProblemCategory>& problem_categories();
const ProblemCategory* find_problem_category(std::string_view name);

struct TurnLabel {
  double sentiment = 0.0;  // [0, 1], 0 most negative
  ValueProbVector values;
  bool operator==(const TurnLabel&) const = default;
};

struct Utterance {
  Role role = Role::Seeker;
  std::string text;
  std::optional<Strategy> strategy;
  std::optional<TurnLabel> label;
  bool operator==(const Utterance&) const = default;
};

// A plain dialogue. Intensities are only present for rated corpora (1..5).
struct Dialogue {
  std::string id;
  std::optional<std::string> persona_ref;
  std::vector<Utterance> turns;
  std::optional<TerminationReason> termination;
  std::optional<int> initial_intensity;
  std::optional<int> final_intensity;
  bool operator==(const Dialogue&) const = default;
};

inline constexpr std::string_view kSupporterOpener =
    "Hello, I'm here to listen. What would you like to talk about today?";

// Checks the simulated-dialogue shape: opener greeting, then the persona
// situation, then strict alternation. Throws SchemaError.
void validate_simulated_dialogue(const Dialogue& d, std::string_view situation);

enum class AuthorRole { Op, Commenter };

struct ThreadNode {
  std::string id;
  AuthorRole author_role = AuthorRole::Commenter;
  std::string text;
  long long score = 0;
  std::optional<double> upvote_ratio;
  std::optional<std::string> parent;
  std::vector<std::string> children;  // derived from parent links, in input order
  bool operator==(const ThreadNode&) const = default;
};

// A post with its comment tree. Nodes keep input order; the root is an op post.
class ThreadTree {
 public:
  ThreadTree() = default;
  // Links children, drops deleted/empty nodes together with their subtrees and
  // validates the result (single op root, known parents, no cycles).
  static ThreadTree build(std::string id, std::vector<ThreadNode> nodes);

  const std::string& id() const noexcept { return id_; }
  const std::vector<ThreadNode>& nodes() const noexcept { return nodes_; }
  const ThreadNode& root() const { return nodes_.at(root_); }
  const ThreadNode& node(std::string_view id) const;
  const ThreadNode* find(std::string_view id) const;
  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t dropped() const noexcept { return dropped_; }

  // Removes every node failing `keep` together with its subtree. If the root
  // fails the tree becomes empty.
  template <typename Pred>
  ThreadTree pruned(Pred keep) const {
    std::vector<ThreadNode> kept;
    if (!nodes_.empty()) collect(nodes_[root_], keep, kept);
    ThreadTree t = kept.empty() ? ThreadTree{} : build(id_, std::move(kept));
    t.id_ = id_;
    return t;
  }

  bool operator==(const ThreadTree& o) const { return id_ == o.id_ && nodes_ == o.nodes_; }

 private:
  template <typename Pred>
  void collect(const ThreadNode& n, Pred& keep, std::vector<ThreadNode>& out) const {
    if (!keep(n)) return;
    ThreadNode copy = n;
    copy.children.clear();
    out.push_back(std::move(copy));
    for (const auto& c : n.children) collect(node(c), keep, out);
  }
  void index();

  std::string id_;
  std::vector<ThreadNode> nodes_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t root_ = 0;
  std::size_t dropped_ = 0;
};

// True for Reddit's placeholder bodies of deleted/removed content, or blank text.
bool is_deleted_text(std::string_view text);

// Assembles thread trees from Pushshift-style submission and comment records
// (fields: id, author, selftext/title | body, score, upvote_ratio, parent_id,
// link_id). Comments by the submission author become op turns.
std::vector<ThreadTree> assemble_pushshift(const std::vector<json>& submissions, const std::vector<json>& comments);

struct Demographics {
  std::string age_range;
  std::string gender;
  std::string occupation;
  bool operator==(const Demographics&) const = default;
};

struct Persona {
  std::string id;
  std::string problem_category;
  std::optional<std::string> subcategory;
  Emotion emotion = Emotion::Frustration;
  std::string situation;
  Demographics demographics;
  std::optional<ValueId> source_value;
  std::optional<int> alignment;
  std::optional<std::string> split;
  bool operator==(const Persona&) const = default;
};
void validate_persona(const Persona& p);

// JSON conversion. from_json throws SchemaError naming the offending field.
json to_json(const TurnLabel& l);
json to_json(const Utterance& u);
json to_json(const Dialogue& d);
json to_json(const ThreadTree& t);
json to_json(const Persona& p);
json to_json(const ValueProbVector& v);
json to_json(const ValueSet& s);

TurnLabel turn_label_from_json(const json& j);
Utterance utterance_from_json(const json& j);
Dialogue dialogue_from_json(const json& j);
ThreadTree thread_from_json(const json& j);
Persona persona_from_json(const json& j);
ValueProbVector value_vector_from_json(const json& j, std::string_view field = "values");
ValueSet value_set_from_json(const json& j, std::string_view field = "targets");

std::string_view role_name(Role r) noexcept;

// Helpers shared by the record readers of every module.
namespace schema {
inline constexpr std::string_view kThread = "esvr.thread/1";
inline constexpr std::string_view kDialogue = "esvr.dialogue/1";
inline constexpr std::string_view kLabeledPath = "esvr.labeled_path/1";
inline constexpr std::string_view kTvd = "esvr.tvd/1";
inline constexpr std::string_view kRgSft = "esvr.rg_sft/1";
inline constexpr std::string_view kRgDpo = "esvr.rg_dpo/1";
inline constexpr std::string_view kPersona = "esvr.persona/1";
inline constexpr std::string_view kTranscript = "esvr.transcript/1";
inline constexpr std::string_view kPreferencePair = "esvr.preference_pair/1";
inline constexpr std::string_view kEvalReport = "esvr.eval_report/1";
inline constexpr std::string_view kManifest = "esvr.manifest/1";

void expect(const json& j, std::string_view schema_id);
const json& require(const json& j, std::string_view field);
std::string require_string(const json& j, std::string_view field, bool nonempty = false);
double require_number(const json& j, std::string_view field);
long long require_integer(const json& j, std::string_view field);
bool require_bool(const json& j, std::string_view field);
std::optional<std::string> optional_string(const json& j, std::string_view field);
}  // namespace schema

}  // namespace esvr
