#pragma once

// Supporter <-> seeker dialogue simulation with reference-usage branching.

#include <optional>
#include <string>
#include <vector>

#include "esvr/corpus.hpp"
#include "esvr/error.hpp"
#include "esvr/gateway.hpp"
#include "esvr/value_core.hpp"

namespace esvr {

struct SupporterOutput {
  std::string step1;
  std::string step2;
  std::string step3;
  bool use_reference = false;
  Strategy strategy = Strategy::Others;
  std::string response;
  bool operator==(const SupporterOutput&) const = default;
};

// Parses the four-step template. With `steps_3_4_only` Steps 1 and 2 are not
// required. Missing sections raise ParseError naming the step; an unknown
// strategy raises ParseError whose raw() is the strategy string.
SupporterOutput parse_supporter_output(const std::string& text, bool steps_3_4_only = false);

// The model kept its Step 3 decision after the retry.
class FlipFailure : public Error {
 public:
  using Error::Error;
};

// Regenerates Steps 3-4 with the reference decision reversed. Steps 1-2 come
// from `prior`. One retry, then FlipFailure.
SupporterOutput alternative_turn(const std::vector<ChatMessage>& supporter_messages, const std::string& prior_raw,
                                 const SupporterOutput& prior, Gateway& gw);

// Comma/newline separated value names, lenient matching, at most 3 distinct.
std::vector<ValueId> parse_target_values(const std::string& reply);

struct TerminationRules {
  double relief_threshold = 0.6;
  std::vector<std::string> gratitude = {"thank you", "thanks", "thankful", "grateful", "appreciate"};
};

bool is_end_token(const std::string& reply);
// Removes "[END]" tokens; the remainder is what sentiment is scored on.
std::string strip_end_token(const std::string& reply);
bool has_gratitude(const std::string& reply, const TerminationRules& rules);

// EndToken > Relieved > TurnCap > Ongoing. `turn_count` counts completed
// supporter/seeker exchanges.
TerminationReason check_termination(const std::string& reply, std::optional<double> sentiment, int turn_count,
                                    int turn_cap, const TerminationRules& rules = {});

struct TurnRecord {
  int index = 0;
  std::vector<ValueId> targets;  // ranked as returned by the detector
  std::string reference;
  SupporterOutput primary;
  std::optional<SupporterOutput> alternative;
  std::optional<std::string> flip_failure;
  Utterance seeker_reply;  // labeled unless it is a bare [END]
  // Continuation after the alternative response: seeker, supporter, seeker, ...
  std::vector<Utterance> alternative_rollout;
  bool operator==(const TurnRecord&) const = default;
};

struct Transcript {
  std::string id;
  Persona persona;
  std::vector<Utterance> opening;  // supporter greeting, persona situation
  std::vector<TurnRecord> turns;
  TerminationReason termination = TerminationReason::Ongoing;
  bool complete = true;
  std::optional<std::string> error;
  bool operator==(const Transcript&) const = default;

  int turn_count() const noexcept { return static_cast<int>(turns.size()); }
  // Opening plus primary responses and seeker replies.
  Dialogue dialogue() const;
  // Dialogue up to and including supporter turn t (exclusive of its seeker reply).
  std::vector<Utterance> history_before(int t) const;
};

struct SimulationParams {
  int turn_cap = 20;
  bool with_alternatives = true;
  std::optional<int> rollout_horizon = 3;  // nullopt: until termination or cap
  std::string example_dialogue;
  TerminationRules rules;
};

// Runs one dialogue. Backend or parse failures end it early with
// complete = false and the error recorded.
Transcript run_dialogue(const Persona& persona, const SimulationParams& params, Gateway& gw,
                        const ValueCatalog& catalog = ValueCatalog::builtin());
std::vector<Transcript> run_dialogues(const std::vector<Persona>& personas, const SimulationParams& params,
                                      Gateway& gw, int jobs, const ValueCatalog& catalog = ValueCatalog::builtin());

json to_json(const SupporterOutput& s);
SupporterOutput supporter_output_from_json(const json& j);
json to_json(const Transcript& t);
Transcript transcript_from_json(const json& j);

}  // namespace esvr
