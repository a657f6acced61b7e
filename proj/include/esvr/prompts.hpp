#pragma once

// Prompt templates for every model role. The synthetic backend recognizes a
// role by the system prompt each builder emits, so the texts double as markers.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "esvr/corpus.hpp"
#include "esvr/gateway.hpp"
#include "esvr/value_core.hpp"

namespace esvr::prompts {

inline constexpr std::string_view kTvdSystem =
    "Select and return up to 3 values to reinforce in the patient for effective emotional support.";
inline constexpr std::string_view kTherapistSystem =
    "You will take on the role of a therapist to help a patient with emotional difficulties, aiming to reduce "
    "their distress and support them in overcoming their challenges.";
inline constexpr std::string_view kSeekerSystemPrefix =
    "In the following conversations, you will play the role of a patient seeking help from a therapist due to "
    "emotional difficulties.";
inline constexpr std::string_view kSituationSystem =
    "Generate appropriate situations that require emotional support, using the given topic and value information.";
inline constexpr std::string_view kAlignmentSystem = "Evaluate how much each situation aligns with the given value.";
inline constexpr std::string_view kEmotionLabelSystem =
    "Classify the negative emotion felt by the person describing the situation.";
inline constexpr std::string_view kDemographicsSystem =
    "Create plausible demographic information for the person describing the situation.";
inline constexpr std::string_view kSkillsSystem =
    "Rate the therapist in the emotional support conversation on each of the given criteria.";
inline constexpr std::string_view kIntensitySystem =
    "Given a conversation between a supporter and a seeker, please assess the final emotions of the seeker after "
    "the conversation.";
inline constexpr std::string_view kEsValueSystem =
    "Evaluate the emotional support conversation based on the given criteria.";
inline constexpr std::string_view kEmotionJudgeSystem =
    "Given a conversation between a Therapist and a Patient, please assess whether the Patient’ emotional issue has "
    "been solved after the conversation.";

// Opening line of the user message that requests a flipped Step 3 decision.
inline constexpr std::string_view kAlternativeMarker = "Reverse your decision regarding the use of the reference";

// Table-listing order maps to intensities 1..5.
const std::array<std::string_view, 5>& intensity_sentences();

// Replies of the emotion judge, in score order worse, same, better, solved.
const std::array<std::string_view, 4>& emotion_judge_sentences();

struct SkillCriterion {
  std::string_view name;
  std::string_view definition;
};
const std::array<SkillCriterion, 10>& skill_criteria();

// "Therapist: ..." / "Patient: ..." lines.
std::string render_history(const std::vector<Utterance>& turns);
std::string value_list();
// Definition and contained values of each target.
std::string target_value_info(const ValueSet& targets, const ValueCatalog& catalog);
std::string value_info(ValueId v, const ValueCatalog& catalog);

std::vector<ChatMessage> tvd(const std::vector<Utterance>& history);
std::vector<ChatMessage> rg(const std::vector<Utterance>& history, const ValueSet& targets,
                            const ValueCatalog& catalog);
std::vector<ChatMessage> supporter(const std::vector<Utterance>& history, const ValueSet& targets,
                                   const std::string& reference, const ValueCatalog& catalog);
// Extends the supporter conversation with the prior reply and a request to
// flip the Step 3 decision and rewrite Steps 3 and 4.
std::vector<ChatMessage> alternative(const std::vector<ChatMessage>& original, const std::string& prior_reply,
                                     bool prior_use_reference);
// System prompt, then supporter turns as user and seeker turns as assistant.
std::vector<ChatMessage> seeker(const Persona& persona, const std::string& example_dialogue,
                                const std::vector<Utterance>& turns);

std::vector<ChatMessage> situations(const ProblemCategory& category, ValueId value, const ValueCatalog& catalog);
std::vector<ChatMessage> alignment(const std::string& situation, ValueId value, const ValueCatalog& catalog);
std::vector<ChatMessage> emotion_label(const std::string& situation);
std::vector<ChatMessage> demographics(const std::string& problem_category, const std::string& situation);

std::vector<ChatMessage> skills(const std::vector<Utterance>& dialogue);
std::vector<ChatMessage> intensity(const std::vector<Utterance>& dialogue);
std::vector<ChatMessage> es_value(const std::vector<Utterance>& dialogue_a, const std::vector<Utterance>& dialogue_b,
                                  const ValueCatalog& catalog);
std::vector<ChatMessage> emotion_judge(Emotion emotion, const std::string& problem_category,
                                       const std::vector<Utterance>& dialogue);

}  // namespace esvr::prompts
