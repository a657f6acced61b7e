#include "esvr/prompts.hpp"

#include "esvr/util.hpp"

namespace esvr::prompts {

const std::array<std::string_view, 5>& intensity_sentences() {
  static const std::array<std::string_view, 5> s = {
      "very low amount of negative emotions can be inferred",
      "low amount of negative emotions can be inferred",
      "moderate amount of negative emotions can be inferred",
      "high amount of negative emotions can be inferred",
      "extreme amount of negative emotions can be inferred",
  };
  return s;
}

const std::array<std::string_view, 4>& emotion_judge_sentences() {
  static const std::array<std::string_view, 4> s = {
      "No, the Patient feels worse.",
      "No, the Patient feels the same.",
      "No, but the Patient feels better.",
      "Yes, the Patient’s issue has been solved.",
  };
  return s;
}

const std::array<SkillCriterion, 10>& skill_criteria() {
  static const std::array<SkillCriterion, 10> c = {{
      {"Identification",
       "How effectively does the therapist explore the patient’s situation to identify underlying issues?"},
      {"Comforting",
       "How well does the therapist demonstrate appropriate emotional responses, such as warmth, empathy, and "
       "compassion?"},
      {"Suggestions", "How useful and relevant are the therapist’s suggestions for addressing the patient’s problems?"},
      {"Experience",
       "How well does the therapist draw on their own relevant experiences to connect with the user’s situation?"},
      {"Informativeness",
       "How specific and informative are the therapist’s responses in addressing the patient’s situation?"},
      {"Consistency", "How logically structured and contextually appropriate are the therapist’s responses?"},
      {"Role-adherence",
       "How consistently does the therapist adhere to their role, maintaining a non-contradictory and reliable "
       "approach?"},
      {"Expression",
       "How diverse are the therapist’s conversational expressions, including the variety and creativity in "
       "language and content used?"},
      {"Humanness", "How human-like and natural do the therapist’s responses sound?"},
      {"Overall", "How well does the therapist provide overall emotional support to the patient?"},
  }};
  return c;
}

std::string render_history(const std::vector<Utterance>& turns) {
  std::string out;
  for (const auto& u : turns) {
    if (!out.empty()) out += "\n";
    out += u.role == Role::Supporter ? "Therapist: " : "Patient: ";
    out += u.text;
  }
  return out;
}

std::string value_list() {
  std::vector<std::string> names;
  for (auto v : all_values()) names.emplace_back(value_name(v));
  return util::join(names, ", ");
}

std::string value_info(ValueId v, const ValueCatalog& catalog) {
  const ValueInfo& info = catalog.info(v);
  return std::string(value_name(v)) + "\n- Definition: " + info.definition +
         "\n- Contained values: " + util::join(info.contained_values, ", ");
}

std::string target_value_info(const ValueSet& targets, const ValueCatalog& catalog) {
  std::vector<std::string> parts;
  for (auto v : targets.to_vector()) parts.push_back(value_info(v, catalog));
  return util::join(parts, "\n");
}

namespace {

ChatMessage sys(std::string_view s) { return {"system", std::string(s)}; }
ChatMessage user(std::string s) { return {"user", std::move(s)}; }

std::string strategy_definitions() {
  std::string out;
  for (auto s : all_strategies()) {
    out += "\n- ";
    out += strategy_name(s);
    out += ": ";
    out += strategy_description(s);
  }
  return out;
}

}  // namespace

std::vector<ChatMessage> tvd(const std::vector<Utterance>& history) {
  return {sys(kTvdSystem),
          user("Human values: " + value_list() +
               "\n\nThe dialogue history below is a conversation between a patient experiencing emotional "
               "difficulties and a therapist providing support. For effective emotional support, which values "
               "should be reinforced in the patient so that they are expressed more frequently in the future? "
               "Select up to 3 values from the list provided above. Answer in the format 'value1, value2, value3' "
               "separated by commas without any additional explanation.\n\nDialogue history:\n" +
               render_history(history))};
}

std::vector<ChatMessage> rg(const std::vector<Utterance>& history, const ValueSet& targets,
                            const ValueCatalog& catalog) {
  return {sys(kTherapistSystem),
          user("1. Dialogue history:\n" + render_history(history) + "\n\n2. Target values:\n" +
               target_value_info(targets, catalog) +
               "\n\nAs a therapist supporting a patient with emotional difficulties, your goal is to reduce their "
               "distress and guide them through challenges. The target values are those that are expected to be "
               "more frequently expressed by the patient. Generate the next turn of the utterance based on the "
               "dialogue history, aiming to reinforce these target values in the patient.")};
}

std::vector<ChatMessage> supporter(const std::vector<Utterance>& history, const ValueSet& targets,
                                   const std::string& reference, const ValueCatalog& catalog) {
  std::string u = "1. Strategies for emotional support:" + strategy_definitions() + "\n2. Dialogue history:\n" +
                  render_history(history) + "\n3. Target values:\n" + target_value_info(targets, catalog) +
                  "\n4. Reference response: " + reference +
                  "\n\nAs a therapist supporting a patient with emotional difficulties, your goal is to reduce their "
                  "distress and guide them through challenges. The target values are those that are expected to be "
                  "more frequently expressed by the patient. You need to generate the therapist's next utterance "
                  "based on the dialogue history, aiming to reinforce these target values in the patient.\n\n"
                  "The therapist’s next utterance should follow these guidelines:\n"
                  "- Use only one sentence without any extra explanation, framing, introductory phrases, or "
                  "meta-commentary\n"
                  "- Avoid directly mentioning the target values, but focus on reinforcing them through your "
                  "guidance.\n"
                  "- If the patient shows signs of improvement in the dialogue history, acknowledge their progress "
                  "and guide the conversation to an efficient close.\n"
                  "- Do not repeat similar messages from previous therapist utterances in the dialogue history.\n\n"
                  "The reference response is a therapist's reply given to another patient in a similar situation, "
                  "which you can use as a reference for generating your next response. Before generating the "
                  "therapist’s response to satisfy the above conditions, thoroughly analyze the following:\n"
                  "Step 1. Understanding the patient's issues and current state\n"
                  "- What is the patient's issue?\n"
                  "- Have their situation and the causes of their emotions been sufficiently explored? If not, what "
                  "additional information should be obtained to deeply understand them?\n"
                  "- What is the patient's current emotional state? How have the patient's emotions or thoughts "
                  "changed through the conversation?\n\n"
                  "Step 2. Identifying the key points of the reference response\n"
                  "- What is the main message in the referenced response (item 4)?\n\n"
                  "Step 3. Determination of reference response usage\n"
                  "- Would using a reference response be helpful for generating the next therapist utterance? Why "
                  "or why not?\n"
                  "- If a reference response is used, how would it be applied, and if it is not used, what "
                  "alternative message would be provided?\n\n"
                  "Step 4. Therapist's next strategy and response\n"
                  "- Based on the above (Step 1-Step3), what emotional support strategy should be used, and what "
                  "message should you convey to the patient in the next response?\n\n"
                  "You should respond in the following template format:\n"
                  "Step 1. Understanding the patient's issues and current state\n"
                  "-Reasoning: (the result of your analysis)\n"
                  "Step 2. Identifying the key points of the reference response\n"
                  "-Reasoning: (the result of your analysis)\n"
                  "Step 3. Determination of reference response usage\n"
                  "-Reasoning: (The result of your analysis, starting with whether to use the reference response "
                  "--- 'Yes' or 'No')\n"
                  "Step 4. Therapist's next strategy and response\n"
                  "-Strategy: (choose one emotional support strategy for the next turn based on the reasoning)\n"
                  "-Response: (only the therapist’s next utterance without any explanation)";
  return {sys(kTherapistSystem), user(std::move(u))};
}

std::vector<ChatMessage> alternative(const std::vector<ChatMessage>& original, const std::string& prior_reply,
                                     bool prior_use_reference) {
  std::vector<ChatMessage> msgs = original;
  msgs.push_back({"assistant", prior_reply});
  std::string flipped = prior_use_reference ? "No" : "Yes";
  msgs.push_back(user(std::string(kAlternativeMarker) + " response from your previous answer. Step 3 must now " +
                      "start with '" + flipped + "'. Regenerate only Step 3 and Step 4 in the same template "
                      "format.\nStep 3. Determination of reference response usage\n-Reasoning: (starting with '" +
                      flipped + "')\nStep 4. Therapist's next strategy and response\n-Strategy: (one emotional "
                      "support strategy)\n-Response: (only the therapist’s next utterance)"));
  return msgs;
}

std::vector<ChatMessage> seeker(const Persona& persona, const std::string& example_dialogue,
                                const std::vector<Utterance>& turns) {
  std::string s = std::string(kSeekerSystemPrefix) + " Your emotional distress stems from " +
                  persona.problem_category + " and the emotion you're feeling is " +
                  util::to_lower(emotion_name(persona.emotion)) +
                  ". Your detailed personal information is as follows:\nAge Range: " + persona.demographics.age_range +
                  "\nGender: " + persona.demographics.gender + "\nOccupation: " + persona.demographics.occupation +
                  "\n\nHere is an example of a conversation you can refer to:\n" + example_dialogue +
                  "\n\nWhen responding, use only one sentence each time. Incorporate your personal information (age "
                  "range, gender, and occupation) when it seems relevant, but it is not required in every response. "
                  "If you feel that you have received enough emotional support and your mood has improved, end the "
                  "conversation by expressing gratitude. Then, if you think it’s appropriate to conclude the "
                  "session, generate `[END]' to signify the end of the conversation. You should generate only "
                  "`[END]' without saying anything else. Do not end the conversation if you still feel upset or "
                  "unsettled.";
  std::vector<ChatMessage> msgs{sys(s)};
  for (const auto& u : turns) msgs.push_back({u.role == Role::Supporter ? "user" : "assistant", u.text});
  return msgs;
}

std::vector<ChatMessage> situations(const ProblemCategory& category, ValueId value, const ValueCatalog& catalog) {
  std::string topic = category.name;
  for (const auto& sub : category.subcategories) topic += "\n- " + sub;
  return {sys(kSituationSystem),
          user("1. Emotional support topic: " + topic + "\n\n2. Supported value: " + value_info(value, catalog) +
               "\n\nDefine specific situations that individuals who prioritize the given human value (item 2) might "
               "face related to the presented emotional support topic (item 1). Generate a minimum of 10 and a "
               "maximum of 30 diverse and non-overlapping situations. Write from the perspective of an individual "
               "in need of emotional support, including 'I' as the subject, and be as specific as possible. Each "
               "situation should be one sentence (e.g., I just moved in this week, and it's so hard to make "
               "friends.) Do not provide any additional explanations and separate each situation with a newline "
               "character ('\\n').")};
}

std::vector<ChatMessage> alignment(const std::string& situation, ValueId value, const ValueCatalog& catalog) {
  return {sys(kAlignmentSystem),
          user("1. Situations: " + situation + "\n\n2. Supported value: " + value_info(value, catalog) +
               "\n\nRate the alignment of each situation with the given value on a scale of 1-5, using the "
               "criteria below to guide your assessment:\n"
               "- 1: The situation does not reflect any connection to the given value. The individual's concerns or "
               "actions are entirely unrelated to the principles of this value.\n"
               "- 2: The situation has a minimal or indirect connection to the value. It suggests the presence of "
               "the value but lacks a clear emphasis or relevance.\n"
               "- 3: The situation shows some aspects of the value but not as a central theme. The value is "
               "present, but other priorities seem equally important.\n"
               "- 4: The situation directly relates to the principles of the value, showing clear prioritization. "
               "The value significantly shapes the individual’s thoughts or actions.\n"
               "- 5: The situation is driven almost entirely by the given value. The value is a central, explicit "
               "factor in shaping the individual’s perspective and decisions.\n\n"
               "For each situation, provide a brief reasoning for your rating based on these criteria, and then "
               "assign the numerical rating. Provide your response in the following format:\n"
               "situation: (Rewrite each situation)\n- Reasoning: (Your explanation here)\n- Rating: (1-5)")};
}

std::vector<ChatMessage> emotion_label(const std::string& situation) {
  std::vector<std::string> names;
  for (auto e : all_emotions()) names.emplace_back(emotion_name(e));
  return {sys(kEmotionLabelSystem), user("Situation: " + situation + "\n\nChoose exactly one emotion from: " +
                                         util::join(names, ", ") + ". Answer with the emotion name only.")};
}

std::vector<ChatMessage> demographics(const std::string& problem_category, const std::string& situation) {
  return {sys(kDemographicsSystem),
          user("Problem category: " + problem_category + "\nSituation: " + situation +
               "\n\nAnswer in exactly this format without any other text:\nAge: (age range, e.g. 20s)\nGender: "
               "(gender)\nOccupation: (occupation)")};
}

std::vector<ChatMessage> skills(const std::vector<Utterance>& dialogue) {
  std::string crit;
  for (const auto& c : skill_criteria()) {
    crit += "- ";
    crit += c.name;
    crit += ": ";
    crit += c.definition;
    crit += "\n";
  }
  return {sys(kSkillsSystem),
          user("Criteria:\n" + crit + "\nConversation:\n" + render_history(dialogue) +
               "\n\nRate each criterion on a scale of 1 to 5. Reply with one line per criterion in the form "
               "'Criterion: score', using the criterion names exactly as listed.")};
}

std::vector<ChatMessage> intensity(const std::vector<Utterance>& dialogue) {
  std::string options;
  for (auto s : intensity_sentences()) {
    options += "- ";
    options += s;
    options += "\n";
  }
  return {sys(kIntensitySystem),
          user("Conversation: " + render_history(dialogue) +
               "\n\nYou can only reply with one of the following sentences:\n" + options +
               "\nQuestion: What are the final emotions of the seeker after the conversation?")};
}

std::vector<ChatMessage> es_value(const std::vector<Utterance>& dialogue_a, const std::vector<Utterance>& dialogue_b,
                                  const ValueCatalog& catalog) {
  std::string defs;
  for (auto v : all_values()) defs += "\n" + value_info(v, catalog);
  return {sys(kEsValueSystem),
          user("1. Human Values:" + defs + "\n2. Dialogue A:\n" + render_history(dialogue_a) + "\n3. Dialogue B:\n" +
               render_history(dialogue_b) +
               "\n\nThe definitions and associated values of 20 human values are provided, along with two emotional "
               "support conversations (Dialogue A and Dialogue B) between a therapist and a patient struggling with "
               "emotional difficulties. After reading both conversations, evaluate them based on the criteria "
               "below. For each criterion, first provide reasoning for your assessment, and then determine which "
               "dialogue is better for that criterion, or if it's a tie.\n\nEvaluation Criteria:\n"
               "1) Patient's perspective: In which dialogue were positive human values more strongly explored and "
               "reinforced in the patient through the conversation?\n"
               "2) Therapist's perspective: In which dialogue did the therapist more effectively help the patient in "
               "exploring and reinforcing positive human values?\n\nTemplate:\n"
               "1. Reasoning: (Reasoning for the evaluation of all criteria)\n2. Results:\n"
               "1) Patient's perspective: Dialogue A, Dialogue B, or Tie\n"
               "2) Therapist's perspective: Dialogue A, Dialogue B or Tie")};
}

std::vector<ChatMessage> emotion_judge(Emotion emotion, const std::string& problem_category,
                                       const std::vector<Utterance>& dialogue) {
  std::string options;
  for (auto s : emotion_judge_sentences()) {
    options += s;
    options += "\n";
  }
  return {sys(kEmotionJudgeSystem),
          user("You can only reply with one of the following sentences:\n" + options +
               "The following is a conversation about " + util::to_lower(emotion_name(emotion)) + " regarding " +
               problem_category + " : " + render_history(dialogue) +
               "\nQuestion: Has the Patient’s issue been solved? Answer:")};
}

}  // namespace esvr::prompts
