#include <algorithm>
#include <array>
#include <chrono>
#include <thread>

#include "esvr/backends.hpp"
#include "esvr/corpus.hpp"
#include "esvr/error.hpp"
#include "esvr/prompts.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "model_gateway";
}

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(Handler handler, int delay_ms) : handler_(std::move(handler)), delay_ms_(delay_ms) {}

json ScriptedBackend::call(const BackendRequest& req) {
  ++calls_;
  int now = ++active_;
  std::size_t prev = peak_.load();
  while (static_cast<std::size_t>(now) > prev && !peak_.compare_exchange_weak(prev, static_cast<std::size_t>(now))) {
  }
  struct Done {
    std::atomic<int>& a;
    ~Done() { --a; }
  } done{active_};
  if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
  return handler_(req);
}

ScriptedBackend::Handler ScriptedBackend::cycle(std::vector<std::string> texts) {
  if (texts.empty()) throw InvalidArgument(kModule, "cycle needs at least one text");
  return [texts = std::move(texts)](const BackendRequest& req) {
    return json{{"text", texts[static_cast<std::size_t>(req.sample_index) % texts.size()]}};
  };
}

ScriptedBackend::Handler ScriptedBackend::chat(std::function<std::string(const json&)> fn) {
  return [fn = std::move(fn)](const BackendRequest& req) { return json{{"text", fn(req.payload)}}; };
}

ScriptedBackend::Handler ScriptedBackend::constant_sentiment(double score) {
  return [score](const BackendRequest&) { return json{{"score", score}}; };
}

ScriptedBackend::Handler ScriptedBackend::constant_values(std::vector<double> probs) {
  return [probs = std::move(probs)](const BackendRequest&) { return json{{"probabilities", probs}}; };
}

// ---------------------------------------------------------------------------
// SyntheticBackend

namespace {

struct Lexeme {
  ValueId value;
  std::vector<std::string_view> keys;
  std::string_view phrase;  // contains one of the keys
};

const std::vector<Lexeme>& lexicon() {
  static const std::vector<Lexeme> lex = {
      {ValueId::SelfDirectionThought, {"idea", "learn", "curious", "creative", "think for myself"},
       "learning to trust your own ideas"},
      {ValueId::SelfDirectionAction, {"i will", "my own", "decide", "choose", "independen", "plan"},
       "deciding on your own plan"},
      {ValueId::Stimulation, {"exciting", "adventure", "something new", "challenge"},
       "the challenge of trying something new"},
      {ValueId::Hedonism, {"enjoy", "fun", "pleasure", "relax"}, "finding moments to relax and enjoy life"},
      {ValueId::Achievement, {"keep trying", "succeed", "success", "goal", "achieve", "accomplish", "progress"},
       "the progress you have made toward your goal"},
      {ValueId::PowerDominance, {"control", "in charge", "authority"}, "taking control of the situation"},
      {ValueId::PowerResources, {"job", "money", "salary", "income", "afford", "savings"},
       "keeping your income and savings steady"},
      {ValueId::Face, {"reputation", "embarrass", "respected", "public image"}, "the reputation you have earned"},
      {ValueId::SecurityPersonal, {"secure", "safe", "stable", "stability", "health"}, "feeling safe and stable"},
      {ValueId::SecuritySocietal, {"society", "nation", "public order"}, "helping society stay orderly"},
      {ValueId::Tradition, {"tradition", "faith", "religio", "heritage"}, "the traditions you grew up with"},
      {ValueId::ConformityRules, {"rules", "obey", "regulation"}, "following the rules you believe in"},
      {ValueId::ConformityInterpersonal, {"polite", "avoid conflict", "not to hurt"},
       "being polite and avoiding conflict with others"},
      {ValueId::Humility, {"humble", "modest"}, "staying humble and modest"},
      {ValueId::BenevolenceCaring, {"family", "take care", "taking care", "friend", "kindness"},
       "taking care of the people close to you"},
      {ValueId::BenevolenceDependability, {"rely", "trust", "loyal", "responsib", "count on"},
       "being someone others can rely on"},
      {ValueId::UniversalismConcern, {"fair", "equal", "justice"}, "wanting things to be fair for everyone"},
      {ValueId::UniversalismNature, {"nature", "environment", "outdoors"}, "spending time in nature"},
      {ValueId::UniversalismTolerance, {"accept", "different view", "open-minded"}, "accepting different views"},
      {ValueId::UniversalismObjectivity, {"facts", "evidence", "objective", "truth"}, "looking at the facts"},
  };
  return lex;
}

const Lexeme& lexeme(ValueId v) { return lexicon()[index_of(v)]; }

constexpr std::array<std::string_view, 16> kPositive = {
    "thank", "better", "hope", "grateful", "appreciate", "good", "great", "glad",
    "relieved", "helpful", "calm", "happy", "confident", "lighter", "helps", "progress"};
constexpr std::array<std::string_view, 20> kNegative = {
    "sad",     "anxious", "worr",   "afraid",     "hopeless", "angry",  "stress", "lonely", "hurt",  "frustrat",
    "depress", "upset",   "scared", "overwhelm", "guilt",    "ashamed", "can't", "lost",   "fail", "exhausted"};

std::size_t count_hits(const std::string& lower, std::string_view key) {
  std::size_t n = 0;
  for (auto pos = lower.find(key); pos != std::string::npos; pos = lower.find(key, pos + key.size())) ++n;
  return n;
}

std::vector<ValueId> mentioned_values(const std::string& text) {
  std::string lower = util::to_lower(text);
  std::vector<ValueId> out;
  for (const auto& l : lexicon()) {
    for (auto k : l.keys) {
      if (lower.find(k) != std::string::npos) {
        out.push_back(l.value);
        break;
      }
    }
  }
  return out;
}

std::string between(const std::string& s, std::string_view start, std::string_view end) {
  auto a = s.find(start);
  if (a == std::string::npos) return {};
  a += start.size();
  auto b = end.empty() ? std::string::npos : s.find(end, a);
  return s.substr(a, b == std::string::npos ? std::string::npos : b - a);
}

std::string last_line_with_prefix(const std::string& history, std::string_view prefix) {
  std::string found;
  for (const auto& line : util::split_lines(history)) {
    if (line.rfind(prefix, 0) == 0) found = line.substr(prefix.size());
  }
  return found;
}

std::vector<std::string> lines_with_prefix(const std::string& history, std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& line : util::split_lines(history))
    if (line.rfind(prefix, 0) == 0) out.push_back(line.substr(prefix.size()));
  return out;
}

std::vector<ValueId> parse_target_block(const std::string& block) {
  std::vector<ValueId> out;
  for (const auto& line : util::split_lines(block)) {
    if (auto v = parse_value(util::trim(line))) out.push_back(*v);
  }
  return out;
}

constexpr std::array<std::string_view, kStrategyCount> kGeneric = {
    "What part of this has been hardest for you lately?",
    "So it sounds like this has been sitting heavily on you.",
    "You seem really worn down by all of this.",
    "I have been through something like this, and it was hard for me too.",
    "It takes courage to talk about this.",
    "Maybe writing down your thoughts tonight could ease things a little.",
    "Many people in a similar place find that these feelings ease with time.",
    "I'm here with you.",
};

std::string supporter_reply(bool use_ref, Strategy strategy, const std::string& reference, bool steps_3_4_only) {
  std::string response = use_ref && !reference.empty() ? reference : std::string(kGeneric[static_cast<std::size_t>(strategy)]);
  std::string out;
  if (!steps_3_4_only) {
    out += "Step 1. Understanding the patient's issues and current state\n-Reasoning: The patient is distressed and "
           "the causes need more exploration.\n";
    out += "Step 2. Identifying the key points of the reference response\n-Reasoning: The reference points the "
           "patient toward what matters to them.\n";
  }
  out += "Step 3. Determination of reference response usage\n-Reasoning: ";
  out += use_ref ? "Yes, the reference fits the patient's situation." : "No, a different message suits the patient better.";
  out += "\nStep 4. Therapist's next strategy and response\n-Strategy: ";
  out += strategy_name(strategy);
  out += "\n-Response: " + response;
  return out;
}

json synthetic_chat(const json& payload, int sample_index) {
  const json& msgs = payload.at("messages");
  const std::string system = msgs.at(0).at("content").get<std::string>();
  const std::string first_user = msgs.size() > 1 ? msgs.at(1).at("content").get<std::string>() : std::string();
  const std::string last_user = [&] {
    for (auto it = msgs.rbegin(); it != msgs.rend(); ++it)
      if ((*it)["role"] == "user") return (*it)["content"].get<std::string>();
    return std::string();
  }();
  const std::uint64_t h = util::fnv1a(payload.dump()) ^ util::derive_seed(static_cast<std::uint64_t>(sample_index), "s");
  auto text = [](std::string s) { return json{{"text", std::move(s)}}; };

  if (system == prompts::kTvdSystem) {
    std::string history = between(first_user, "Dialogue history:\n", "");
    std::vector<ValueId> picks;
    for (auto l : lines_with_prefix(history, "Patient: "))
      for (auto v : mentioned_values(l))
        if (std::find(picks.begin(), picks.end(), v) == picks.end()) picks.push_back(v);
    util::Rng rng(h);
    while (picks.size() < 3) {
      ValueId v = value_at(rng.uniform_index(kValueCount));
      if (std::find(picks.begin(), picks.end(), v) == picks.end()) picks.push_back(v);
    }
    picks.resize(3);
    std::vector<std::string> names;
    for (auto v : picks) names.emplace_back(value_name(v));
    return text(util::join(names, ", "));
  }

  if (system == prompts::kTherapistSystem) {
    if (last_user.rfind(prompts::kAlternativeMarker, 0) == 0) {
      bool use_ref = last_user.find("must now start with 'Yes'") != std::string::npos;
      std::string reference = between(first_user, "\n4. Reference response: ", "\n\n");
      auto strategy = all_strategies()[h % kStrategyCount];
      return text(supporter_reply(use_ref, strategy, reference, true));
    }
    if (first_user.rfind("1. Strategies for emotional support:", 0) == 0) {
      std::string reference = between(first_user, "\n4. Reference response: ", "\n\n");
      bool use_ref = (h % 10) < 5;
      auto strategy = all_strategies()[(h >> 8) % kStrategyCount];
      return text(supporter_reply(use_ref, strategy, reference, false));
    }
    // Reference generator.
    std::vector<ValueId> targets = parse_target_block(between(first_user, "2. Target values:\n", "\n\nAs a therapist"));
    if (targets.empty()) return text("It sounds like this has been really hard, and I'd like to hear more.");
    std::vector<std::string> phrases;
    for (auto v : targets) phrases.emplace_back(lexeme(v).phrase);
    return text("It sounds like " + util::join(phrases, " and ") +
                " still matters to you, so what would one small step toward that look like?");
  }

  if (system.rfind(prompts::kSeekerSystemPrefix, 0) == 0) {
    std::size_t seeker_turns = 0;
    for (const auto& m : msgs)
      if (m["role"] == "assistant") ++seeker_turns;
    const std::uint64_t ph = util::fnv1a(system);
    const std::size_t resolve_at = 2 + ph % 4;
    const bool ends_with_token = (ph >> 8) % 3 == 0;
    std::vector<ValueId> echo = mentioned_values(last_user);
    util::Rng rng(h);
    if (echo.empty() && rng.uniform_index(4) == 0) echo.push_back(value_at(rng.uniform_index(kValueCount)));
    std::string phrase = echo.empty() ? "" : std::string(lexeme(echo[rng.uniform_index(echo.size())]).phrase);
    if (seeker_turns > resolve_at) return text("[END]");
    if (seeker_turns == resolve_at) {
      if (ends_with_token)
        return text("Thanks, I still feel a little worried, but " +
                    (phrase.empty() ? std::string("talking helped") : phrase + " helps") + ".");
      return text("Thank you so much, I feel much better and calm now" +
                  (phrase.empty() ? std::string(".") : ", and I will focus on " + phrase + "."));
    }
    static constexpr std::array<std::string_view, 4> kLow = {
        "I still feel overwhelmed and stressed", "Honestly I'm worried I will fail again",
        "I feel lost and lonely most days", "It hurts and I can't stop feeling upset"};
    std::string base(kLow[rng.uniform_index(kLow.size())]);
    if (phrase.empty()) return text(base + ".");
    return text(base + ", although " + phrase + " does matter to me.");
  }

  if (system == prompts::kSituationSystem) {
    std::string topic = between(first_user, "1. Emotional support topic: ", "\n\n2. Supported value: ");
    std::vector<std::string> subs;
    for (const auto& line : util::split_lines(topic))
      if (line.rfind("- ", 0) == 0) subs.push_back(util::to_lower(line.substr(2)));
    if (subs.empty()) subs.push_back(util::to_lower(util::trim(topic)));
    std::string value_line = util::split_lines(between(first_user, "2. Supported value: ", "\n")).front();
    auto v = parse_value(util::trim(value_line));
    std::string phrase = v ? std::string(lexeme(*v).phrase) : "what I care about";
    static constexpr std::array<std::string_view, 6> kOpeners = {
        "Lately I have been struggling with", "I feel stuck dealing with", "I can't stop thinking about",
        "I'm overwhelmed by",                 "I keep losing sleep over",  "I feel alone facing"};
    std::size_t n = 10 + h % 5;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& sub = subs[i % subs.size()];
      std::string_view opener = kOpeners[(i / subs.size()) % kOpeners.size()];
      std::string because = (i % 3 == 2) ? "even though I try not to dwell on it" : "because " + phrase + " matters so much to me";
      lines.push_back(std::string(opener) + " " + sub + " " + because + ".");
    }
    return text(util::join(lines, "\n"));
  }

  if (system == prompts::kAlignmentSystem) {
    std::string situation = between(first_user, "1. Situations: ", "\n\n2. Supported value: ");
    std::string value_line = util::split_lines(between(first_user, "2. Supported value: ", "\n")).front();
    auto v = parse_value(util::trim(value_line));
    bool mentions = v && !mentioned_values(situation).empty() &&
                    util::icontains(situation, lexeme(*v).phrase);
    int rating = mentions ? 4 + static_cast<int>(h % 2) : 2 + static_cast<int>(h % 2);
    return text("situation: " + situation + "\n- Reasoning: The situation " +
                (mentions ? std::string("centers on") : std::string("barely touches")) + " the value.\n- Rating: " +
                std::to_string(rating));
  }

  if (system == prompts::kEmotionLabelSystem) {
    std::string situation = between(first_user, "Situation: ", "\n\n");
    std::size_t base = util::fnv1a(situation) % kEmotionCount;
    // One of five samples disagrees so the vote is exercised.
    std::size_t pick = sample_index == 3 ? (base + 1) % kEmotionCount : base;
    return text(std::string(emotion_name(all_emotions()[pick])));
  }

  if (system == prompts::kDemographicsSystem) {
    static constexpr std::array<std::string_view, 5> kAges = {"20s", "30s", "40s", "50s", "60s"};
    static constexpr std::array<std::string_view, 3> kGenders = {"Female", "Male", "Non-binary"};
    static constexpr std::array<std::string_view, 8> kJobs = {"Teacher", "Nurse", "Software engineer", "Student",
                                                              "Accountant", "Retail worker", "Designer", "Chef"};
    return text("Age: " + std::string(kAges[h % kAges.size()]) + "\nGender: " +
                std::string(kGenders[(h >> 8) % kGenders.size()]) + "\nOccupation: " +
                std::string(kJobs[(h >> 16) % kJobs.size()]));
  }

  if (system == prompts::kSkillsSystem) {
    std::string out;
    std::size_t i = 0;
    for (const auto& c : prompts::skill_criteria()) {
      out += std::string(c.name) + ": " + std::to_string(2 + (h >> (3 * i)) % 4) + "\n";
      ++i;
    }
    return text(out);
  }

  if (system == prompts::kIntensitySystem) {
    std::string last = last_line_with_prefix(first_user, "Patient: ");
    if (util::trim(last) == "[END]") {
      auto all = lines_with_prefix(first_user, "Patient: ");
      if (all.size() >= 2) last = all[all.size() - 2];
    }
    double s = SyntheticBackend::sentiment(last);
    std::size_t level = s >= 0.7 ? 0 : s >= 0.6 ? 1 : s >= 0.45 ? 2 : s >= 0.3 ? 3 : 4;
    return text(std::string(prompts::intensity_sentences()[level]));
  }

  if (system == prompts::kEsValueSystem) {
    auto score = [](const std::string& d) {
      std::size_t n = 0;
      for (const auto& l : lines_with_prefix(d, "Patient: ")) n += mentioned_values(l).size();
      return n;
    };
    std::size_t a = score(between(first_user, "2. Dialogue A:\n", "\n3. Dialogue B:\n"));
    std::size_t b = score(between(first_user, "3. Dialogue B:\n", "\n\nThe definitions"));
    std::string verdict = a > b ? "Dialogue A" : b > a ? "Dialogue B" : "Tie";
    return text("1. Reasoning: Compared how often the patient voiced values.\n2. Results:\n1) Patient's perspective: " +
                verdict + "\n2) Therapist's perspective: " + verdict);
  }

  if (system == prompts::kEmotionJudgeSystem) {
    std::string dialogue = between(first_user, " : ", "\nQuestion:");
    std::string last = last_line_with_prefix(dialogue, "Patient: ");
    double s = SyntheticBackend::sentiment(last) + (static_cast<double>(h % 5) - 2.0) * 0.05;
    std::size_t k = s < 0.3 ? 0 : s < 0.5 ? 1 : s < 0.7 ? 2 : 3;
    return text(std::string(prompts::emotion_judge_sentences()[k]));
  }

  throw BackendError(kModule, 400, "synthetic backend does not recognize this prompt");
}

}  // namespace

double SyntheticBackend::sentiment(const std::string& text) {
  std::string lower = util::to_lower(text);
  long pos = 0, neg = 0;
  for (auto k : kPositive) pos += static_cast<long>(count_hits(lower, k));
  for (auto k : kNegative) neg += static_cast<long>(count_hits(lower, k));
  double s = 0.5 + 0.12 * static_cast<double>(pos - neg);
  return std::clamp(s, 0.02, 0.98);
}

std::vector<double> SyntheticBackend::values(const std::string& text) {
  std::vector<double> probs(kValueCount, 0.0);
  const std::uint64_t h = util::fnv1a(text);
  for (std::size_t i = 0; i < kValueCount; ++i) probs[i] = 0.02 + 0.01 * static_cast<double>((h >> (i * 3 % 60)) % 8);
  for (auto v : mentioned_values(text)) probs[index_of(v)] = 0.9;
  return probs;
}

json SyntheticBackend::call(const BackendRequest& req) {
  if (req.endpoint == "sentiment") return json{{"score", sentiment(req.payload.at("text").get<std::string>())}};
  if (req.endpoint == "values") return json{{"probabilities", values(req.payload.at("text").get<std::string>())}};
  if (req.endpoint == "chat") return synthetic_chat(req.payload, req.sample_index);
  throw InvalidArgument(kModule, "unknown endpoint '" + req.endpoint + "'");
}

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "openai" || cfg.kind == "http") return std::make_shared<HttpBackend>(cfg);
  if (cfg.kind == "synthetic") return std::make_shared<SyntheticBackend>();
  throw ConfigError(kModule, "backend " + cfg.name + ": unknown kind '" + cfg.kind + "' (expected openai or synthetic)");
}

}  // namespace esvr
