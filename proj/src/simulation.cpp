#include "esvr/simulation.hpp"

#include <regex>

#include "esvr/prompts.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "simulation_engine";

struct Section {
  int step;
  std::string body;  // text after the header line
};

std::vector<Section> split_steps(const std::string& text) {
  static const std::regex header(R"((^|\n)[ \t*#>_-]*step\s*([1-4])\s*[.:)][^\n]*)", std::regex::icase);
  std::vector<std::pair<int, std::pair<std::size_t, std::size_t>>> marks;  // step, (header start, body start)
  for (auto it = std::sregex_iterator(text.begin(), text.end(), header); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    std::size_t start = static_cast<std::size_t>(m.position(0)) + m[1].length();
    std::size_t body = static_cast<std::size_t>(m.position(0) + m.length(0));
    marks.push_back({std::stoi(m[2].str()), {start, body}});
  }
  std::vector<Section> out;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    std::size_t end = i + 1 < marks.size() ? marks[i + 1].second.first : text.size();
    std::size_t body = std::min(marks[i].second.second, end);
    out.push_back({marks[i].first, text.substr(body, end - body)});
  }
  return out;
}

// Text following "<label>:" up to the next labelled line or the end.
std::optional<std::string> labelled(const std::string& body, const std::string& label, bool single_line) {
  std::regex re("(^|\\n)[ \\t*_-]*" + label + "[ \\t*_]*:", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(body, m, re)) return std::nullopt;
  std::size_t from = static_cast<std::size_t>(m.position(0) + m.length(0));
  std::size_t to = body.size();
  if (single_line) {
    to = body.find('\n', from);
    if (to == std::string::npos) to = body.size();
  }
  return util::trim(body.substr(from, to - from));
}

std::string unquote(std::string s) {
  s = util::trim(s);
  while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '*' && s.back() == '*')))
    s = util::trim(s.substr(1, s.size() - 2));
  return s;
}

std::optional<bool> leading_yes_no(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == '-' || s[i] == '*' ||
                          s[i] == '"' || s[i] == '\'' || s[i] == '`' || s[i] == '('))
    ++i;
  auto word_at = [&](std::string_view w) {
    if (s.size() - i < w.size() || !util::iequals(std::string_view(s).substr(i, w.size()), w)) return false;
    std::size_t j = i + w.size();
    return j == s.size() || !std::isalpha(static_cast<unsigned char>(s[j]));
  };
  if (word_at("yes")) return true;
  if (word_at("no")) return false;
  return std::nullopt;
}

std::optional<Strategy> lenient_strategy(const std::string& raw) {
  if (auto s = parse_strategy(raw)) return s;
  auto cut = raw.find_first_of("(:;,\n");
  auto dash = raw.find(" - ");
  if (dash != std::string::npos && (cut == std::string::npos || dash < cut)) cut = dash;
  if (cut != std::string::npos) return parse_strategy(raw.substr(0, cut));
  return std::nullopt;
}

TurnLabel label_reply(Gateway& gw, const std::string& text) {
  TurnLabel l;
  l.sentiment = gw.score_sentiment(text);
  l.values = gw.detect_values(text);
  return l;
}

std::string clean_seeker_reply(std::string s) {
  s = util::trim(s);
  for (std::string_view prefix : {"Patient:", "patient:", "Seeker:", "seeker:"}) {
    if (s.rfind(prefix, 0) == 0) s = util::trim(s.substr(prefix.size()));
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing

SupporterOutput parse_supporter_output(const std::string& text, bool steps_3_4_only) {
  auto sections = split_steps(text);
  auto find = [&](int step) -> const Section* {
    for (const auto& s : sections)
      if (s.step == step) return &s;
    return nullptr;
  };
  SupporterOutput out;
  auto reasoning = [&](int step) {
    const Section* s = find(step);
    if (!s) throw ParseError(kModule, "supporter reply is missing Step " + std::to_string(step), text);
    auto r = labelled(s->body, "reasoning", false);
    std::string v = r ? *r : util::trim(s->body);
    if (v.empty()) throw ParseError(kModule, "Step " + std::to_string(step) + " has no reasoning", text);
    return v;
  };
  if (!steps_3_4_only) {
    out.step1 = reasoning(1);
    out.step2 = reasoning(2);
  }
  out.step3 = reasoning(3);
  auto yn = leading_yes_no(out.step3);
  if (!yn) throw ParseError(kModule, "Step 3 must start with Yes or No", text);
  out.use_reference = *yn;

  const Section* s4 = find(4);
  if (!s4) throw ParseError(kModule, "supporter reply is missing Step 4", text);
  auto strategy = labelled(s4->body, "strategy", true);
  if (!strategy || strategy->empty()) throw ParseError(kModule, "Step 4 has no Strategy", text);
  std::string raw_strategy = unquote(*strategy);
  auto parsed = lenient_strategy(raw_strategy);
  if (!parsed) throw ParseError(kModule, "unknown strategy '" + raw_strategy + "'", raw_strategy);
  out.strategy = *parsed;
  auto response = labelled(s4->body, "response", false);
  if (!response) throw ParseError(kModule, "Step 4 has no Response", text);
  out.response = unquote(*response);
  if (out.response.empty()) throw ParseError(kModule, "Step 4 Response is empty", text);
  return out;
}

std::vector<ValueId> parse_target_values(const std::string& reply) {
  std::vector<ValueId> out;
  std::string normalized = reply;
  for (char& c : normalized)
    if (c == '\n' || c == ';') c = ',';
  for (const auto& part : util::split(normalized, ',')) {
    std::string p = util::trim(part);
    // Drop list numbering like "1." or "-".
    while (!p.empty() && (std::isdigit(static_cast<unsigned char>(p.front())) || p.front() == '.' ||
                          p.front() == '-' || p.front() == ')' || p.front() == '*'))
      p = util::trim(p.substr(1));
    if (p.empty()) continue;
    auto v = parse_value_lenient(p);
    if (v && std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
    if (out.size() == 3) break;
  }
  if (out.empty()) throw ParseError(kModule, "no value names in target value reply", reply);
  return out;
}

SupporterOutput alternative_turn(const std::vector<ChatMessage>& supporter_messages, const std::string& prior_raw,
                                 const SupporterOutput& prior, Gateway& gw) {
  auto msgs = prompts::alternative(supporter_messages, prior_raw, prior.use_reference);
  std::string last_problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string raw = gw.chat("supporter", msgs, attempt);
    try {
      SupporterOutput alt = parse_supporter_output(raw, true);
      if (alt.use_reference != prior.use_reference) {
        alt.step1 = prior.step1;
        alt.step2 = prior.step2;
        return alt;
      }
      last_problem = "decision unchanged";
    } catch (const ParseError& e) {
      last_problem = e.what();
    }
  }
  throw FlipFailure(kModule, "alternative response did not flip the reference decision after one retry (" +
                                 last_problem + ")");
}

// ---------------------------------------------------------------------------
// Termination

bool is_end_token(const std::string& reply) { return util::trim(reply) == "[END]"; }

std::string strip_end_token(const std::string& reply) {
  std::string s = reply;
  for (auto pos = s.find("[END]"); pos != std::string::npos; pos = s.find("[END]")) s.erase(pos, 5);
  return util::trim(s);
}

bool has_gratitude(const std::string& reply, const TerminationRules& rules) {
  for (const auto& phrase : rules.gratitude)
    if (util::icontains(reply, phrase)) return true;
  return false;
}

TerminationReason check_termination(const std::string& reply, std::optional<double> sentiment, int turn_count,
                                    int turn_cap, const TerminationRules& rules) {
  if (is_end_token(reply)) return TerminationReason::EndToken;
  if (sentiment && *sentiment >= rules.relief_threshold && has_gratitude(reply, rules))
    return TerminationReason::Relieved;
  if (turn_count >= turn_cap) return TerminationReason::TurnCap;
  return TerminationReason::Ongoing;
}

// ---------------------------------------------------------------------------
// Transcript views

Dialogue Transcript::dialogue() const {
  Dialogue d;
  d.id = id;
  d.persona_ref = persona.id;
  d.turns = opening;
  for (const auto& t : turns) {
    Utterance s{Role::Supporter, t.primary.response, t.primary.strategy, std::nullopt};
    d.turns.push_back(std::move(s));
    d.turns.push_back(t.seeker_reply);
  }
  d.termination = termination;
  return d;
}

std::vector<Utterance> Transcript::history_before(int t) const {
  if (t < 0 || t > turn_count()) throw InvalidArgument(kModule, "turn index out of range");
  std::vector<Utterance> h = opening;
  for (int i = 0; i < t; ++i) {
    const auto& r = turns[static_cast<std::size_t>(i)];
    h.push_back({Role::Supporter, r.primary.response, r.primary.strategy, std::nullopt});
    h.push_back(r.seeker_reply);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct SupporterStep {
  std::vector<ValueId> targets;
  std::string reference;
  std::vector<ChatMessage> messages;
  std::string raw;
  SupporterOutput output;
};

SupporterStep supporter_step(const std::vector<Utterance>& history, Gateway& gw, const ValueCatalog& catalog) {
  SupporterStep s;
  s.targets = parse_target_values(gw.chat("tvd", prompts::tvd(history)));
  ValueSet ts(s.targets.begin(), s.targets.end());
  s.reference = util::trim(gw.chat("rg", prompts::rg(history, ts, catalog)));
  if (s.reference.empty()) throw ParseError(kModule, "reference generator returned an empty reply", "");
  s.messages = prompts::supporter(history, ts, s.reference, catalog);
  // One retry on a malformed template.
  for (int attempt = 0;; ++attempt) {
    s.raw = gw.chat("supporter", s.messages, attempt);
    try {
      s.output = parse_supporter_output(s.raw);
      return s;
    } catch (const ParseError&) {
      if (attempt >= 1) throw;
    }
  }
}

Utterance seeker_step(const Persona& persona, const SimulationParams& params, const std::vector<Utterance>& history,
                      Gateway& gw) {
  Utterance u;
  u.role = Role::Seeker;
  u.text = clean_seeker_reply(gw.chat("seeker", prompts::seeker(persona, params.example_dialogue, history)));
  if (u.text.empty()) throw ParseError(kModule, "seeker simulator returned an empty reply", "");
  std::string scored = strip_end_token(u.text);
  if (!scored.empty()) u.label = label_reply(gw, scored);
  return u;
}

std::optional<double> sentiment_of(const Utterance& u) {
  if (u.label) return u.label->sentiment;
  return std::nullopt;
}

}  // namespace

Transcript run_dialogue(const Persona& persona, const SimulationParams& params, Gateway& gw,
                        const ValueCatalog& catalog) {
  if (params.turn_cap < 1) throw InvalidArgument(kModule, "turn_cap must be positive");
  if (params.rollout_horizon && *params.rollout_horizon < 1)
    throw InvalidArgument(kModule, "rollout horizon must be positive");
  Transcript tr;
  tr.id = "t-" + persona.id;
  tr.persona = persona;
  std::vector<Utterance> history;
  try {
    Utterance opener{Role::Supporter, std::string(kSupporterOpener), std::nullopt, std::nullopt};
    Utterance situation{Role::Seeker, persona.situation, std::nullopt, std::nullopt};
    situation.label = label_reply(gw, persona.situation);
    tr.opening = {opener, situation};
    history = tr.opening;

    for (int i = 0; i < params.turn_cap; ++i) {
      SupporterStep step = supporter_step(history, gw, catalog);
      TurnRecord rec;
      rec.index = i;
      rec.targets = step.targets;
      rec.reference = step.reference;
      rec.primary = step.output;
      if (params.with_alternatives) {
        try {
          rec.alternative = alternative_turn(step.messages, step.raw, step.output, gw);
        } catch (const FlipFailure& e) {
          rec.flip_failure = e.what();
        }
      }
      std::vector<Utterance> before = history;
      history.push_back({Role::Supporter, rec.primary.response, rec.primary.strategy, std::nullopt});
      rec.seeker_reply = seeker_step(persona, params, history, gw);
      history.push_back(rec.seeker_reply);

      if (rec.alternative) {
        int horizon = params.rollout_horizon ? *params.rollout_horizon : params.turn_cap - i;
        std::vector<Utterance> branch = before;
        branch.push_back({Role::Supporter, rec.alternative->response, rec.alternative->strategy, std::nullopt});
        for (int k = 1; k <= horizon; ++k) {
          Utterance reply = seeker_step(persona, params, branch, gw);
          branch.push_back(reply);
          rec.alternative_rollout.push_back(reply);
          auto term = check_termination(reply.text, sentiment_of(reply), i + k, params.turn_cap, params.rules);
          if (term != TerminationReason::Ongoing || k == horizon) break;
          SupporterStep next = supporter_step(branch, gw, catalog);
          Utterance s{Role::Supporter, next.output.response, next.output.strategy, std::nullopt};
          branch.push_back(s);
          rec.alternative_rollout.push_back(s);
        }
      }

      tr.turns.push_back(std::move(rec));
      const Utterance& reply = tr.turns.back().seeker_reply;
      tr.termination = check_termination(reply.text, sentiment_of(reply), tr.turn_count(), params.turn_cap,
                                         params.rules);
      if (tr.termination != TerminationReason::Ongoing) break;
    }
  } catch (const Error& e) {
    tr.complete = false;
    tr.termination = TerminationReason::Ongoing;
    tr.error = e.describe();
  }
  return tr;
}

std::vector<Transcript> run_dialogues(const std::vector<Persona>& personas, const SimulationParams& params,
                                      Gateway& gw, int jobs, const ValueCatalog& catalog) {
  std::vector<Transcript> out(personas.size());
  util::parallel_for(personas.size(), jobs,
                     [&](std::size_t i) { out[i] = run_dialogue(personas[i], params, gw, catalog); });
  return out;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const SupporterOutput& s) {
  return json{{"step1", s.step1},         {"step2", s.step2},
              {"step3", s.step3},         {"use_reference", s.use_reference},
              {"strategy", strategy_name(s.strategy)}, {"response", s.response}};
}

SupporterOutput supporter_output_from_json(const json& j) {
  SupporterOutput s;
  s.step1 = schema::require_string(j, "step1");
  s.step2 = schema::require_string(j, "step2");
  s.step3 = schema::require_string(j, "step3");
  s.use_reference = schema::require_bool(j, "use_reference");
  std::string st = schema::require_string(j, "strategy");
  auto parsed = parse_strategy(st);
  if (!parsed) throw SchemaError(kModule, "strategy", "unknown strategy '" + st + "'");
  s.strategy = *parsed;
  s.response = schema::require_string(j, "response", true);
  return s;
}

namespace {

json utterances(const std::vector<Utterance>& us) {
  json a = json::array();
  for (const auto& u : us) a.push_back(to_json(u));
  return a;
}

template <typename F>
auto within(const std::string& prefix, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError& e) {
    throw SchemaError(e.module(), prefix + "." + e.field(), e.message());
  }
}

std::vector<Utterance> utterances_from(const json& j, const std::string& field) {
  const json& a = schema::require(j, field);
  if (!a.is_array()) throw SchemaError(kModule, field, "expected array");
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    out.push_back(within(field + "[" + std::to_string(i) + "]", [&] { return utterance_from_json(a[i]); }));
  return out;
}

}  // namespace

json to_json(const Transcript& t) {
  json turns = json::array();
  for (const auto& r : t.turns) {
    json targets = json::array();
    for (auto v : r.targets) targets.push_back(value_name(v));
    json jr{{"index", r.index},
            {"targets", std::move(targets)},
            {"reference", r.reference},
            {"primary", to_json(r.primary)},
            {"seeker", to_json(r.seeker_reply)},
            {"rollout", utterances(r.alternative_rollout)}};
    if (r.alternative) jr["alternative"] = to_json(*r.alternative);
    if (r.flip_failure) jr["flip_failure"] = *r.flip_failure;
    turns.push_back(std::move(jr));
  }
  json j{{"schema", schema::kTranscript},
         {"id", t.id},
         {"persona", to_json(t.persona)},
         {"opening", utterances(t.opening)},
         {"turns", std::move(turns)},
         {"termination", termination_name(t.termination)},
         {"turn_count", t.turn_count()},
         {"complete", t.complete}};
  if (t.error) j["error"] = *t.error;
  return j;
}

Transcript transcript_from_json(const json& j) {
  schema::expect(j, schema::kTranscript);
  Transcript t;
  t.id = schema::require_string(j, "id", true);
  t.persona = within("persona", [&] { return persona_from_json(schema::require(j, "persona")); });
  t.opening = utterances_from(j, "opening");
  const json& turns = schema::require(j, "turns");
  if (!turns.is_array()) throw SchemaError(kModule, "turns", "expected array");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    t.turns.push_back(within("turns[" + std::to_string(i) + "]", [&] {
      const json& jr = turns[i];
      TurnRecord r;
      r.index = static_cast<int>(schema::require_integer(jr, "index"));
      const json& targets = schema::require(jr, "targets");
      value_set_from_json(targets, "targets");
      for (const auto& e : targets) r.targets.push_back(*parse_value(e.get<std::string>()));
      r.reference = schema::require_string(jr, "reference");
      r.primary = within("primary", [&] { return supporter_output_from_json(schema::require(jr, "primary")); });
      if (jr.contains("alternative") && !jr["alternative"].is_null())
        r.alternative = within("alternative", [&] { return supporter_output_from_json(jr["alternative"]); });
      r.flip_failure = schema::optional_string(jr, "flip_failure");
      r.seeker_reply = within("seeker", [&] { return utterance_from_json(schema::require(jr, "seeker")); });
      if (jr.contains("rollout")) r.alternative_rollout = utterances_from(jr, "rollout");
      if (r.alternative && r.alternative->use_reference == r.primary.use_reference)
        throw SchemaError(kModule, "alternative.use_reference", "must differ from primary.use_reference");
      return r;
    }));
  }
  std::string term = schema::require_string(j, "termination");
  auto reason = parse_termination(term);
  if (!reason) throw SchemaError(kModule, "termination", "unknown termination '" + term + "'");
  t.termination = *reason;
  t.complete = schema::require_bool(j, "complete");
  t.error = schema::optional_string(j, "error");
  long long count = schema::require_integer(j, "turn_count");
  if (count != t.turn_count()) throw SchemaError(kModule, "turn_count", "does not match the number of turns");
  return t;
}

}  // namespace esvr
