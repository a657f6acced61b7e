#include <doctest.h>

#include "esvr/error.hpp"
#include "esvr/preference.hpp"
#include "esvr/simulation.hpp"
#include "support.hpp"

using namespace esvr;

namespace {

const char* kFull =
    "Step 1. Understanding the patient's issues and current state\n-Reasoning: The patient feels alone.\n"
    "Step 2. Identifying the key points of the reference response\n-Reasoning: It invites reflection.\n"
    "Step 3. Determination of reference response usage\n-Reasoning: Yes, it fits the moment.\n"
    "Step 4. Therapist's next strategy and response\n-Strategy: Reflection\n-Response: \"It sounds lonely.\"";

void add_scripted(Gateway& gw, const std::string& name, ScriptedBackend::Handler h) {
  BackendConfig cfg;
  cfg.name = name;
  cfg.kind = "scripted";
  gw.add_backend(cfg, std::make_shared<ScriptedBackend>(std::move(h)));
}

SimulationParams params(int cap = 20) {
  SimulationParams p;
  p.turn_cap = cap;
  p.example_dialogue = "Therapist: Hi\nPatient: Hello";
  return p;
}

}  // namespace

TEST_CASE("four-step supporter output parses and round-trips through its rendering") {
  auto s = parse_supporter_output(kFull);
  CHECK(s.step1 == "The patient feels alone.");
  CHECK(s.use_reference);
  CHECK(s.strategy == Strategy::Reflection);
  CHECK(s.response == "It sounds lonely.");
  CHECK(parse_supporter_output(render_supporter_output(s)) == s);
}

TEST_CASE("malformed supporter output names what is wrong") {
  std::string no4 = std::string(kFull).substr(0, std::string(kFull).find("Step 4"));
  CHECK_THROWS_AS(parse_supporter_output(no4), ParseError);
  std::string bad = kFull;
  bad.replace(bad.find("Reflection"), 10, "Hugging");
  try {
    parse_supporter_output(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw() == "Hugging");
  }
  std::string maybe = kFull;
  maybe.replace(maybe.find("Yes, it fits"), 3, "Maybe");
  CHECK_THROWS_AS(parse_supporter_output(maybe), ParseError);
  std::string only34 = std::string(kFull).substr(std::string(kFull).find("Step 3"));
  CHECK(parse_supporter_output(only34, true).response == "It sounds lonely.");
}

TEST_CASE("target values parse leniently and cap at three") {
  CHECK(parse_target_values("Face, tradition\n3. Humility, Hedonism") ==
        std::vector<ValueId>{ValueId::Face, ValueId::Tradition, ValueId::Humility});
  CHECK(parse_target_values("Benevolence: caring, Benevolence: caring") == std::vector<ValueId>{ValueId::BenevolenceCaring});
  CHECK_THROWS_AS(parse_target_values("kindness"), ParseError);
}

TEST_CASE("termination precedence and the relief boundary") {
  TerminationRules r;
  CHECK(check_termination("[END]", 0.9, 1, 20, r) == TerminationReason::EndToken);
  CHECK(check_termination(" [END] ", std::nullopt, 20, 20, r) == TerminationReason::EndToken);
  CHECK(check_termination("Thank you, that helps.", 0.60, 3, 20, r) == TerminationReason::Relieved);
  CHECK(check_termination("Thank you, that helps.", 0.59, 3, 20, r) == TerminationReason::Ongoing);
  CHECK(check_termination("That helps a lot.", 0.95, 3, 20, r) == TerminationReason::Ongoing);
  CHECK(check_termination("Thanks.", 0.59, 20, 20, r) == TerminationReason::TurnCap);
  CHECK(check_termination("I'm grateful.", 0.8, 20, 20, r) == TerminationReason::Relieved);
  CHECK(strip_end_token("Thanks. [END]") == "Thanks.");
}

TEST_CASE("synthetic dialogues satisfy the transcript invariants") {
  Gateway gw;
  test::bind_synthetic(gw);
  for (int i = 0; i < 4; ++i) {
    auto p = test::persona("s" + std::to_string(i));
    p.situation = "I keep arguing with my sister and feel stuck, and being someone others can rely on matters to me. " +
                  std::to_string(i);
    auto tr = run_dialogue(p, params(), gw);
    REQUIRE(tr.complete);
    CHECK(tr.termination != TerminationReason::Ongoing);
    CHECK(tr.turn_count() >= 1);
    CHECK(tr.turn_count() <= 20);
    CHECK_NOTHROW(validate_simulated_dialogue(tr.dialogue(), p.situation));
    for (const auto& t : tr.turns) {
      CHECK(t.targets.size() >= 1);
      CHECK(t.targets.size() <= 3);
      if (t.alternative) {
        CHECK(t.alternative->use_reference != t.primary.use_reference);
        CHECK(t.alternative->step1 == t.primary.step1);
        REQUIRE_FALSE(t.alternative_rollout.empty());
        CHECK(t.alternative_rollout.front().role == Role::Seeker);
      }
      CHECK((t.seeker_reply.label.has_value() || is_end_token(t.seeker_reply.text)));
    }
    CHECK(transcript_from_json(to_json(tr)) == tr);
  }
}

TEST_CASE("scripted seekers drive each termination reason") {
  auto run = [](std::string reply, double sentiment, int cap) {
    Gateway gw;
    test::bind_synthetic(gw);
    add_scripted(gw, "seeker", ScriptedBackend::cycle({reply}));
    add_scripted(gw, "sent", ScriptedBackend::constant_sentiment(sentiment));
    gw.bind_role("seeker", RoleBinding{"seeker", "", 0.7, 64});
    gw.bind_role("sentiment", RoleBinding{"sent", "", 0.7, 64});
    auto p = params(cap);
    p.with_alternatives = false;
    return run_dialogue(test::persona(), p, gw);
  };
  auto end = run("[END]", 0.9, 5);
  CHECK(end.termination == TerminationReason::EndToken);
  CHECK(end.turn_count() == 1);
  auto relieved = run("Thank you, I feel lighter.", 0.60, 5);
  CHECK(relieved.termination == TerminationReason::Relieved);
  CHECK(relieved.turn_count() == 1);
  auto capped = run("Thank you, I feel lighter.", 0.59, 3);
  CHECK(capped.termination == TerminationReason::TurnCap);
  CHECK(capped.turn_count() == 3);
}

TEST_CASE("a supporter that never flips records the failure and continues") {
  Gateway gw;
  test::bind_synthetic(gw);
  add_scripted(gw, "stubborn", ScriptedBackend::cycle({kFull}));
  gw.bind_role("supporter", RoleBinding{"stubborn", "", 0.7, 64});
  auto tr = run_dialogue(test::persona(), params(2), gw);
  REQUIRE(tr.complete);
  REQUIRE_FALSE(tr.turns.empty());
  CHECK_FALSE(tr.turns[0].alternative.has_value());
  CHECK(tr.turns[0].flip_failure.has_value());
}

TEST_CASE("backend failures end the dialogue as incomplete") {
  Gateway gw(Gateway::Options{std::nullopt, false});
  test::bind_synthetic(gw);
  add_scripted(gw, "down", [](const BackendRequest&) -> json { throw BackendUnavailable("test", "refused"); });
  gw.bind_role("rg", RoleBinding{"down", "", 0.7, 64});
  auto tr = run_dialogue(test::persona(), params(), gw);
  CHECK_FALSE(tr.complete);
  REQUIRE(tr.error.has_value());
  CHECK(tr.error->find("model_gateway") == 0);
}
