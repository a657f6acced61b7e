#include <doctest.h>

#include <set>

#include "esvr/error.hpp"
#include "esvr/persona_factory.hpp"
#include "support.hpp"

using namespace esvr;

TEST_CASE("situation lists are cleaned, deduplicated and bounded") {
  std::string reply = "1. I lost my job.\n2) I lost my job.\n- My partner left.\n\n* \"I failed the exam.\"\n";
  auto b = parse_situations(reply);
  CHECK(b.situations == std::vector<std::string>{"I lost my job.", "My partner left.", "I failed the exam."});
  CHECK(b.shortfall == 7);
  std::string many;
  for (int i = 0; i < 35; ++i) many += std::to_string(i + 1) + ". situation " + std::to_string(i) + "\n";
  auto big = parse_situations(many);
  CHECK(big.situations.size() == 30);
  CHECK(big.dropped == 5);
  CHECK(big.shortfall == 0);
}

TEST_CASE("alignment ratings are integers in 1..5") {
  CHECK(parse_rating("Reasoning: fits well.\nRating: 4") == 4);
  CHECK(parse_rating("rating: (5)") == 5);
  CHECK_THROWS_AS(parse_rating("Rating: 7"), ParseError);
  CHECK_THROWS_AS(parse_rating("It fits."), ParseError);
  Gateway gw;
  test::bind_all(gw, ScriptedBackend::cycle({"Rating: 4", "Rating: 5"}));
  CHECK(score_alignment("s", ValueId::Face, gw, 2) == 5);  // 4.5 rounds half up
  CHECK(score_alignment("s", ValueId::Face, gw, 1) == 4);
}

TEST_CASE("emotion vote is a plurality with first-vote tie-break") {
  CHECK(vote_emotion({"Anxiety", "Sadness", "Sadness", "Anxiety", "Fear"}) == Emotion::Anxiety);
  CHECK(vote_emotion({"Fear", "Anger", "Anger", "gibberish", "Fear", "Anger"}) == Emotion::Anger);
  CHECK(vote_emotion({"The emotion is guilt.", "???"}) == Emotion::Guilt);
  CHECK_THROWS_AS(vote_emotion({"?", "none"}), ParseError);
}

TEST_CASE("demographics need all three fields") {
  auto d = parse_demographics("Age: 40s\nGender: Male\nOccupation: Chef");
  CHECK(d == Demographics{"40s", "Male", "Chef"});
  try {
    parse_demographics("Age: 40s\nGender: Male");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("Occupation") != std::string::npos);
  }
}

TEST_CASE("splits are deterministic and partition the population") {
  std::vector<Persona> ps;
  for (int i = 0; i < 50; ++i) ps.push_back(test::persona("p" + std::to_string(i)));
  SplitSpec spec;
  spec.counts = std::array<std::size_t, 3>{40, 5, 5};
  auto a = split_personas(ps, spec, 3);
  auto b = split_personas(ps, spec, 3);
  CHECK(a.train == b.train);
  CHECK(a.dev.size() == 5);
  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.dev, &a.test})
    for (const auto& p : *part) ids.insert(p.id);
  CHECK(ids.size() == 50);
  CHECK(a.test.front().split == std::optional<std::string>("test"));
  spec.counts = std::array<std::size_t, 3>{40, 10, 5};
  CHECK_THROWS_AS(split_personas(ps, spec, 3), InvalidArgument);
  auto ratio = split_personas(ps, SplitSpec{}, 3);
  CHECK(ratio.dev.size() == 3);  // 50 * 120/2036 rounds to 3
  CHECK(parse_split("8,1,1").counts.has_value());
  CHECK_THROWS_AS(parse_split("8,1"), InvalidArgument);
}

TEST_CASE("persona builder keeps only well-aligned situations") {
  Gateway gw;
  test::bind_synthetic(gw);
  PersonaParams params;
  params.limit = 12;
  auto r = build_personas(params, gw);
  CHECK(r.personas.size() == 12);
  CHECK(r.rejected_alignment > 0);
  std::set<std::string> ids;
  for (const auto& p : r.personas) {
    CHECK(p.alignment.value_or(0) >= kMinAlignment);
    CHECK_NOTHROW(validate_persona(p));
    CHECK(p.split.has_value());
    ids.insert(p.id);
  }
  CHECK(ids.size() == r.personas.size());
  auto again = build_personas(params, gw);
  CHECK(again.personas == r.personas);
}
