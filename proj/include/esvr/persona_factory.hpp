#pragma once

// Seeker persona pipeline: situations per (category, value), alignment
// filtering, emotion vote, demographics and dataset splits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esvr/corpus.hpp"
#include "esvr/gateway.hpp"
#include "esvr/value_core.hpp"

namespace esvr {

struct SituationBatch {
  std::vector<std::string> situations;
  std::size_t shortfall = 0;  // how many below the minimum of 10
  std::size_t dropped = 0;    // lines beyond the maximum of 30
};

inline constexpr std::size_t kMinSituations = 10;
inline constexpr std::size_t kMaxSituations = 30;

// Splits the reply on newlines, strips list markers, drops blanks and
// duplicates, keeps at most 30. Fewer than 10 is recorded, not fatal.
SituationBatch parse_situations(const std::string& reply);
SituationBatch generate_situations(const ProblemCategory& category, ValueId value, Gateway& gw,
                                   const ValueCatalog& catalog = ValueCatalog::builtin());

// Reads "Rating: k" with k in 1..5; anything else raises ParseError.
int parse_rating(const std::string& reply);
// Mean of `samples` judge ratings, rounded half up.
int score_alignment(const std::string& situation, ValueId value, Gateway& gw, int samples = 1,
                    const ValueCatalog& catalog = ValueCatalog::builtin());
inline constexpr int kMinAlignment = 4;

// Plurality over n samples; a tie goes to the emotion whose first vote came
// earliest in sample order. Unparseable samples are ignored; if none parse,
// ParseError.
Emotion vote_emotion(const std::vector<std::string>& replies);
Emotion label_emotion(const std::string& situation, Gateway& gw, int n = 5);

Demographics parse_demographics(const std::string& reply);
Demographics generate_demographics(const std::string& problem_category, const std::string& situation, Gateway& gw);

struct SplitSpec {
  // Either explicit counts or ratios (summing to 1).
  std::optional<std::array<std::size_t, 3>> counts;
  std::array<double, 3> ratios = {1796.0 / 2036.0, 120.0 / 2036.0, 120.0 / 2036.0};
};

struct Splits {
  std::vector<Persona> train;
  std::vector<Persona> dev;
  std::vector<Persona> test;
};

// Seeded shuffle, then slice into train/dev/test. Counts beyond the
// population raise InvalidArgument.
Splits split_personas(const std::vector<Persona>& personas, const SplitSpec& spec, std::uint64_t seed);
SplitSpec parse_split(const std::string& text);

struct PersonaParams {
  std::optional<std::size_t> limit;  // stop after this many retained personas
  int alignment_samples = 1;
  int emotion_votes = 5;
  int jobs = 1;
  std::uint64_t seed = 0;
  SplitSpec split;
};

struct PersonaBuildResult {
  std::vector<Persona> personas;  // with split assigned
  std::size_t generated = 0;
  std::size_t rejected_alignment = 0;
  std::size_t shortfall_batches = 0;
  std::size_t combinations = 0;
};

PersonaBuildResult build_personas(const PersonaParams& params, Gateway& gw,
                                  const ValueCatalog& catalog = ValueCatalog::builtin());

}  // namespace esvr
