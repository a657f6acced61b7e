#include "esvr/persona_factory.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

#include "esvr/error.hpp"
#include "esvr/prompts.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "persona_factory";

std::string strip_list_marker(std::string s) {
  s = util::trim(s);
  static const std::regex marker(R"(^(?:[-*•]+|\(?\d{1,3}[.)]|\d{1,3}\s*-)\s*)");
  s = std::regex_replace(s, marker, "", std::regex_constants::format_first_only);
  s = util::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = util::trim(s.substr(1, s.size() - 2));
  return s;
}
}  // namespace

SituationBatch parse_situations(const std::string& reply) {
  SituationBatch b;
  std::set<std::string> seen;
  for (const auto& line : util::split_lines(reply)) {
    std::string s = strip_list_marker(line);
    if (s.empty() || !seen.insert(s).second) continue;
    if (b.situations.size() == kMaxSituations) {
      ++b.dropped;
      continue;
    }
    b.situations.push_back(std::move(s));
  }
  if (b.situations.size() < kMinSituations) b.shortfall = kMinSituations - b.situations.size();
  return b;
}

SituationBatch generate_situations(const ProblemCategory& category, ValueId value, Gateway& gw,
                                   const ValueCatalog& catalog) {
  return parse_situations(gw.chat("persona", prompts::situations(category, value, catalog)));
}

int parse_rating(const std::string& reply) {
  static const std::regex re(R"(rating\s*[:：]\s*\(?\s*(-?\d+))", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(reply, m, re)) throw ParseError(kModule, "no 'Rating: k' in alignment reply", reply);
  int k = std::stoi(m[1].str());
  if (k < 1 || k > 5) throw ParseError(kModule, "alignment rating " + std::to_string(k) + " outside 1..5", reply);
  return k;
}

int score_alignment(const std::string& situation, ValueId value, Gateway& gw, int samples,
                    const ValueCatalog& catalog) {
  if (samples < 1) throw InvalidArgument(kModule, "alignment samples must be >= 1");
  auto replies = gw.chat_n("judge", prompts::alignment(situation, value, catalog), samples);
  int total = 0;
  for (const auto& r : replies) total += parse_rating(r);
  return static_cast<int>(std::floor(static_cast<double>(total) / samples + 0.5));
}

Emotion vote_emotion(const std::vector<std::string>& replies) {
  std::array<int, kEmotionCount> votes{};
  std::array<std::size_t, kEmotionCount> first{};
  first.fill(SIZE_MAX);
  std::size_t parsed = 0;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    auto e = parse_emotion(replies[i]);
    if (!e) {
      // Accept a reply that names exactly one emotion inside a sentence.
      std::optional<Emotion> found;
      int hits = 0;
      for (auto cand : all_emotions()) {
        if (util::icontains(replies[i], emotion_name(cand))) {
          found = cand;
          ++hits;
        }
      }
      if (hits == 1) e = found;
    }
    if (!e) continue;
    ++parsed;
    auto k = static_cast<std::size_t>(*e);
    ++votes[k];
    if (first[k] == SIZE_MAX) first[k] = i;
  }
  if (parsed == 0)
    throw ParseError(kModule, "no emotion label could be parsed from " + std::to_string(replies.size()) + " samples",
                     replies.empty() ? std::string() : replies.front());
  std::size_t best = 0;
  for (std::size_t k = 1; k < kEmotionCount; ++k) {
    if (votes[k] > votes[best] || (votes[k] == votes[best] && first[k] < first[best])) best = k;
  }
  return all_emotions()[best];
}

Emotion label_emotion(const std::string& situation, Gateway& gw, int n) {
  if (n < 1) throw InvalidArgument(kModule, "emotion votes must be >= 1");
  return vote_emotion(gw.chat_n("judge", prompts::emotion_label(situation), n));
}

Demographics parse_demographics(const std::string& reply) {
  Demographics d;
  bool age = false, gender = false, occupation = false;
  for (const auto& raw : util::split_lines(reply)) {
    std::string line = strip_list_marker(raw);
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = util::to_lower(util::trim(line.substr(0, colon)));
    std::string value = util::trim(line.substr(colon + 1));
    if (value.empty()) continue;
    if (key == "age" || key == "age range") {
      d.age_range = value;
      age = true;
    } else if (key == "gender") {
      d.gender = value;
      gender = true;
    } else if (key == "occupation") {
      d.occupation = value;
      occupation = true;
    }
  }
  if (!age) throw ParseError(kModule, "demographics reply lacks Age", reply);
  if (!gender) throw ParseError(kModule, "demographics reply lacks Gender", reply);
  if (!occupation) throw ParseError(kModule, "demographics reply lacks Occupation", reply);
  return d;
}

Demographics generate_demographics(const std::string& problem_category, const std::string& situation, Gateway& gw) {
  return parse_demographics(gw.chat("persona", prompts::demographics(problem_category, situation)));
}

Splits split_personas(const std::vector<Persona>& personas, const SplitSpec& spec, std::uint64_t seed) {
  const std::size_t n = personas.size();
  std::array<std::size_t, 3> sizes{};
  if (spec.counts) {
    sizes = *spec.counts;
    if (sizes[0] + sizes[1] + sizes[2] > n)
      throw InvalidArgument(kModule, "split counts " + std::to_string(sizes[0]) + "/" + std::to_string(sizes[1]) +
                                         "/" + std::to_string(sizes[2]) + " exceed population " + std::to_string(n));
  } else {
    double sum = spec.ratios[0] + spec.ratios[1] + spec.ratios[2];
    for (double r : spec.ratios)
      if (!(r >= 0.0)) throw InvalidArgument(kModule, "split ratios must be nonnegative");
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument(kModule, "split ratios must sum to 1");
    sizes[1] = static_cast<std::size_t>(std::llround(spec.ratios[1] * static_cast<double>(n)));
    sizes[2] = static_cast<std::size_t>(std::llround(spec.ratios[2] * static_cast<double>(n)));
    if (sizes[1] + sizes[2] > n) sizes[2] = n - sizes[1];
    sizes[0] = n - sizes[1] - sizes[2];
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  util::Rng rng(util::derive_seed(seed, "persona_split"));
  rng.shuffle(order);

  Splits s;
  std::size_t pos = 0;
  auto take = [&](std::vector<Persona>& dst, std::size_t count, const char* name) {
    for (std::size_t i = 0; i < count; ++i) {
      Persona p = personas[order[pos++]];
      p.split = name;
      dst.push_back(std::move(p));
    }
  };
  take(s.train, sizes[0], "train");
  take(s.dev, sizes[1], "dev");
  take(s.test, sizes[2], "test");
  return s;
}

SplitSpec parse_split(const std::string& text) {
  auto parts = util::split(text, ',');
  if (parts.size() == 1) parts = util::split(text, '/');
  if (parts.size() != 3) throw InvalidArgument(kModule, "split must have three parts, e.g. 1796,120,120 or 0.8,0.1,0.1");
  SplitSpec spec;
  bool integral = std::all_of(parts.begin(), parts.end(), [](const std::string& p) {
    std::string t = util::trim(p);
    return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
  });
  try {
    if (integral) {
      spec.counts = std::array<std::size_t, 3>{std::stoul(parts[0]), std::stoul(parts[1]), std::stoul(parts[2])};
    } else {
      spec.ratios = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    }
  } catch (const std::exception&) {
    throw InvalidArgument(kModule, "cannot parse split '" + text + "'");
  }
  return spec;
}

PersonaBuildResult build_personas(const PersonaParams& params, Gateway& gw, const ValueCatalog& catalog) {
  PersonaBuildResult r;
  const auto& cats = problem_categories();
  const std::size_t combos = cats.size() * kValueCount;
  std::vector<Persona> kept;

  for (std::size_t k = 0; k < combos; ++k) {
    if (params.limit && kept.size() >= *params.limit) break;
    const std::size_t ci = k % cats.size();
    const ValueId value = value_at(k / cats.size());
    const ProblemCategory& cat = cats[ci];
    ++r.combinations;

    SituationBatch batch = generate_situations(cat, value, gw, catalog);
    r.generated += batch.situations.size();
    if (batch.shortfall > 0) ++r.shortfall_batches;

    std::vector<std::optional<Persona>> slots(batch.situations.size());
    util::parallel_for(batch.situations.size(), params.jobs, [&](std::size_t i) {
      const std::string& situation = batch.situations[i];
      int score = score_alignment(situation, value, gw, params.alignment_samples, catalog);
      if (score < kMinAlignment) return;
      Persona p;
      p.id = "c" + std::to_string(ci) + "-v" + std::to_string(index_of(value)) + "-s" + std::to_string(i);
      p.problem_category = cat.name;
      for (const auto& sub : cat.subcategories) {
        if (util::icontains(situation, sub)) {
          p.subcategory = sub;
          break;
        }
      }
      p.situation = situation;
      p.source_value = value;
      p.alignment = score;
      p.emotion = label_emotion(situation, gw, params.emotion_votes);
      p.demographics = generate_demographics(cat.name, situation, gw);
      slots[i] = std::move(p);
    });
    for (auto& s : slots) {
      if (!s) {
        ++r.rejected_alignment;
        continue;
      }
      kept.push_back(std::move(*s));
    }
  }
  if (params.limit && kept.size() > *params.limit) kept.resize(*params.limit);

  Splits splits = split_personas(kept, params.split, params.seed);
  // Output keeps generation order; the split only labels each persona.
  std::map<std::string, std::string> assignment;
  for (const auto* part : {&splits.train, &splits.dev, &splits.test})
    for (const auto& p : *part) assignment[p.id] = *p.split;
  for (auto& p : kept) p.split = assignment.at(p.id);
  r.personas = std::move(kept);
  return r;
}

}  // namespace esvr
