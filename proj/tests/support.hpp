#pragma once

// Fixture builders shared by the unit and acceptance binaries.

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "esvr/backends.hpp"
#include "esvr/corpus.hpp"
#include "esvr/gateway.hpp"
#include "esvr/prompts.hpp"
#include "esvr/simulation.hpp"
#include "esvr/util.hpp"
#include "esvr/value_core.hpp"
#include "oracles.hpp"

namespace esvr::test {

namespace fs = std::filesystem;

inline ValueProbVector probs(std::initializer_list<ValueId> present, double hi = 0.9, double lo = 0.1) {
  ValueProbVector p = ValueProbVector::uniform(lo);
  for (auto v : present) p.set(v, hi);
  return p;
}

inline TurnLabel label(double sentiment, std::initializer_list<ValueId> present = {}) {
  return TurnLabel{sentiment, probs(present)};
}

inline Persona persona(std::string id = "p0") {
  Persona p;
  p.id = std::move(id);
  p.problem_category = problem_categories().front().name;
  p.emotion = Emotion::Sadness;
  p.situation = "I keep thinking about how things ended and I cannot sleep.";
  p.demographics = {"30s", "Female", "Teacher"};
  return p;
}

inline SupporterOutput output(bool use_reference, std::string response) {
  SupporterOutput s;
  s.step1 = "The patient is upset.";
  s.step2 = "The reference invites reflection.";
  s.step3 = use_reference ? "Yes, it fits." : "No, it does not fit.";
  s.use_reference = use_reference;
  s.strategy = Strategy::Reflection;
  s.response = std::move(response);
  return s;
}

struct TurnSpec {
  std::vector<ValueId> targets;
  std::optional<TurnLabel> seeker;
  bool alternative = true;
  std::vector<std::optional<TurnLabel>> rollout;  // seeker labels after the alternative
};

inline Transcript transcript(const std::string& id, const std::vector<TurnSpec>& turns) {
  Transcript t;
  t.id = id;
  t.persona = persona("persona-" + id);
  t.opening = {Utterance{Role::Supporter, std::string(kSupporterOpener), std::nullopt, std::nullopt},
               Utterance{Role::Seeker, t.persona.situation, std::nullopt, label(0.2)}};
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const TurnSpec& s = turns[i];
    TurnRecord r;
    r.index = static_cast<int>(i);
    r.targets = s.targets;
    r.reference = "reference " + std::to_string(i);
    r.primary = output(true, "primary " + std::to_string(i));
    r.seeker_reply = Utterance{Role::Seeker, "seeker " + std::to_string(i), std::nullopt, s.seeker};
    if (s.alternative) {
      r.alternative = output(false, "alternative " + std::to_string(i));
      for (std::size_t k = 0; k < s.rollout.size(); ++k) {
        if (k > 0)
          r.alternative_rollout.push_back(
              Utterance{Role::Supporter, "rollout supporter " + std::to_string(k), Strategy::Question, std::nullopt});
        r.alternative_rollout.push_back(
            Utterance{Role::Seeker, "rollout seeker " + std::to_string(k), std::nullopt, s.rollout[k]});
      }
    }
    t.turns.push_back(std::move(r));
  }
  t.termination = TerminationReason::TurnCap;
  return t;
}

inline TurnLabel random_label(util::Rng& rng) {
  std::array<double, kValueCount> p{};
  for (auto& x : p) x = rng.uniform01();
  return TurnLabel{rng.uniform01(), ValueProbVector(p)};
}

inline std::optional<TurnLabel> maybe_label(util::Rng& rng) {
  if (rng.uniform01() < 0.15) return std::nullopt;
  return random_label(rng);
}

inline std::vector<ValueId> random_targets(util::Rng& rng) {
  std::vector<ValueId> all(all_values().begin(), all_values().end());
  rng.shuffle(all);
  all.resize(1 + rng.uniform_index(3));
  return all;
}

inline Transcript random_transcript(util::Rng& rng, const std::string& id) {
  std::vector<TurnSpec> specs(1 + rng.uniform_index(6));
  for (auto& s : specs) {
    s.targets = random_targets(rng);
    s.seeker = maybe_label(rng);
    s.alternative = rng.uniform01() < 0.7;
    const std::size_t n = rng.uniform_index(5);
    for (std::size_t k = 0; k < n; ++k) s.rollout.push_back(maybe_label(rng));
  }
  return transcript(id, specs);
}

// Seeker labels after turn t read straight off the transcript layout, in the
// plain form the reward oracle takes.
inline std::vector<std::optional<oracle::RawLabel>> oracle_future(const Transcript& tr, int t, bool alternative) {
  std::vector<std::optional<TurnLabel>> labels;
  if (alternative) {
    for (const auto& u : tr.turns.at(static_cast<std::size_t>(t)).alternative_rollout)
      if (u.role == Role::Seeker) labels.push_back(u.label);
  } else {
    for (std::size_t i = static_cast<std::size_t>(t); i < tr.turns.size(); ++i) labels.push_back(tr.turns[i].seeker_reply.label);
  }
  std::vector<std::optional<oracle::RawLabel>> out;
  for (const auto& l : labels) {
    if (!l) {
      out.push_back(std::nullopt);
      continue;
    }
    oracle::RawLabel r{l->sentiment, {}};
    for (std::size_t v = 0; v < kValueCount; ++v) r.probs[v] = l->values.data()[v];
    out.push_back(r);
  }
  return out;
}

inline std::vector<int> oracle_targets(const std::vector<ValueId>& targets) {
  std::vector<int> out;
  for (auto v : targets) out.push_back(static_cast<int>(index_of(v)));
  return out;
}

// Binds every pipeline role to one scripted backend.
inline std::shared_ptr<ScriptedBackend> bind_all(Gateway& gw, ScriptedBackend::Handler h,
                                                 const std::string& name = "scripted", int concurrency = 4) {
  auto b = std::make_shared<ScriptedBackend>(std::move(h));
  BackendConfig cfg;
  cfg.name = name;
  cfg.kind = "scripted";
  cfg.model = "m";
  cfg.max_concurrency = concurrency;
  gw.add_backend(cfg, b);
  for (const char* r : {"tvd", "rg", "supporter", "seeker", "sentiment", "values", "judge", "persona"})
    gw.bind_role(r, RoleBinding{name, "", 0.7, 512});
  return b;
}

inline void bind_synthetic(Gateway& gw, const std::string& name = "synthetic") {
  BackendConfig cfg;
  cfg.name = name;
  cfg.kind = "synthetic";
  cfg.model = "synthetic";
  gw.add_backend(cfg, std::make_shared<SyntheticBackend>());
  for (const char* r : {"tvd", "rg", "supporter", "seeker", "sentiment", "values", "judge", "persona"})
    gw.bind_role(r, RoleBinding{name, "", 0.7, 512});
}

// Text of the last message of a chat payload.
inline std::string last_content(const json& payload) {
  return payload.at("messages").back().at("content").get<std::string>();
}
inline std::string system_content(const json& payload) {
  return payload.at("messages").front().at("content").get<std::string>();
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("esvr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace esvr::test
