// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "esvr/app.hpp"
#include "esvr/error.hpp"
#include "esvr/eval_bench.hpp"
#include "esvr/manifest.hpp"
#include "esvr/preference.hpp"
#include "esvr/stats.hpp"
#include "esvr/thread_miner.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace esvr;
using test::label;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    if (ok()) return std::to_string(checks_) + " checks";
    std::string s = std::to_string(failed_) + "/" + std::to_string(checks_) + " checks failed";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }
  void note(std::string n) { notes_ += (notes_.empty() ? "" : ", ") + std::move(n); }
  const std::string& notes() const { return notes_; }

 private:
  std::size_t checks_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

constexpr ValueId A = ValueId::Face;
constexpr ValueId B = ValueId::Tradition;
constexpr ValueId C = ValueId::Humility;

// ---------------------------------------------------------------------------
// 1. value reward

void ac1(Checker& c) {
  RewardParams p = RewardParams::value_preset();
  std::vector<std::optional<TurnLabel>> f = {label(0.8, {A, B}), label(0.8, {A}), label(0.8, {C})};
  c.expect(value_reward(f, ValueSet{A, B}, p) == 3.0, "hand case gamma=1");
  p.gamma = 0.9;
  c.expect(std::abs(value_reward(f, ValueSet{A, B}, p) - 2.9) < 1e-12, "hand case gamma=0.9");

  const auto t0 = Clock::now();
  util::Rng rng(20241);
  std::size_t evaluated = 0;
  for (int i = 0; i < 1200; ++i) {
    auto tr = test::random_transcript(rng, "a" + std::to_string(i));
    RewardParams q;
    q.gamma = 0.3 + 0.7 * rng.uniform01();
    q.h = rng.uniform01() < 0.25 ? std::nullopt : std::optional<int>(1 + static_cast<int>(rng.uniform_index(6)));
    q.binarize_threshold = 0.2 + 0.6 * rng.uniform01();
    if (rng.uniform01() < 0.5) q.positivity_gate = rng.uniform01();
    for (int t = 0; t < tr.turn_count(); ++t) {
      const auto& turn = tr.turns[static_cast<std::size_t>(t)];
      auto targets = test::oracle_targets(turn.targets);
      for (bool alt : {false, true}) {
        if (alt && !turn.alternative) continue;
        double got = value_reward(tr, t, alt ? Branch::Alternative : Branch::Primary, q);
        double want = oracle::value_reward(test::oracle_future(tr, t, alt), targets, q.h, q.gamma,
                                           q.binarize_threshold, q.positivity_gate);
        c.expect(got == want, tr.id + " turn " + std::to_string(t) + (alt ? " alt" : " primary"));
        ++evaluated;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 5.0, "1200 transcripts took " + std::to_string(elapsed) + " s");
  c.note(std::to_string(evaluated) + " branch rewards vs oracle in " + std::to_string(elapsed).substr(0, 5) + " s");
}

// ---------------------------------------------------------------------------
// 2. preference pairs

void ac2(Checker& c) {
  // T1 turn 0 {A,B,C}: primary 2+2 = 4, alternative 0 -> pair, initial chosen.
  // T1 turn 1 {A}: primary 1, alternative 3 -> |diff| = 2, no pair.
  auto t1 = test::transcript("T1", {{{A, B, C}, label(0.8, {A, B}), true, {label(0.8)}},
                                    {{A}, label(0.8, {A, B}), true, {label(0.8, {A}), label(0.8, {A}), label(0.8, {A})}}});
  // T2 turn 0 {B}: primary 0, alternative capped at 3 of 4 hits -> pair, alternative chosen.
  // T2 turn 1 {A,C}: primary 2, alternative 0 -> no pair.
  auto t2 = test::transcript(
      "T2", {{{B}, label(0.8), true, {label(0.8, {B}), label(0.8, {B}), label(0.8, {B}), label(0.8, {B})}},
             {{A, C}, label(0.8, {A, C}), true, {label(0.8)}}});
  auto res = build_pairs({t1, t2}, RewardParams::value_preset(), RewardKind::Value);
  std::map<std::string, const PreferencePair*> by_id;
  for (const auto& pr : res.pairs) by_id[pr.id] = &pr;
  c.expect(res.pairs.size() == 2, "expected 2 pairs, got " + std::to_string(res.pairs.size()));
  c.expect(by_id.count("T1#0") && by_id["T1#0"]->chosen_reward == 4.0 && !by_id["T1#0"]->chosen_is_alternative &&
               by_id["T1#0"]->chosen.response == "primary 0",
           "T1#0 chooses the initial response at 4 vs 0");
  c.expect(by_id.count("T2#0") && by_id["T2#0"]->chosen_reward == 3.0 && by_id["T2#0"]->chosen_is_alternative &&
               by_id["T2#0"]->chosen.response == "alternative 0",
           "T2#0 chooses the alternative at 3 vs 0");
  c.expect(!by_id.count("T1#1") && !by_id.count("T2#1"), "gaps of exactly t_diff emit nothing");
  c.expect(res.chosen_initial == 1 && res.chosen_alternative == 1, "branch counts");

  std::vector<Transcript> corpus = {t1, t2};
  util::Rng rng(99);
  for (int i = 0; i < 200; ++i) corpus.push_back(test::random_transcript(rng, "r" + std::to_string(i)));
  std::size_t prev = SIZE_MAX;
  for (double td : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
    RewardParams p = RewardParams::value_preset();
    p.t_diff = td;
    auto r = build_pairs(corpus, p, RewardKind::Value, nullptr, 2);
    c.expect(r.pairs.size() <= prev, "pair count rises at t_diff " + std::to_string(td));
    prev = r.pairs.size();
    std::size_t expected = 0;
    for (const auto& b : r.rewards)
      if (std::abs(b.primary - b.alternative) > td) ++expected;
    c.expect(r.pairs.size() == expected, "pair count matches the reward gaps");
    for (const auto& pr : r.pairs) {
      c.expect(pr.chosen_reward > pr.rejected_reward && pr.chosen_reward - pr.rejected_reward > td,
               pr.id + " gap");
      c.expect(pr.chosen.use_reference != pr.rejected.use_reference, pr.id + " branches differ");
    }
    c.note("t_diff " + std::to_string(td).substr(0, 3) + ": " + std::to_string(r.pairs.size()));
  }
}

// ---------------------------------------------------------------------------
// 3. thread mining

ThreadNode tnode(const std::string& id, AuthorRole role, std::optional<std::string> parent) {
  ThreadNode n;
  n.id = id;
  n.author_role = role;
  n.text = "text of " + id;
  n.parent = std::move(parent);
  n.score = 5;
  n.upvote_ratio = 0.9;
  return n;
}

LabeledTree random_tree(util::Rng& rng, const std::string& id) {
  std::vector<ThreadNode> nodes = {tnode("n0", AuthorRole::Op, std::nullopt)};
  std::vector<AuthorRole> roles = {AuthorRole::Op};
  const std::size_t n = 3 + rng.uniform_index(16);
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t parent = rng.uniform_index(i);
    AuthorRole other = roles[parent] == AuthorRole::Op ? AuthorRole::Commenter : AuthorRole::Op;
    AuthorRole role = rng.uniform01() < 0.1 ? roles[parent] : other;
    roles.push_back(role);
    nodes.push_back(tnode("n" + std::to_string(i), role, nodes[parent].id));
  }
  LabeledTree lt{ThreadTree::build(id, nodes), {}};
  for (const auto& nd : nodes) {
    std::array<double, kValueCount> p{};
    for (auto& x : p) x = rng.uniform01() < 0.15 ? 0.5 + 0.5 * rng.uniform01() : 0.5 * rng.uniform01();
    lt.labels.emplace(nd.id, TurnLabel{rng.uniform01(), ValueProbVector(p)});
  }
  return lt;
}

// Independent enumeration of the expected examples: key -> targets.
std::map<std::vector<std::string>, std::vector<int>> expected_examples(const LabeledTree& lt, Setting setting) {
  const ThreadTree& tree = lt.tree;
  auto targets_of = [&](const std::string& id) {
    const auto& l = lt.labels.at(id);
    std::vector<std::pair<double, int>> vs;
    for (int v = 0; v < 20; ++v)
      if (l.values.data()[static_cast<std::size_t>(v)] >= 0.5) vs.push_back({-l.values.data()[static_cast<std::size_t>(v)], v});
    std::sort(vs.begin(), vs.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < vs.size() && i < 3; ++i) out.push_back(vs[i].second);
    return out;
  };
  auto eligible = [&](const std::string& o) { return lt.labels.at(o).sentiment >= 0.5 && !targets_of(o).empty(); };
  std::map<std::vector<std::string>, std::vector<int>> out;
  auto is = [&](const std::string& id, AuthorRole r) { return tree.node(id).author_role == r; };
  if (setting == Setting::SingleTurn) {
    const auto& root = tree.root();
    for (const auto& cid : root.children) {
      if (!is(cid, AuthorRole::Commenter)) continue;
      for (const auto& oid : tree.node(cid).children)
        if (is(oid, AuthorRole::Op) && eligible(oid)) out[{root.id, cid, oid}] = targets_of(oid);
    }
    return out;
  }
  // Maximal alternating root paths ending on an op node, length >= 5.
  std::vector<std::vector<std::string>> full;
  std::function<void(std::vector<std::string>&)> go = [&](std::vector<std::string>& path) {
    const auto& last = tree.node(path.back());
    bool extended = false;
    if (last.author_role == AuthorRole::Op) {
      for (const auto& cid : last.children) {
        if (!is(cid, AuthorRole::Commenter)) continue;
        for (const auto& oid : tree.node(cid).children) {
          if (!is(oid, AuthorRole::Op)) continue;
          extended = true;
          path.push_back(cid);
          path.push_back(oid);
          go(path);
          path.pop_back();
          path.pop_back();
        }
      }
      if (!extended && path.size() >= 5) full.push_back(path);
    }
  };
  std::vector<std::string> start = {tree.root().id};
  go(start);
  for (const auto& p : full)
    for (std::size_t t = 0; t + 2 < p.size(); t += 2)
      if (eligible(p[t + 2])) out[std::vector<std::string>(p.begin(), p.begin() + static_cast<long>(t) + 3)] = targets_of(p[t + 2]);
  return out;
}

void ac3(Checker& c) {
  util::Rng rng(4242);
  std::size_t tvd_total = 0, dpo_total = 0;
  for (int i = 0; i < 600; ++i) {
    auto lt = random_tree(rng, "tree" + std::to_string(i));
    for (Setting s : {Setting::SingleTurn, Setting::MultiTurn}) {
      const std::string tag = lt.tree.id() + (s == Setting::SingleTurn ? " single" : " multi");
      MiningParams mp;
      auto paths = labeled_paths(lt, s);
      auto tvd = build_tvd_examples(paths, mp);
      auto sft = build_rg_sft(paths, mp);
      auto want = expected_examples(lt, s);
      std::map<std::vector<std::string>, std::vector<int>> got;
      for (const auto& e : sft) {
        auto key = e.node_ids;
        key.push_back(e.completion_id);
        key.push_back(e.id.substr(e.id.find('>') + 1));
        got[key] = test::oracle_targets(e.targets);
        c.expect(!e.history.empty() && e.history.back().role == Role::Seeker, tag + " history ends on the seeker");
        c.expect(e.completion == lt.tree.node(e.completion_id).text, tag + " completion text");
      }
      c.expect(got == want, tag + " tvd/sft examples differ from the checker");
      c.expect(tvd.size() == sft.size(), tag + " tvd and sft counts");
      for (std::size_t k = 0; k < tvd.size() && k < sft.size(); ++k)
        c.expect(tvd[k].targets == sft[k].targets && tvd[k].history == sft[k].history, tag + " tvd/sft alignment");
      tvd_total += tvd.size();

      auto dpo = build_rg_dpo({lt}, s, mp, 7);
      auto again = build_rg_dpo({lt}, s, mp, 7);
      c.expect(dpo == again, tag + " dpo is deterministic for a seed");
      for (const auto& pr : dpo) {
        const std::string oid = pr.id.substr(pr.id.find('>') + 1);
        const auto& ot = lt.tree.node(pr.node_ids.back());
        const auto& chosen = lt.tree.node(pr.chosen_id);
        const auto& rejected = lt.tree.node(pr.rejected_id);
        c.expect(ot.author_role == AuthorRole::Op, tag + " dpo history ends on an op turn");
        c.expect(chosen.parent == ot.id && rejected.parent == ot.id && pr.chosen_id != pr.rejected_id,
                 tag + " dpo siblings");
        c.expect(chosen.author_role == AuthorRole::Commenter && rejected.author_role == AuthorRole::Commenter,
                 tag + " dpo commenters");
        c.expect(lt.tree.node(oid).parent == pr.chosen_id && lt.labels.at(oid).sentiment >= 0.5,
                 tag + " dpo positive reply");
        std::array<double, kValueCount> vmax{};
        bool has_reply = false;
        for (const auto& g : rejected.children) {
          if (lt.tree.node(g).author_role != AuthorRole::Op) continue;
          has_reply = true;
          for (std::size_t v = 0; v < kValueCount; ++v)
            vmax[v] = std::max(vmax[v], lt.labels.at(g).values.data()[v]);
        }
        c.expect(has_reply, tag + " rejected sibling has an op reply");
        c.expect(!pr.targets.empty() && pr.targets.size() <= 3, tag + " dpo target count");
        const auto& next = lt.labels.at(oid).values;
        for (std::size_t k = 0; k < pr.targets.size(); ++k) {
          auto v = pr.targets[k];
          c.expect(next[v] >= 0.5 && vmax[index_of(v)] < 0.5, tag + " dpo target is distinct");
          if (k > 0) c.expect(next[pr.targets[k - 1]] >= next[v], tag + " dpo targets ranked");
        }
      }
      dpo_total += dpo.size();
    }
  }
  c.note("600 trees, " + std::to_string(tvd_total) + " tvd examples, " + std::to_string(dpo_total) + " dpo pairs");
}

// ---------------------------------------------------------------------------
// 4. termination

void add_scripted(Gateway& gw, const std::string& name, ScriptedBackend::Handler h) {
  BackendConfig cfg;
  cfg.name = name;
  cfg.kind = "scripted";
  gw.add_backend(cfg, std::make_shared<ScriptedBackend>(std::move(h)));
}

// The seeker says `replies[i]` on its i-th call, repeating the last one.
Transcript scripted_run(std::vector<std::string> replies, double sentiment, int cap) {
  Gateway gw;
  test::bind_synthetic(gw);
  auto calls = std::make_shared<std::atomic<std::size_t>>(0);
  add_scripted(gw, "seeker", ScriptedBackend::chat([replies, calls](const json&) {
    return replies[std::min(calls->fetch_add(1), replies.size() - 1)];
  }));
  add_scripted(gw, "sent", ScriptedBackend::constant_sentiment(sentiment));
  gw.bind_role("seeker", RoleBinding{"seeker", "", 0.7, 64});
  gw.bind_role("sentiment", RoleBinding{"sent", "", 0.7, 64});
  SimulationParams p;
  p.turn_cap = cap;
  p.with_alternatives = false;
  p.example_dialogue = "Therapist: Hi\nPatient: Hello";
  return run_dialogue(test::persona(), p, gw);
}

void ac4(Checker& c) {
  TerminationRules r;
  c.expect(check_termination("[END]", 0.1, 1, 20, r) == TerminationReason::EndToken, "[END] ends");
  c.expect(check_termination(" [END]\n", 0.9, 20, 20, r) == TerminationReason::EndToken,
           "[END] outranks relief and cap");
  c.expect(check_termination("I will stop here [END]", 0.1, 2, 20, r) == TerminationReason::Ongoing,
           "a reply merely containing [END] continues");
  c.expect(check_termination("Thank you so much.", 0.6, 2, 20, r) == TerminationReason::Relieved, "relief at 0.60");
  c.expect(check_termination("Thank you so much.", 0.59, 2, 20, r) == TerminationReason::Ongoing,
           "no relief at 0.59");
  c.expect(check_termination("I feel much better now.", 0.99, 2, 20, r) == TerminationReason::Ongoing,
           "relief needs gratitude");
  c.expect(check_termination("I really appreciate it.", 0.7, 20, 20, r) == TerminationReason::Relieved,
           "relief outranks the cap");
  c.expect(check_termination("Okay.", 0.3, 20, 20, r) == TerminationReason::TurnCap, "cap at 20");
  c.expect(check_termination("Okay.", 0.3, 19, 20, r) == TerminationReason::Ongoing, "no cap at 19");

  auto end = scripted_run({"I still feel low.", "[END]"}, 0.3, 20);
  c.expect(end.complete && end.termination == TerminationReason::EndToken && end.turn_count() == 2,
           "scripted [END] on turn 2 stops after two seeker turns");
  c.expect(end.turn_count() == 2 && !end.turns[1].seeker_reply.label.has_value(), "bare [END] stays unlabeled");
  auto relieved = scripted_run({"Thank you so much."}, 0.8, 20);
  c.expect(relieved.complete && relieved.termination == TerminationReason::Relieved && relieved.turn_count() == 1,
           "scripted gratitude at 0.8 is relieved");
  c.expect(!relieved.turns.empty() && relieved.turns.back().seeker_reply.label &&
               relieved.turns.back().seeker_reply.label->sentiment >= 0.6,
           "relieved transcripts end at sentiment >= 0.6");
  auto boundary = scripted_run({"Thank you, that really helps."}, 0.6, 6);
  c.expect(boundary.termination == TerminationReason::Relieved && boundary.turn_count() == 1, "relief at exactly 0.60");
  auto below = scripted_run({"Thank you, that really helps."}, 0.59, 6);
  c.expect(below.complete && below.termination == TerminationReason::TurnCap && below.turn_count() == 6,
           "0.59 runs to the cap");
  auto endless = scripted_run({"I am not sure."}, 0.95, 20);
  c.expect(endless.termination == TerminationReason::TurnCap && endless.turn_count() == 20,
           "a never-ending seeker stops at 20 turns");
}

// ---------------------------------------------------------------------------
// 5. ES-Value

std::vector<Utterance> dlg(const std::string& text) {
  return {Utterance{Role::Supporter, "How are you?", std::nullopt, std::nullopt},
          Utterance{Role::Seeker, text, std::nullopt, std::nullopt}};
}

std::pair<std::string, std::string> blocks(const json& payload) {
  std::string u = test::last_content(payload);
  auto a = u.find("2. Dialogue A:");
  auto b = u.find("3. Dialogue B:");
  auto e = u.find("\n\n", b);
  return {u.substr(a + 14, b - a - 14), u.substr(b + 14, e - b - 14)};
}

std::string verdict_reply(const std::string& seeker, const std::string& supporter) {
  return "1. Reasoning: compared.\n2. Results:\n1) Patient's perspective: " + seeker +
         "\n2) Therapist's perspective: " + supporter;
}

void ac5(Checker& c) {
  auto good = dlg("GOOD: I want to be someone my family can rely on."), plain = dlg("I am tired.");
  {
    Gateway gw;
    test::bind_all(gw, ScriptedBackend::cycle({verdict_reply("Dialogue A", "Dialogue A")}));
    auto r = es_value_pairwise(good, plain, gw, 10);
    c.expect(r.seeker.ratio() == 0.5 && r.supporter.ratio() == 0.5, "position-biased judge scores 0.5");
  }
  {
    Gateway gw;
    test::bind_all(gw, ScriptedBackend::chat([](const json& payload) {
      auto [a, b] = blocks(payload);
      std::string v = a.find("GOOD") != std::string::npos ? "Dialogue A" : "Dialogue B";
      return verdict_reply(v, v);
    }));
    auto r = es_value_pairwise(good, plain, gw, 10);
    c.expect(r.seeker.ratio() == 1.0 && r.supporter.ratio() == 1.0, "faithful judge scores 1.0");
  }
  {
    Gateway gw;
    test::bind_all(gw, ScriptedBackend::cycle({verdict_reply("Tie", "Tie")}));
    auto r = es_value_pairwise(good, plain, gw, 10);
    c.expect(r.seeker.ratio() == 0.5 && r.seeker.ties == 10, "tie judge scores 0.5");
  }
  // A judge with a fixed quality per dialogue text, so r(a, b) = 1 - r(b, a).
  Gateway gw;
  test::bind_all(gw, ScriptedBackend::chat([](const json& payload) {
    auto [a, b] = blocks(payload);
    auto q = [](const std::string& s, int salt) { return (std::hash<std::string>{}(s) >> salt) % 3; };
    auto pick = [&](int salt) {
      auto qa = q(a, salt), qb = q(b, salt);
      return qa == qb ? std::string("Tie") : qa > qb ? std::string("Dialogue A") : std::string("Dialogue B");
    };
    return verdict_reply(pick(3), pick(11));
  }));
  for (int i = 0; i < 100; ++i) {
    auto x = dlg("seeker text " + std::to_string(i)), y = dlg("other text " + std::to_string(i * 7 + 1));
    auto xy = es_value_pairwise(x, y, gw, 10);
    auto yx = es_value_pairwise(y, x, gw, 10);
    c.expect(std::abs(*xy.seeker.ratio() + *yx.seeker.ratio() - 1.0) < 1e-12 &&
                 std::abs(*xy.supporter.ratio() + *yx.supporter.ratio() - 1.0) < 1e-12,
             "antisymmetry on pair " + std::to_string(i));
  }
  c.note("100 swapped pairs");
}

// ---------------------------------------------------------------------------
// 6. statistics

void ac6(Checker& c) {
  std::size_t compared = 0;
  for (std::size_t n = 2; n <= 10; ++n) {
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < n; ++i) (mask & (1u << i) ? a : b).push_back(static_cast<double>(i + 1) * 1.5);
      auto got = mann_whitney_u(a, b);
      auto want = oracle::mann_whitney_exact(a, b);
      c.expect(got.exact && got.u_a == want.u_a && std::abs(got.p - want.p) <= 1e-12,
               "MWU mismatch n=" + std::to_string(n) + " mask=" + std::to_string(mask));
      c.expect(got.u_a + got.u_b == static_cast<double>(a.size() * b.size()), "U_a + U_b = n_a n_b");
      ++compared;
    }
  }
  std::vector<double> x = {1, 2, 3, 4, 5};
  c.expect(std::abs(spearman(x, std::vector<double>{2, 4, 6, 8, 10}) - 1.0) < 1e-12, "spearman 1");
  c.expect(std::abs(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) + 1.0) < 1e-12, "spearman -1");
  c.expect(std::abs(spearman(x, std::vector<double>{2, 1, 4, 3, 5}) - 0.8) < 1e-12, "spearman 0.8");
  util::Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a, b;
    const std::size_t n = 3 + rng.uniform_index(8);
    for (std::size_t k = 0; k < n; ++k) {
      a.push_back(rng.uniform01());
      b.push_back(rng.uniform01());
    }
    c.expect(std::abs(spearman(a, b) - oracle::spearman_d2(a, b)) < 1e-12, "spearman vs rank-difference formula");
  }
  c.note(std::to_string(compared) + " tie-free MWU splits");
}

// ---------------------------------------------------------------------------
// 7. effectiveness analysis

Dialogue rated(const std::string& id, std::optional<int> initial, std::optional<int> final_,
               const std::vector<std::string>& seeker_texts) {
  Dialogue d;
  d.id = id;
  d.initial_intensity = initial;
  d.final_intensity = final_;
  for (const auto& s : seeker_texts) {
    d.turns.push_back(Utterance{Role::Supporter, "I hear you.", std::nullopt, std::nullopt});
    d.turns.push_back(Utterance{Role::Seeker, s, std::nullopt, std::nullopt});
  }
  return d;
}

void ac7(Checker& c) {
  // Text tags drive the scripted classifiers: "+" positive, each letter one value.
  Gateway gw;
  test::bind_all(gw, [](const BackendRequest& req) -> json {
    std::string text = req.payload.at("text").get<std::string>();
    const bool positive = text.find('+') != std::string::npos;
    if (req.endpoint == "sentiment") return json{{"score", positive ? 0.9 : 0.1}};
    std::vector<double> p(kValueCount, 0.05);
    for (char ch : text)
      if (ch >= 'a' && ch <= 't') p[static_cast<std::size_t>(ch - 'a')] = 0.95;
    return json{{"probabilities", p}};
  });
  std::vector<Dialogue> ds = {
      // High effectiveness (final 1-2): 3 and 4 positive value hits in the last four seeker turns.
      rated("h1", 5, 1, {"+abcdef", "+a", "+b", "-c", "+c"}),
      rated("h2", 5, 2, {"+ab", "+c", "-", "+d"}),
      // Low effectiveness (final 3-4): 1 and 0.
      rated("l1", 5, 3, {"+a", "-bc"}),
      rated("l2", 5, 4, {"-abc", "+"}),
      // Out of scope.
      rated("s1", 4, 1, {"+abc"}),
      rated("s2", 5, 5, {"+abc"}),
      rated("s3", std::nullopt, 2, {"+abc"}),
  };
  auto r = effectiveness_analysis(ds, EffectivenessParams{}, &gw);
  c.expect(r.high_count == 2 && r.low_count == 2 && r.skipped == 3, "group sizes and skips");
  c.expect(r.high_mean && *r.high_mean == 3.5, "high mean 3.5");
  c.expect(r.low_mean && *r.low_mean == 0.5, "low mean 0.5");
  c.expect(r.test.has_value() && r.test->u_a == 4.0, "MWU on the two groups");
  bool threw = false;
  try {
    effectiveness_analysis({rated("x", 5, 1, {"+a"})}, EffectivenessParams{}, nullptr);
  } catch (const InvalidArgument&) {
    threw = true;
  }
  c.expect(threw, "unlabeled turns without a classifier fail");
  if (r.high_mean && r.low_mean) c.note("high " + std::to_string(*r.high_mean).substr(0, 4) + " low " + std::to_string(*r.low_mean).substr(0, 4));
}

// ---------------------------------------------------------------------------
// 8. end to end

int cli(Checker& c, const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  std::string first = args.size() > 2 ? args[2] : "";
  c.expect(code == kExitOk, "esvr " + first + " exited " + std::to_string(code) + ": " + err.str());
  return code;
}

std::map<std::string, std::string> run_pipeline(Checker& c, const std::string& wd, const std::string& tag) {
  const std::vector<std::string> base = {"--workdir", wd, "--jobs", "2"};
  auto with = [&](std::vector<std::string> tail) {
    std::vector<std::string> a = base;
    a.insert(a.end(), tail.begin(), tail.end());
    return a;
  };
  std::map<std::string, std::string> digests;
  if (cli(c, with({"personas", "--limit", "5", "--out", tag + "personas.jsonl"})) != 0) return digests;
  cli(c, with({"simulate", "--personas", tag + "personas.jsonl", "--out", tag + "cand.jsonl", "--turn-cap", "6"}));
  cli(c, with({"simulate", "--personas", tag + "personas.jsonl", "--out", tag + "base.jsonl", "--turn-cap", "6",
               "--no-alternatives"}));
  cli(c, with({"prefs", "--transcripts", tag + "cand.jsonl", "--out", tag + "dpo.jsonl"}));
  cli(c, with({"eval", "--transcripts", tag + "cand.jsonl", "--against", tag + "base.jsonl", "--value-samples", "4",
               "--out", tag + "report.json"}));
  for (const char* f : {"personas.jsonl", "cand.jsonl", "base.jsonl", "dpo.jsonl", "report.json"}) {
    auto p = std::filesystem::path(wd) / (tag + f);
    if (std::filesystem::exists(p)) digests[f] = util::file_sha256(p);
  }
  return digests;
}

void ac8(Checker& c) {
  test::TempDir dir;
  const auto t0 = Clock::now();
  auto cold = run_pipeline(c, dir.path().string(), "cold-");
  const double cold_s = seconds_since(t0);
  c.expect(cold.size() == 5, "all pipeline outputs written");
  c.expect(cold_s < 60.0, "cold pipeline took " + std::to_string(cold_s) + " s");
  const auto t1 = Clock::now();
  auto warm = run_pipeline(c, dir.path().string(), "warm-");
  const double warm_s = seconds_since(t1);
  c.expect(warm == cold, "warm rerun digests match");
  for (const char* f : {"cold-cand.jsonl", "warm-report.json"}) {
    auto m = read_manifest(dir.path() / (std::string(f) + ".manifest.json"));
    c.expect(verify_manifest(m, dir.path()).empty(), std::string(f) + " manifest verifies");
  }
  auto warm_manifest = read_manifest(dir.path() / "warm-cand.jsonl.manifest.json");
  c.expect(warm_manifest.cache.backend_calls == 0, "warm simulate made no backend calls");
  std::ostringstream out, err;
  c.expect(run_cli({"--workdir", dir.path().string(), "report"}, out, err) == kExitOk, "report verifies all manifests");
  c.note("cold " + std::to_string(cold_s).substr(0, 4) + " s, warm " + std::to_string(warm_s).substr(0, 4) + " s");
}

// ---------------------------------------------------------------------------
// 9. success rate

void ac9(Checker& c) {
  // Turn 0: positive reply without the target. Turn 1: negative reply showing it.
  auto tr = test::transcript("S", {{{A}, label(0.8), false, {}}, {{A}, label(0.2, {A}), false, {}}});
  auto r1 = success_rate({tr}, 1), r2 = success_rate({tr}, 2), r3 = success_rate({tr}, 3);
  c.expect(r1.rate == 0.0, "v=1 rate 0");
  c.expect(r2.rate == 1.0, "v=2 rate 1");
  c.expect(r3.rate == 1.0, "v=3 rate 1");

  util::Rng rng(9);
  std::vector<Transcript> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(test::random_transcript(rng, "m" + std::to_string(i)));
  SuccessRate prev;
  for (int v = 1; v <= 6; ++v) {
    auto r = success_rate(corpus, v);
    c.expect(r.hits <= r.denominator, "hits bounded by the denominator");
    c.expect(r.hits >= prev.hits && r.denominator >= prev.denominator, "windows grow monotonically at v=" + std::to_string(v));
    prev = r;
  }
  // Every reply labeled and positive: the denominator is every turn for every v, so the rate is monotone.
  for (auto& tr : corpus)
    for (auto& turn : tr.turns)
      if (turn.seeker_reply.label)
        turn.seeker_reply.label->sentiment = 0.9;
      else
        turn.seeker_reply.label = label(0.9);
  std::optional<double> last;
  std::size_t denom = 0;
  for (int v = 1; v <= 6; ++v) {
    auto r = success_rate(corpus, v);
    if (v == 1) denom = r.denominator;
    c.expect(r.denominator == denom, "denominator fixed at v=" + std::to_string(v));
    c.expect(r.rate.has_value() && (!last || *r.rate >= *last), "rate monotone at v=" + std::to_string(v));
    last = r.rate;
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Checker&)>>> criteria = {
      {"value reward matches the oracle", ac1},
      {"preference pairs follow the reward gap", ac2},
      {"mined datasets match an independent checker", ac3},
      {"dialogue termination rules", ac4},
      {"ES-Value de-aliasing and antisymmetry", ac5},
      {"Mann-Whitney U and Spearman", ac6},
      {"value-expression effectiveness analysis", ac7},
      {"mock pipeline end to end", ac8},
      {"success rate over valid turns", ac9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checker c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    std::cout << (c.ok() ? "PASS" : "FAIL") << " AC" << (i + 1) << " " << criteria[i].first << " (" << c.summary()
              << (c.notes().empty() ? "" : "; " + c.notes()) << ")\n";
    if (!c.ok()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
