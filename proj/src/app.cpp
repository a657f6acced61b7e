#include "esvr/app.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>

#include <CLI11.hpp>

#include "esvr/config.hpp"
#include "esvr/corpus.hpp"
#include "esvr/error.hpp"
#include "esvr/eval_bench.hpp"
#include "esvr/jsonl.hpp"
#include "esvr/manifest.hpp"
#include "esvr/persona_factory.hpp"
#include "esvr/preference.hpp"
#include "esvr/simulation.hpp"
#include "esvr/thread_miner.hpp"
#include "esvr/util.hpp"

namespace fs = std::filesystem;

namespace esvr {

namespace {

constexpr const char* kModule = "cli_app";

struct GlobalOpts {
  std::string workdir = ".";
  std::optional<int> jobs;
  std::optional<std::int64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::string> config;
  std::optional<std::string> cache_dir;
  bool no_cache = false;
};

// State shared by every subcommand run: resolved paths, config and gateway.
class Run {
 public:
  Run(const GlobalOpts& g, std::string command, std::vector<ConfigOverride> overrides, std::ostream& err)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    workdir_ = fs::absolute(g.workdir).lexically_normal();
    if (!fs::is_directory(workdir_)) throw ConfigError(kModule, "workdir is not a directory: " + g.workdir);
    if (g.seed) overrides.push_back({"run.seed", *g.seed});
    if (g.jobs) overrides.push_back({"run.jobs", *g.jobs});
    if (g.profile) overrides.push_back({"run.backend_profile", *g.profile});
    if (g.cache_dir) overrides.push_back({"cache.dir", *g.cache_dir});
    if (g.no_cache) overrides.push_back({"cache.enabled", false});
    std::optional<fs::path> cfg_path;
    if (g.config) cfg_path = path(*g.config);
    cfg_ = load_config(cfg_path, overrides);
    if (cfg_path) manifest_.inputs[rel(*cfg_path)] = util::file_sha256(*cfg_path);
    if (cfg_.at("run.jobs").get<int>() < 1) throw ConfigError(kModule, "run.jobs must be >= 1");
    auto profile = parse_backend_profile(cfg_.at("run.backend_profile").get<std::string>());
    if (!profile) throw ConfigError(kModule, "run.backend_profile: expected 'mock' or 'live'");
    profile_ = *profile;
    manifest_.command = command_;
    manifest_.seed = cfg_.at("run.seed").get<std::uint64_t>();
    manifest_.config_hash = cfg_.hash();
    manifest_.config = cfg_.values;
    err_ = &err;
  }

  const Config& config() const { return cfg_; }
  const fs::path& workdir() const { return workdir_; }
  int jobs() const { return cfg_.at("run.jobs").get<int>(); }
  std::uint64_t seed() const { return manifest_.seed; }
  RunManifest& manifest() { return manifest_; }

  fs::path path(const std::string& p) const {
    fs::path x(p);
    return (x.is_absolute() ? x : workdir_ / x).lexically_normal();
  }
  std::string rel(const fs::path& p) const {
    auto r = p.lexically_normal().lexically_relative(workdir_);
    return r.empty() ? p.string() : r.generic_string();
  }

  Gateway& gateway() {
    if (!gw_) {
      Gateway::Options o;
      if (cfg_.at("cache.enabled").get<bool>()) o.cache_dir = path(cfg_.at("cache.dir").get<std::string>());
      gw_ = std::make_unique<Gateway>(o);
      std::ostream* err = err_;
      gw_->set_warning_sink([err, this](const std::string& msg) {
        std::lock_guard<std::mutex> lock(err_mu_);
        *err << "warning: " << msg << "\n";
      });
      configure_gateway(*gw_, cfg_, profile_);
    }
    return *gw_;
  }

  fs::path input(const std::string& p) {
    fs::path x = path(p);
    if (!fs::exists(x)) throw FileNotFound("corpus", p);
    manifest_.inputs[rel(x)] = util::file_sha256(x);
    return x;
  }
  fs::path output(const std::string& p) {
    fs::path x = path(p);
    if (x.has_parent_path()) fs::create_directories(x.parent_path());
    outputs_.push_back(x);
    return x;
  }

  void finish(const fs::path& manifest_path) {
    for (const auto& o : outputs_) manifest_.outputs[rel(o)] = util::file_sha256(o);
    manifest_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (gw_) manifest_.cache = gw_->stats();
    write_manifest(manifest_path, manifest_);
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  fs::path workdir_;
  Config cfg_;
  BackendProfile profile_ = BackendProfile::Mock;
  RunManifest manifest_;
  std::unique_ptr<Gateway> gw_;
  std::vector<fs::path> outputs_;
  std::ostream* err_ = nullptr;
  std::mutex err_mu_;
};

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

// ---------------------------------------------------------------------------

struct MineOpts {
  std::string input, submissions, comments, out, effectiveness;
  std::optional<std::string> setting;
  std::optional<std::int64_t> min_score;
  std::optional<double> min_upvote_ratio;
};

int cmd_mine(const GlobalOpts& g, const MineOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ConfigOverride> ov;
  if (o.setting) ov.push_back({"mining.setting", *o.setting});
  if (o.min_score) ov.push_back({"mining.min_score", *o.min_score});
  if (o.min_upvote_ratio) ov.push_back({"mining.min_upvote_ratio", *o.min_upvote_ratio});
  Run run(g, "mine", ov, err);
  const Config& cfg = run.config();
  const QualityFilter filter = quality_filter(cfg);
  const Setting setting = mining_setting(cfg);
  const MiningParams params = mining_params(cfg);
  std::optional<EffectivenessParams> eff_params;
  if (!o.effectiveness.empty()) eff_params = effectiveness_params(cfg);
  if (o.input.empty() == o.submissions.empty())
    throw ConfigError(kModule, "mine needs either --input or --submissions with --comments");

  std::vector<ThreadTree> trees;
  if (!o.input.empty()) {
    trees = read_jsonl<ThreadTree>(run.input(o.input), thread_from_json);
  } else {
    if (o.comments.empty()) throw ConfigError(kModule, "--submissions needs --comments");
    trees = assemble_pushshift(read_jsonl_raw(run.input(o.submissions)), read_jsonl_raw(run.input(o.comments)));
  }
  const std::size_t trees_in = trees.size();
  trees = filter_threads(trees, filter);

  Gateway& gw = run.gateway();
  std::vector<LabeledTree> labeled(trees.size());
  util::parallel_for(trees.size(), run.jobs(), [&](std::size_t i) { labeled[i] = label_tree(trees[i], gw); });
  std::vector<ThreadPath> paths;
  for (const auto& lt : labeled)
    for (auto& p : labeled_paths(lt, setting)) paths.push_back(std::move(p));

  auto tvd = build_tvd_examples(paths, params);
  auto sft = build_rg_sft(paths, params);
  auto dpo = build_rg_dpo(labeled, setting, params, util::derive_seed(run.seed(), "mine"));

  const fs::path dir = run.path(o.out);
  fs::create_directories(dir);
  auto& m = run.manifest();
  m.counts["trees_in"] = trees_in;
  m.counts["trees_kept"] = trees.size();
  m.counts["paths"] = write_records(run.output((dir / "labeled-paths.jsonl").string()), paths,
                                    [](const ThreadPath& p) { return to_json(p); });
  m.counts["tvd"] = write_records(run.output((dir / "tvd.jsonl").string()), tvd,
                                  [](const TvdExample& e) { return to_json(e); });
  m.counts["rg_sft"] = write_records(run.output((dir / "rg-sft.jsonl").string()), sft,
                                     [](const RgSftExample& e) { return to_json(e); });
  m.counts["rg_dpo"] = write_records(run.output((dir / "rg-dpo.jsonl").string()), dpo,
                                     [](const RgDpoPair& e) { return to_json(e); });

  if (eff_params) {
    auto dialogues = read_jsonl<Dialogue>(run.input(o.effectiveness), dialogue_from_json);
    auto r = effectiveness_analysis(dialogues, *eff_params, &gw);
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json report{{"high_mean", opt(r.high_mean)}, {"low_mean", opt(r.low_mean)}, {"high_count", r.high_count},
                {"low_count", r.low_count},      {"skipped", r.skipped}};
    if (r.test) report["test"] = {{"u_a", r.test->u_a}, {"u_b", r.test->u_b}, {"p", r.test->p}, {"exact", r.test->exact}};
    util::write_file_atomic(run.output((dir / "effectiveness.json").string()), report.dump(2) + "\n");
    m.counts["effectiveness_dialogues"] = r.high_count + r.low_count;
  }
  run.finish(dir / "manifest.json");
  out << "mine: " << paths.size() << " paths, " << tvd.size() << " tvd, " << sft.size() << " rg-sft, " << dpo.size()
      << " rg-dpo examples in " << run.rel(dir) << "\n";
  return kExitOk;
}

struct PersonaOpts {
  std::string out = "personas.jsonl";
  std::optional<std::int64_t> limit;
  std::optional<std::string> split;
};

int cmd_personas(const GlobalOpts& g, const PersonaOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ConfigOverride> ov;
  if (o.limit) ov.push_back({"personas.limit", *o.limit});
  if (o.split) ov.push_back({"personas.split", *o.split});
  Run run(g, "personas", ov, err);
  PersonaParams params = persona_params(run.config());
  auto r = build_personas(params, run.gateway());
  fs::path path = run.output(o.out);
  auto& m = run.manifest();
  m.counts["personas"] = write_records(path, r.personas, [](const Persona& p) { return to_json(p); });
  std::map<std::string, std::size_t> splits;
  for (const auto& p : r.personas) ++splits[p.split.value_or("")];
  m.details = {{"generated", r.generated},
               {"rejected_alignment", r.rejected_alignment},
               {"shortfall_batches", r.shortfall_batches},
               {"combinations", r.combinations},
               {"splits", splits}};
  run.finish(manifest_for(path));
  out << "personas: wrote " << r.personas.size() << " personas to " << run.rel(path) << "\n";
  return kExitOk;
}

struct SimulateOpts {
  std::string personas;
  std::string out = "transcripts.jsonl";
  std::optional<std::int64_t> turn_cap;
  bool with_alternatives = false;
  bool no_alternatives = false;
  std::string only_split;
};

int cmd_simulate(const GlobalOpts& g, const SimulateOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ConfigOverride> ov;
  if (o.turn_cap) ov.push_back({"simulation.turn_cap", *o.turn_cap});
  if (o.with_alternatives && o.no_alternatives)
    throw ConfigError(kModule, "--with-alternatives and --no-alternatives are exclusive");
  if (o.with_alternatives) ov.push_back({"simulation.with_alternatives", true});
  if (o.no_alternatives) ov.push_back({"simulation.with_alternatives", false});
  Run run(g, "simulate", ov, err);
  SimulationParams params = simulation_params(run.config(), run.workdir());
  auto personas = read_jsonl<Persona>(run.input(o.personas), persona_from_json);
  if (!o.only_split.empty())
    std::erase_if(personas, [&](const Persona& p) { return p.split.value_or("") != o.only_split; });
  auto transcripts = run_dialogues(personas, params, run.gateway(), run.jobs());

  fs::path path = run.output(o.out);
  auto& m = run.manifest();
  m.counts["transcripts"] = write_records(path, transcripts, [](const Transcript& t) { return to_json(t); });
  std::size_t complete = 0, turns = 0, alternatives = 0, flip_failures = 0;
  std::map<std::string, std::size_t> terminations;
  for (const auto& t : transcripts) {
    complete += t.complete;
    turns += t.turns.size();
    for (const auto& r : t.turns) {
      alternatives += r.alternative.has_value();
      flip_failures += r.flip_failure.has_value();
    }
    ++terminations[std::string(termination_name(t.termination))];
    if (t.error) err << "warning: " << t.id << ": " << *t.error << "\n";
  }
  m.counts["turns"] = turns;
  m.counts["alternatives"] = alternatives;
  m.details = {{"complete", complete},
               {"incomplete", transcripts.size() - complete},
               {"flip_failures", flip_failures},
               {"terminations", terminations}};
  if (!transcripts.empty() && complete == 0)
    throw Error("simulation_engine", "every dialogue failed; first error: " + transcripts.front().error.value_or("?"));
  run.finish(manifest_for(path));
  out << "simulate: wrote " << transcripts.size() << " transcripts (" << complete << " complete) to " << run.rel(path)
      << "\n";
  return kExitOk;
}

struct PrefsOpts {
  std::string transcripts;
  std::string out = "dpo.jsonl";
  std::optional<std::string> reward;
  std::optional<std::string> h;
  std::optional<double> gamma;
  std::optional<double> t_diff;
  std::optional<double> positivity_gate;
};

int cmd_prefs(const GlobalOpts& g, const PrefsOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ConfigOverride> ov;
  if (o.reward) ov.push_back({"reward.kind", *o.reward});
  if (o.h) {
    if (*o.h == "all") {
      ov.push_back({"reward.h", "all"});
    } else {
      try {
        std::size_t used = 0;
        int h = std::stoi(*o.h, &used);
        if (used != o.h->size()) throw std::invalid_argument("h");
        ov.push_back({"reward.h", h});
      } catch (const std::exception&) {
        throw ConfigError(kModule, "--h: expected an integer or 'all', got '" + *o.h + "'");
      }
    }
  }
  if (o.gamma) ov.push_back({"reward.gamma", *o.gamma});
  if (o.t_diff) ov.push_back({"reward.t_diff", *o.t_diff});
  if (o.positivity_gate) ov.push_back({"reward.positivity_gate", *o.positivity_gate});
  Run run(g, "prefs", ov, err);
  const RewardKind kind = reward_kind(run.config());
  const RewardParams params = reward_params(run.config());
  auto transcripts = read_jsonl<Transcript>(run.input(o.transcripts), transcript_from_json);
  Gateway* gw = kind == RewardKind::Emotion ? &run.gateway() : nullptr;
  auto r = build_pairs(transcripts, params, kind, gw, run.jobs());

  fs::path path = run.output(o.out);
  auto& m = run.manifest();
  m.counts["pairs"] = write_records(path, r.pairs, [](const PreferencePair& p) { return to_json(p); });
  m.counts["branch_points"] = r.rewards.size();
  m.details = {{"chosen_initial", r.chosen_initial}, {"chosen_alternative", r.chosen_alternative}};
  run.finish(manifest_for(path));
  out << "prefs: wrote " << r.pairs.size() << " pairs from " << r.rewards.size() << " branch points to "
      << run.rel(path) << "\n";
  return kExitOk;
}

struct EvalOpts {
  std::string transcripts;
  std::string against;
  std::optional<std::string> metrics;
  std::optional<std::int64_t> value_samples;
  std::string out = "report.json";
};

int cmd_eval(const GlobalOpts& g, const EvalOpts& o, std::ostream& out, std::ostream& err) {
  std::vector<ConfigOverride> ov;
  if (o.metrics) {
    json list = json::array();
    for (const auto& s : util::split(*o.metrics, ','))
      if (!util::trim(s).empty()) list.push_back(util::trim(s));
    ov.push_back({"eval.metrics", list});
  }
  if (o.value_samples) ov.push_back({"eval.value_samples", *o.value_samples});
  Run run(g, "eval", ov, err);
  EvalOptions options = eval_options(run.config());
  if (o.against.empty() && !o.metrics) options.metrics.erase("value");
  auto a = read_jsonl<Transcript>(run.input(o.transcripts), transcript_from_json);
  std::optional<std::vector<Transcript>> b;
  if (!o.against.empty()) b = read_jsonl<Transcript>(run.input(o.against), transcript_from_json);
  if (options.metrics.count("value") && !b)
    throw ConfigError(kModule, "the value metric needs --against");
  json report = evaluate(a, b ? &*b : nullptr, options, run.gateway());

  fs::path path = run.output(o.out);
  util::write_file_atomic(path, report.dump(2) + "\n");
  run.manifest().counts["candidates"] = a.size();
  if (b) run.manifest().counts["against"] = b->size();
  run.finish(manifest_for(path));
  out << "eval: wrote report for " << a.size() << " transcripts to " << run.rel(path) << "\n";
  return kExitOk;
}

int cmd_report(const GlobalOpts& g, const std::vector<std::string>& manifests, std::ostream& out) {
  const fs::path workdir = fs::absolute(g.workdir).lexically_normal();
  if (!fs::is_directory(workdir)) throw ConfigError(kModule, "workdir is not a directory: " + g.workdir);
  std::vector<fs::path> paths;
  for (const auto& m : manifests) {
    fs::path p(m);
    paths.push_back(p.is_absolute() ? p : workdir / p);
  }
  if (paths.empty()) {
    for (auto it = fs::recursive_directory_iterator(workdir); it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_directory() && it->path().filename().string().starts_with(".")) {
        it.disable_recursion_pending();
        continue;
      }
      const std::string name = it->path().filename().string();
      if (it->is_regular_file() && (name == "manifest.json" || name.ends_with(".manifest.json")))
        paths.push_back(it->path());
    }
    std::sort(paths.begin(), paths.end());
  }
  std::size_t bad = 0;
  for (const auto& p : paths) {
    RunManifest m = read_manifest(p);
    auto problems = verify_manifest(m, workdir);
    std::string counts;
    for (const auto& [k, v] : m.counts) counts += (counts.empty() ? "" : " ") + k + "=" + std::to_string(v);
    out << p.lexically_relative(workdir).generic_string() << ": " << m.command << " seed=" << m.seed << " " << counts
        << " cache_hits=" << m.cache.cache_hits << " cache_misses=" << m.cache.cache_misses
        << (problems.empty() ? " ok" : " MISMATCH") << "\n";
    for (const auto& pr : problems) out << "  " << pr << "\n";
    bad += !problems.empty();
  }
  if (bad) throw Error(kModule, std::to_string(bad) + " manifest(s) do not match the files on disk");
  return kExitOk;
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Value-reinforcing emotional support data pipeline", "esvr"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOpts g;
  app.add_option("--workdir", g.workdir, "Base directory for all relative paths");
  app.add_option("--jobs", g.jobs, "Worker threads");
  app.add_option("--seed", g.seed, "Root random seed");
  app.add_option("--backend-profile", g.profile, "mock or live");
  app.add_option("--config", g.config, "TOML config file");
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_flag("--no-cache", g.no_cache, "Disable the on-disk response cache");

  MineOpts mine;
  auto* c_mine = app.add_subcommand("mine", "Build target-value and reference-response datasets from thread trees");
  c_mine->add_option("--input", mine.input, "Thread trees (JSONL)");
  c_mine->add_option("--submissions", mine.submissions, "Pushshift submissions dump (JSONL)");
  c_mine->add_option("--comments", mine.comments, "Pushshift comments dump (JSONL)");
  c_mine->add_option("--out", mine.out, "Output directory")->required();
  c_mine->add_option("--setting", mine.setting, "single or multi");
  c_mine->add_option("--min-score", mine.min_score);
  c_mine->add_option("--min-upvote-ratio", mine.min_upvote_ratio);
  c_mine->add_option("--effectiveness", mine.effectiveness, "Rated dialogues for the effectiveness analysis");

  PersonaOpts pers;
  auto* c_pers = app.add_subcommand("personas", "Generate seeker personas");
  c_pers->add_option("--out", pers.out);
  c_pers->add_option("--limit", pers.limit, "Stop after this many personas");
  c_pers->add_option("--split", pers.split, "train,dev,test counts or ratios");

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate supporter/seeker dialogues");
  c_sim->add_option("--personas", sim.personas)->required();
  c_sim->add_option("--out", sim.out);
  c_sim->add_option("--turn-cap", sim.turn_cap);
  c_sim->add_flag("--with-alternatives", sim.with_alternatives);
  c_sim->add_flag("--no-alternatives", sim.no_alternatives);
  c_sim->add_option("--only-split", sim.only_split, "Simulate only personas of this split");

  PrefsOpts prefs;
  auto* c_prefs = app.add_subcommand("prefs", "Build preference pairs from transcripts");
  c_prefs->set_help_flag("--help", "Print this help message and exit");  // frees -h for the horizon
  c_prefs->add_option("--transcripts", prefs.transcripts)->required();
  c_prefs->add_option("--out", prefs.out);
  c_prefs->add_option("--reward", prefs.reward, "value or emotion");
  c_prefs->add_option("--h", prefs.h, "Look-ahead horizon or 'all'");
  c_prefs->add_option("--gamma", prefs.gamma);
  c_prefs->add_option("--t-diff", prefs.t_diff);
  c_prefs->add_option("--positivity-gate", prefs.positivity_gate);

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate transcripts");
  c_eval->add_option("--transcripts", ev.transcripts)->required();
  c_eval->add_option("--against", ev.against);
  c_eval->add_option("--metrics", ev.metrics, "Comma list of skills,intensity,value,success");
  c_eval->add_option("--value-samples", ev.value_samples);
  c_eval->add_option("--out", ev.out);

  std::vector<std::string> manifests;
  auto* c_report = app.add_subcommand("report", "Summarize and verify run manifests");
  c_report->add_option("manifests", manifests, "Manifest files (default: all under the workdir)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (*c_mine) return cmd_mine(g, mine, out, err);
    if (*c_pers) return cmd_personas(g, pers, out, err);
    if (*c_sim) return cmd_simulate(g, sim, out, err);
    if (*c_prefs) return cmd_prefs(g, prefs, out, err);
    if (*c_eval) return cmd_eval(g, ev, out, err);
    if (*c_report) return cmd_report(g, manifests, out);
  } catch (const ConfigError& e) {
    err << one_line(e.describe()) << "\n";
    return kExitUsage;
  } catch (const FileNotFound& e) {
    err << one_line(e.describe()) << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << one_line(e.describe()) << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    err << "cli_app: " << one_line(e.what()) << "\n";
    return kExitPipeline;
  }
  err << "usage: no subcommand given\n";
  return kExitUsage;
}

}  // namespace esvr
