#include "esvr/value_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "esvr/error.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {

constexpr std::array<std::string_view, kValueCount> kNames = {
    "Self-direction: thought",
    "Self-direction: action",
    "Stimulation",
    "Hedonism",
    "Achievement",
    "Power: dominance",
    "Power: resources",
    "Face",
    "Security: personal",
    "Security: societal",
    "Tradition",
    "Conformity: rules",
    "Conformity: interpersonal",
    "Humility",
    "Benevolence: caring",
    "Benevolence: dependability",
    "Universalism: concern",
    "Universalism: nature",
    "Universalism: tolerance",
    "Universalism: objectivity",
};

struct RawInfo {
  const char* definition;
  std::initializer_list<const char*> contained;
};

const std::array<RawInfo, kValueCount> kRawCatalog = {{
    {"It is good to have own ideas and interests.", {"Be creative", "Be curious", "Have freedom of thought"}},
    {"It is good to determine one\u2019s own actions.",
     {"Be choosing own goals", "Be independent", "Have freedom of action", "Have privacy"}},
    {"It is good to experience excitement, novelty, and change.",
     {"Have an exciting life", "Have a varied life", "Be daring"}},
    {"It is good to experience pleasure and sensual gratification.", {"Have pleasure"}},
    {"It is good to be successful in accordance with social norms.",
     {"Be ambitious", "Have success", "Be capable", "Be intellectual", "Be courageous"}},
    {"It is good to be in positions of control over others.", {"Have influence", "Have the right to command"}},
    {"It is good to have material possessions and social resources.", {"Have wealth"}},
    {"It is good to maintain one\u2019s public image.", {"Have social recognition", "Have a good reputation"}},
    {"It is good to have a secure immediate environment.",
     {"Have a sense of belonging", "Have good health", "Have no debts", "Be neat and tidy",
      "Have a comfortable life"}},
    {"It is good to have a secure and stable wider society.", {"Have a safe country", "Have a stable society"}},
    {"It is good to maintain cultural, family, or religious traditions.",
     {"Be respecting traditions", "Be holding religious faith"}},
    {"It is good to comply with rules, laws, and formal obligations.",
     {"Be compliant", "Be self-disciplined", "Be behaving properly"}},
    {"It is good to avoid upsetting or harming others.", {"Be polite", "Be honoring elders"}},
    {"It is good to recognize one\u2019s own insignificance in the larger scheme of things.",
     {"Be humble", "Have life accepted as is"}},
    {"It is good to work for the welfare of one\u2019s group\u2019s members.",
     {"Be helpful", "Be honest", "Be forgiving", "Have the own family secured", "Be loving"}},
    {"It is good to be a reliable and trustworthy member of one\u2019s group.",
     {"Be responsible", "Have loyalty towards friends"}},
    {"It is good to strive for equality, justice, and protection for all people.",
     {"Have equality", "Be just", "Have a world at peace"}},
    {"It is good to preserve the natural environment.",
     {"Be protecting the environment", "Have harmony with nature", "Have a world of beauty"}},
    {"It is good to accept and try to understand those who are different from oneself.",
     {"Be broadminded", "Have the wisdom to accept others"}},
    {"It is good to search for the truth and think in a rational and unbiased way",
     {"Be logical", "Have an objective view"}},
}};

constexpr std::array<ValueId, kValueCount> make_all() {
  std::array<ValueId, kValueCount> out{};
  for (std::size_t i = 0; i < kValueCount; ++i) out[i] = static_cast<ValueId>(i);
  return out;
}

constexpr std::array<ValueId, kValueCount> kAll = make_all();

void check_threshold(double threshold, const char* op) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw InvalidArgument("value_core", std::string(op) + ": threshold must be in [0,1]");
}

// Normalizes "Benevolence:caring" / " benevolence :  Caring " to lower-case
// "benevolence: caring".
std::string normalize_name(std::string_view raw) {
  std::string s = util::trim(raw);
  while (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`' || s.front() == '-' ||
                        s.front() == '*'))
    s = util::trim(std::string_view(s).substr(1));
  while (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '`' || s.back() == '.' ||
                        s.back() == '*'))
    s = util::trim(std::string_view(s).substr(0, s.size() - 1));
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t') {
      pending_space = true;
      continue;
    }
    if (c == ':') {
      out += ": ";
      pending_space = false;
      continue;
    }
    if (pending_space && !out.empty() && out.back() != ' ') out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return util::trim(out);
}

}  // namespace

ValueId value_at(std::size_t index) {
  if (index >= kValueCount) throw InvalidArgument("value_core", "value index out of range: " + std::to_string(index));
  return static_cast<ValueId>(index);
}

const std::array<ValueId, kValueCount>& all_values() noexcept { return kAll; }

std::string_view value_name(ValueId v) noexcept { return kNames[index_of(v)]; }

std::optional<ValueId> parse_value(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (kNames[i] == name) return static_cast<ValueId>(i);
  }
  return std::nullopt;
}

std::optional<ValueId> parse_value_lenient(std::string_view name) {
  const std::string wanted = normalize_name(name);
  if (wanted.empty()) return std::nullopt;
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (normalize_name(kNames[i]) == wanted) return static_cast<ValueId>(i);
  }
  return std::nullopt;
}

ValueProbVector::ValueProbVector(std::span<const double> probs) {
  if (probs.size() != kValueCount)
    throw InvalidArgument("value_core", "value vector must have 20 entries, got " + std::to_string(probs.size()));
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0))
      throw InvalidArgument("value_core", "value probability out of [0,1] at index " + std::to_string(i));
    probs_[i] = probs[i];
  }
}

ValueProbVector ValueProbVector::clamped(std::span<const double> probs, bool* clamped) {
  if (probs.size() != kValueCount)
    throw InvalidArgument("value_core", "value vector must have 20 entries, got " + std::to_string(probs.size()));
  ValueProbVector out;
  bool changed = false;
  for (std::size_t i = 0; i < kValueCount; ++i) {
    double p = probs[i];
    double c = std::isnan(p) ? 0.0 : std::clamp(p, 0.0, 1.0);
    if (c != p) changed = true;
    out.probs_[i] = c;
  }
  if (clamped) *clamped = changed;
  return out;
}

ValueProbVector ValueProbVector::uniform(double p) {
  std::array<double, kValueCount> a;
  a.fill(p);
  return ValueProbVector(a);
}

void ValueProbVector::set(ValueId v, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("value_core", "value probability out of [0,1]");
  probs_[index_of(v)] = p;
}

std::size_t ValueSet::size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<ValueId> ValueSet::to_vector() const {
  std::vector<ValueId> out;
  for (auto v : kAll)
    if (contains(v)) out.push_back(v);
  return out;
}

std::vector<std::string> value_names(const ValueSet& set) {
  std::vector<std::string> out;
  for (auto v : set.to_vector()) out.emplace_back(value_name(v));
  return out;
}

const ValueCatalog& ValueCatalog::builtin() {
  static const ValueCatalog catalog = [] {
    ValueCatalog c;
    for (std::size_t i = 0; i < kValueCount; ++i) {
      c.entries_[i].id = static_cast<ValueId>(i);
      c.entries_[i].definition = kRawCatalog[i].definition;
      for (const char* cv : kRawCatalog[i].contained) c.entries_[i].contained_values.emplace_back(cv);
    }
    return c;
  }();
  return catalog;
}

ValueCatalog ValueCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("value_core", path.string());
  ValueCatalog c;
  std::array<bool, kValueCount> seen{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("value_core", "<record>", std::string("malformed JSON: ") + e.what(), line_no);
    }
    for (const char* field : {"id", "index", "definition", "contained_values"}) {
      if (!j.contains(field)) throw SchemaError("value_core", field, "missing", line_no);
    }
    if (!j["id"].is_string()) throw SchemaError("value_core", "id", "expected string", line_no);
    auto id = parse_value(j["id"].get<std::string>());
    if (!id) throw SchemaError("value_core", "id", "unknown value '" + j["id"].get<std::string>() + "'", line_no);
    if (!j["index"].is_number_integer() || j["index"].get<long>() != static_cast<long>(index_of(*id)))
      throw SchemaError("value_core", "index", "does not match canonical index", line_no);
    if (seen[index_of(*id)]) throw SchemaError("value_core", "id", "duplicate value", line_no);
    seen[index_of(*id)] = true;
    auto& e = c.entries_[index_of(*id)];
    e.id = *id;
    if (!j["definition"].is_string()) throw SchemaError("value_core", "definition", "expected string", line_no);
    e.definition = j["definition"].get<std::string>();
    if (!j["contained_values"].is_array())
      throw SchemaError("value_core", "contained_values", "expected array", line_no);
    for (const auto& cv : j["contained_values"]) e.contained_values.push_back(cv.get<std::string>());
  }
  for (std::size_t i = 0; i < kValueCount; ++i) {
    if (!seen[i])
      throw SchemaError("value_core", "id", "catalog is missing '" + std::string(kNames[i]) + "'");
  }
  return c;
}

std::vector<ValueId> rank_within(const ValueProbVector& probs, const ValueSet& among, std::size_t cap) {
  std::vector<ValueId> ids = among.to_vector();
  std::stable_sort(ids.begin(), ids.end(), [&](ValueId a, ValueId b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return index_of(a) < index_of(b);
  });
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

std::vector<ValueId> top_k_values(const ValueProbVector& probs, int k) {
  if (k < 1 || k > static_cast<int>(kValueCount))
    throw InvalidArgument("value_core", "top_k_values: k must be in [1,20], got " + std::to_string(k));
  ValueSet everything(kAll.begin(), kAll.end());
  return rank_within(probs, everything, static_cast<std::size_t>(k));
}

ValueSet binarize(const ValueProbVector& probs, double threshold) {
  check_threshold(threshold, "binarize");
  ValueSet out;
  for (auto v : kAll)
    if (probs[v] >= threshold) out.insert(v);
  return out;
}

ValueSet distinct_targets(const ValueProbVector& preferred_next, const ValueProbVector& rejected_next,
                          double threshold, int cap) {
  check_threshold(threshold, "distinct_targets");
  if (cap < 1) throw InvalidArgument("value_core", "distinct_targets: cap must be positive");
  ValueSet candidates = binarize(preferred_next, threshold) - binarize(rejected_next, threshold);
  auto ranked = rank_within(preferred_next, candidates, static_cast<std::size_t>(cap));
  return ValueSet(ranked.begin(), ranked.end());
}

std::size_t count_value_hits(const ValueSet& targets, const ValueProbVector& observed, double threshold) {
  check_threshold(threshold, "count_value_hits");
  return (targets & binarize(observed, threshold)).size();
}

}  // namespace esvr
