#pragma once

// The 20-category human value taxonomy and set/vector operations over it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace esvr {

inline constexpr std::size_t kValueCount = 20;

// Level-1 value categories in taxonomy listing order. The underlying integer
// is the stable ordinal index used for tie-breaking and serialization.
enum class ValueId : std::uint8_t {
  SelfDirectionThought,
  SelfDirectionAction,
  Stimulation,
  Hedonism,
  Achievement,
  PowerDominance,
  PowerResources,
  Face,
  SecurityPersonal,
  SecuritySocietal,
  Tradition,
  ConformityRules,
  ConformityInterpersonal,
  Humility,
  BenevolenceCaring,
  BenevolenceDependability,
  UniversalismConcern,
  UniversalismNature,
  UniversalismTolerance,
  UniversalismObjectivity,
};

constexpr std::size_t index_of(ValueId v) noexcept { return static_cast<std::size_t>(v); }
ValueId value_at(std::size_t index);
const std::array<ValueId, kValueCount>& all_values() noexcept;

// Canonical name, e.g. "Self-direction: thought".
std::string_view value_name(ValueId v) noexcept;
// Exact canonical-name lookup.
std::optional<ValueId> parse_value(std::string_view name) noexcept;
// Case-insensitive lookup that tolerates surrounding quotes, whitespace and
// missing space after the colon ("benevolence:caring").
std::optional<ValueId> parse_value_lenient(std::string_view name);

// Probability per value, every entry in [0, 1].
class ValueProbVector {
 public:
  ValueProbVector() { probs_.fill(0.0); }
  // Throws InvalidArgument unless there are exactly 20 entries in [0, 1].
  explicit ValueProbVector(std::span<const double> probs);

  // Clamps each entry into [0, 1]; sets *clamped when any entry changed.
  // Length must still be 20.
  static ValueProbVector clamped(std::span<const double> probs, bool* clamped = nullptr);
  static ValueProbVector uniform(double p);

  double operator[](ValueId v) const noexcept { return probs_[index_of(v)]; }
  void set(ValueId v, double p);
  const std::array<double, kValueCount>& data() const noexcept { return probs_; }

  bool operator==(const ValueProbVector&) const = default;

 private:
  std::array<double, kValueCount> probs_{};
};

// Unordered set of values. Iteration order is taxonomy index order.
class ValueSet {
 public:
  ValueSet() = default;
  ValueSet(std::initializer_list<ValueId> values) {
    for (auto v : values) insert(v);
  }
  template <typename It>
  ValueSet(It first, It last) {
    for (; first != last; ++first) insert(*first);
  }

  void insert(ValueId v) noexcept { bits_ |= bit(v); }
  void erase(ValueId v) noexcept { bits_ &= ~bit(v); }
  bool contains(ValueId v) const noexcept { return (bits_ & bit(v)) != 0; }
  std::size_t size() const noexcept;
  bool empty() const noexcept { return bits_ == 0; }
  std::vector<ValueId> to_vector() const;
  std::uint32_t bits() const noexcept { return bits_; }

  friend ValueSet operator&(ValueSet a, ValueSet b) noexcept { return from_bits(a.bits_ & b.bits_); }
  friend ValueSet operator|(ValueSet a, ValueSet b) noexcept { return from_bits(a.bits_ | b.bits_); }
  friend ValueSet operator-(ValueSet a, ValueSet b) noexcept { return from_bits(a.bits_ & ~b.bits_); }
  bool operator==(const ValueSet&) const = default;

 private:
  static constexpr std::uint32_t bit(ValueId v) noexcept { return 1u << index_of(v); }
  static ValueSet from_bits(std::uint32_t b) noexcept {
    ValueSet s;
    s.bits_ = b;
    return s;
  }
  std::uint32_t bits_ = 0;
};

std::vector<std::string> value_names(const ValueSet& set);

struct ValueInfo {
  ValueId id;
  std::string definition;
  std::vector<std::string> contained_values;
};

// Definitions and contained values per category.
class ValueCatalog {
 public:
  // The built-in copy of the taxonomy table.
  static const ValueCatalog& builtin();
  // Loads a catalog file (JSONL, one record per value). Every canonical id
  // must appear exactly once with its matching index.
  static ValueCatalog load(const std::filesystem::path& path);

  const ValueInfo& info(ValueId v) const noexcept { return entries_[index_of(v)]; }
  const std::array<ValueInfo, kValueCount>& entries() const noexcept { return entries_; }

 private:
  std::array<ValueInfo, kValueCount> entries_;
};

// The k highest-probability ids, sorted by (probability desc, index asc).
// Throws InvalidArgument unless 1 <= k <= 20.
std::vector<ValueId> top_k_values(const ValueProbVector& probs, int k);

// Members of `among` ranked by (probability desc, index asc), truncated to cap.
std::vector<ValueId> rank_within(const ValueProbVector& probs, const ValueSet& among, std::size_t cap);

// Ids whose probability is >= threshold.
ValueSet binarize(const ValueProbVector& probs, double threshold);

// Values present in `preferred_next` but not in `rejected_next` (both binarized
// at threshold), keeping at most `cap` by descending preferred probability.
ValueSet distinct_targets(const ValueProbVector& preferred_next, const ValueProbVector& rejected_next,
                          double threshold, int cap = 3);

// |targets ∩ binarize(observed, threshold)|.
std::size_t count_value_hits(const ValueSet& targets, const ValueProbVector& observed, double threshold);

}  // namespace esvr
