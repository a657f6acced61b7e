#pragma once

// Reference implementations that share no code with the library beyond plain
// data types. Used to cross-check the production code on generated inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace esvr::oracle {

struct RawLabel {
  double sentiment;
  std::array<double, 20> probs;
};

// Enumerates every (k, value) pair inside the horizon and counts qualifying
// hits per k, then discounts.
inline double value_reward(const std::vector<std::optional<RawLabel>>& future, const std::vector<int>& targets,
                           std::optional<int> h, double gamma, double threshold, std::optional<double> gate) {
  const int horizon = h ? *h : static_cast<int>(future.size());
  double total = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    if (k > static_cast<int>(future.size())) break;
    const auto& l = future[static_cast<std::size_t>(k - 1)];
    std::size_t hits = 0;
    for (int v = 0; v < 20; ++v) {
      if (!l) continue;
      if (gate && l->sentiment < *gate) continue;
      const bool is_target = std::find(targets.begin(), targets.end(), v) != targets.end();
      if (is_target && l->probs[static_cast<std::size_t>(v)] >= threshold) ++hits;
    }
    total += std::pow(gamma, static_cast<double>(k - 1)) * static_cast<double>(hits);
  }
  return total;
}

struct MwuExact {
  double u_a;
  double p;
};

// Tie-free exact test: enumerate every subset of ranks 1..N of size n_a.
inline MwuExact mann_whitney_exact(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  auto rank = [&](double x) { return static_cast<double>(std::lower_bound(all.begin(), all.end(), x) - all.begin() + 1); };
  const std::size_t na = a.size(), n = all.size();
  double r = 0.0;
  for (double x : a) r += rank(x);
  const double offset = static_cast<double>(na * (na + 1)) / 2.0;
  const double u_obs = r - offset;
  std::uint64_t total = 0, le = 0, ge = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != na) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s += static_cast<double>(i + 1);
    const double u = s - offset;
    ++total;
    le += u <= u_obs;
    ge += u >= u_obs;
  }
  double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return {u_obs, std::min(1.0, p)};
}

// Tie-free Spearman via the squared rank difference formula.
inline double spearman_d2(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& x) {
    std::vector<double> s(x);
    std::sort(s.begin(), s.end());
    std::vector<double> r;
    for (double v : x) r.push_back(static_cast<double>(std::lower_bound(s.begin(), s.end(), v) - s.begin() + 1));
    return r;
  };
  auto ra = ranks(a), rb = ranks(b);
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const double n = static_cast<double>(a.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace esvr::oracle
