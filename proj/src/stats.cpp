#include "esvr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "esvr/error.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "eval_bench";
constexpr std::size_t kExactLimit = 12;

// counts[u] = number of arrangements of m a's and n b's with U_a = u.
std::vector<double> u_distribution(std::size_t m, std::size_t n) {
  // f[i][j] is the distribution for i a's and j b's, built up over i and j.
  std::vector<std::vector<std::vector<double>>> f(m + 1, std::vector<std::vector<double>>(n + 1));
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      auto& cur = f[i][j];
      cur.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cur[0] = 1.0;
        continue;
      }
      // The largest element is an a (beats all j b's) or a b.
      const auto& with_a = f[i - 1][j];
      for (std::size_t u = 0; u < with_a.size(); ++u) cur[u + j] += with_a[u];
      const auto& with_b = f[i][j - 1];
      for (std::size_t u = 0; u < with_b.size(); ++u) cur[u] += with_b[u];
    }
  }
  return f[m][n];
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

std::vector<double> midranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return xs[i] < xs[j]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument(kModule, "mann_whitney_u needs two nonempty samples");
  for (double x : a)
    if (std::isnan(x)) throw InvalidArgument(kModule, "mann_whitney_u: NaN in sample a");
  for (double x : b)
    if (std::isnan(x)) throw InvalidArgument(kModule, "mann_whitney_u: NaN in sample b");

  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::vector<double> ranks = midranks(all);
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += ranks[i];

  MannWhitneyResult r;
  r.u_a = ra - static_cast<double>(na * (na + 1)) / 2.0;
  r.u_b = static_cast<double>(na * nb) - r.u_a;

  // Tie groups, for both the exact-path switch and the variance correction.
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  if (!ties && n <= kExactLimit) {
    std::vector<double> dist = u_distribution(na, nb);
    double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    auto u = static_cast<std::size_t>(std::llround(r.u_a));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      if (k <= u) lower += dist[k];
      if (k >= u) upper += dist[k];
    }
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    r.exact = true;
    return r;
  }

  const double dn = static_cast<double>(n);
  const double mu = static_cast<double>(na * nb) / 2.0;
  const double var = static_cast<double>(na * nb) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    r.p = 1.0;
    return r;
  }
  double dev = std::max(0.0, std::abs(r.u_a - mu) - 0.5);
  r.p = std::min(1.0, 2.0 * normal_sf(dev / std::sqrt(var)));
  return r;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument(kModule, "spearman: length mismatch (" + std::to_string(a.size()) + " vs " +
                                       std::to_string(b.size()) + ")");
  if (a.size() < 2) throw InvalidArgument(kModule, "spearman needs at least two points");
  std::vector<double> ra = midranks(a), rb = midranks(b);
  const double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace esvr
