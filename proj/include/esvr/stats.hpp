#pragma once

#include <span>
#include <vector>

namespace esvr {

// 1-based ranks with ties replaced by their average rank.
std::vector<double> midranks(std::span<const double> xs);

struct MannWhitneyResult {
  double u_a = 0.0;  // pairs (a, b) with a > b, ties counted 1/2
  double u_b = 0.0;
  double p = 1.0;    // two-sided
  bool exact = false;
};

// Exact p by enumeration when n_a + n_b <= 12 and there are no ties,
// otherwise the normal approximation with tie and continuity corrections.
// Empty samples raise InvalidArgument.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

// Pearson correlation of midranks. NaN when either sample is constant.
// Throws InvalidArgument on length mismatch or fewer than two points.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace esvr
