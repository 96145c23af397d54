#pragma once

#include "avica/types.hpp"

namespace avica {

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
// potentials, O(k^3)). Returns the column assigned to each row.
std::vector<int> hungarian_assign(const Matrix& cost);

// Row matching between two source arrays: permutation[j] is the estimate row
// matched to truth row j, signs flip the matched rows to positive correlation.
struct Alignment {
  std::vector<int> permutation;
  std::vector<int> signs;  // +1 / -1
  Vector correlations;     // matched correlations after sign flip
};

// Hungarian matching on negative absolute correlation between unit-variance
// normalized rows. Throws DegenerateDataError on zero-variance rows.
Alignment align_sources(const Matrix& truth, const Matrix& estimate);

// Mean over sources of (1 - correlation) after matching and sign alignment.
double reconstruction_error(const Matrix& truth, const Matrix& estimate);

// Squared error between precision tables after permuting estimate columns by
// the source alignment.
double precision_error(const Matrix& truth_precision, const Matrix& est_precision,
                       const Alignment& alignment);

// Empirical identifiability check: for each view, W * A_true with rows scaled
// to unit max-absolute entry should be a signed permutation; returns the max
// over views of the total off-assignment absolute mass (0 means exact
// scale-permutation recovery).
double unmixing_recovery_score(const std::vector<Matrix>& unmixing,
                               const std::vector<Matrix>& mixing_true);

// Coefficient of determination 1 - SS_res / SS_tot. Throws on constant truth.
double r2_score(const Vector& truth, const Vector& prediction);

// Pearson correlation with the biased (1/n) normalization used throughout.
double row_correlation(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

// Center a row and scale it to unit variance (1/n convention).
Eigen::RowVectorXd normalize_row(const Eigen::RowVectorXd& row);

}  // namespace avica
