#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ecb/dataset.hpp"
#include "ecb/nuisance.hpp"

namespace ecb {

/// Gradient of the squared loss (y - mu(x; theta))^2 with respect to theta.
Eigen::VectorXd gradient_at(const LinearFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// Influence of upweighting one candidate sample on the total loss of the
/// control rows a fit was trained on:
///   score(z) = sum_i | g_i' H^{-1} g_z |.
/// The N_C x (d+1) matrix of g_i' H^{-1} is built once (Cholesky solve), so
/// each score costs O(N_C d).
class InfluenceScorer {
 public:
  /// Throws DataError if `fit` was not trained on exactly (x_controls, y_controls).
  InfluenceScorer(const LinearFit& fit, const Eigen::MatrixXd& x_controls,
                  const Eigen::VectorXd& y_controls);

  double score(const Eigen::Ref<const Eigen::VectorXd>& x, double y) const;
  std::uint64_t model_hash() const { return fit_.data_hash; }

 private:
  LinearFit fit_;
  Eigen::MatrixXd projected_;  // row i = g_i' H^{-1}
};

double influence_score(const LinearFit& fit, const Dataset& rct_controls,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// Per-EC influence scores and the induced nested borrow sets: the first k
/// entries of `order` are S_k, the k ECs with the smallest scores.
struct InfluenceRanking {
  IndexList ec_rows;           // dataset rows, aligned with `scores`
  std::vector<double> scores;  // nonnegative
  IndexList order;             // dataset rows sorted by (score, row)
  std::uint64_t model_hash = 0;

  Index size() const { return static_cast<Index>(order.size()); }
  IndexList prefix(Index k) const;
  /// 0-based position of each EC row (aligned with ec_rows) in `order`.
  std::vector<Index> ranks() const;
};

InfluenceRanking rank_and_nest(const LinearFit& fit, const Dataset& rct_controls, const Dataset& ecs,
                               const IndexList& ec_rows);

/// Scores every EC in `ds` against `fit` trained on the RCT controls.
InfluenceRanking rank_and_nest(const Dataset& ds, const DataSplit& split, const LinearFit& fit);

}  // namespace ecb
