#include "ecb/influence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecb/error.hpp"

namespace ecb {

Eigen::VectorXd gradient_at(const LinearFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  return -2.0 * (y - fit.predict(x)) * fit.mean_gradient(x);
}

InfluenceScorer::InfluenceScorer(const LinearFit& fit, const Eigen::MatrixXd& x_controls,
                                 const Eigen::VectorXd& y_controls)
    : fit_(fit) {
  if (fingerprint(x_controls, y_controls) != fit.data_hash) {
    throw DataError("influence: fit was not trained on these control rows");
  }
  const Index n = x_controls.rows();
  Eigen::MatrixXd grads(fit.theta.size(), n);
  for (Index i = 0; i < n; ++i) {
    grads.col(i) = gradient_at(fit, x_controls.row(i).transpose(), y_controls(i));
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
  if (llt.info() != Eigen::Success) throw NumericalError("influence: Hessian is not positive definite");
  projected_ = llt.solve(grads).transpose();
}

double InfluenceScorer::score(const Eigen::Ref<const Eigen::VectorXd>& x, double y) const {
  return (projected_ * gradient_at(fit_, x, y)).lpNorm<1>();
}

double influence_score(const LinearFit& fit, const Dataset& rct_controls,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  return InfluenceScorer(fit, rct_controls.covariates(), rct_controls.outcome()).score(x, y);
}

IndexList InfluenceRanking::prefix(Index k) const {
  k = std::clamp<Index>(k, 0, size());
  return IndexList(order.begin(), order.begin() + k);
}

std::vector<Index> InfluenceRanking::ranks() const {
  std::vector<Index> out(ec_rows.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto it = std::lower_bound(ec_rows.begin(), ec_rows.end(), order[pos]);
    out[static_cast<std::size_t>(it - ec_rows.begin())] = static_cast<Index>(pos);
  }
  return out;
}

InfluenceRanking rank_and_nest(const LinearFit& fit, const Dataset& rct_controls, const Dataset& ecs,
                               const IndexList& ec_rows) {
  if (static_cast<Index>(ec_rows.size()) != ecs.rows()) {
    throw DataError("rank_and_nest: ec_rows does not match the EC table");
  }
  if (!std::is_sorted(ec_rows.begin(), ec_rows.end())) {
    throw DataError("rank_and_nest: ec_rows must be ascending");
  }
  const InfluenceScorer scorer(fit, rct_controls.covariates(), rct_controls.outcome());
  InfluenceRanking r;
  r.ec_rows = ec_rows;
  r.model_hash = scorer.model_hash();
  r.scores.resize(ec_rows.size());
  for (Index j = 0; j < ecs.rows(); ++j) {
    const double s = scorer.score(ecs.covariates().row(j).transpose(), ecs.outcome()(j));
    if (!std::isfinite(s)) throw NumericalError("influence: non-finite score");
    r.scores[static_cast<std::size_t>(j)] = s;
  }
  std::vector<std::size_t> perm(ec_rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return r.scores[a] < r.scores[b]; });
  r.order.reserve(perm.size());
  for (const auto k : perm) r.order.push_back(ec_rows[k]);
  return r;
}

InfluenceRanking rank_and_nest(const Dataset& ds, const DataSplit& split, const LinearFit& fit) {
  if (split.ec.empty()) throw DataError("rank_and_nest: no external controls");
  return rank_and_nest(fit, ds.select(split.rct_control), ds.select(split.ec), split.ec);
}

}  // namespace ecb
