#include "ecb/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ecb/error.hpp"

namespace ecb {

namespace {

constexpr double kMaxEta = 700.0;

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

Eigen::MatrixXd penalty_mask(Index p) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(p, p);
  d(0, 0) = 0.0;
  return d;
}

LinearFit fit_identity(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double ridge) {
  const double n = static_cast<double>(design.rows());
  const Index p = design.cols();
  const Eigen::MatrixXd gram = design.transpose() * design / n + ridge * penalty_mask(p);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
    throw NumericalError("fit_linear: design matrix is rank deficient");
  }
  LinearFit fit;
  fit.theta = ldlt.solve(design.transpose() * y / n);
  fit.hessian = 2.0 * gram;
  return fit;
}

// Levenberg-Marquardt on the squared loss with mean exp(theta'(1,x)).
LinearFit fit_exp(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double ridge) {
  const double n = static_cast<double>(design.rows());
  const Index p = design.cols();
  const Eigen::MatrixXd mask = penalty_mask(p);

  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::ArrayXd eta = (design * theta).array();
    if ((eta > kMaxEta).any()) return std::numeric_limits<double>::infinity();
    return (y.array() - eta.exp()).square().sum() / n + ridge * theta.tail(p - 1).squaredNorm();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  const double ybar = y.mean();
  if (ybar > 0) theta(0) = std::log(ybar);
  double f = objective(theta);
  double damping = 1e-3;
  LinearFit fit;
  fit.converged = false;
  int it = 0;
  for (; it < 500; ++it) {
    const Eigen::ArrayXd mu = (design * theta).array().exp();
    const Eigen::ArrayXd r = y.array() - mu;
    const Eigen::VectorXd grad =
        -2.0 / n * design.transpose() * (r * mu).matrix() + 2.0 * ridge * mask * theta;
    const Eigen::MatrixXd gn =
        2.0 / n * design.transpose() * mu.square().matrix().asDiagonal() * design + 2.0 * ridge * mask;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + f)) {
      fit.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::MatrixXd lhs = gn;
      lhs.diagonal() += damping * (gn.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      const Eigen::VectorXd candidate = theta + step;
      const double fc = objective(candidate);
      if (std::isfinite(fc) && fc <= f) {
        const bool tiny = step.norm() <= 1e-12 * (1.0 + theta.norm());
        theta = candidate;
        const double prev = f;
        f = fc;
        damping = std::max(damping / 3.0, 1e-12);
        accepted = true;
        if (tiny || prev - fc <= 1e-15 * (1.0 + prev)) fit.converged = true;
      } else {
        damping *= 4.0;
      }
    }
    if (!accepted || fit.converged) break;
  }
  if (!theta.allFinite()) throw NumericalError("fit_linear: exponential fit diverged");

  const Eigen::ArrayXd mu = (design * theta).array().exp();
  const Eigen::ArrayXd r = y.array() - mu;
  const Eigen::MatrixXd gn =
      2.0 / n * design.transpose() * mu.square().matrix().asDiagonal() * design + 2.0 * ridge * mask;
  Eigen::MatrixXd full =
      gn - 2.0 / n * design.transpose() * (r * mu).matrix().asDiagonal() * design;
  // The residual term can make the exact Hessian indefinite away from a good
  // fit; fall back to the Gauss-Newton part in that case.
  Eigen::LLT<Eigen::MatrixXd> llt(full);
  fit.hessian = llt.info() == Eigen::Success ? full : gn;
  if (Eigen::LLT<Eigen::MatrixXd>(fit.hessian).info() != Eigen::Success) {
    throw NumericalError("fit_linear: exponential fit has a singular Hessian");
  }
  fit.theta = theta;
  fit.iterations = it;
  return fit;
}

}  // namespace

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  return design;
}

double default_ridge(const Eigen::MatrixXd& x) {
  const double n = static_cast<double>(x.rows());
  const double trace = 2.0 * (n + x.squaredNorm()) / n;
  return 1e-6 * trace / static_cast<double>(x.cols() + 1);
}

double LinearFit::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const double eta = theta(0) + theta.tail(theta.size() - 1).dot(x);
  return link == OutcomeLink::kExp ? std::exp(eta) : eta;
}

Eigen::VectorXd LinearFit::predict_rows(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd eta = (x * theta.tail(theta.size() - 1)).array() + theta(0);
  if (link == OutcomeLink::kExp) eta = eta.array().exp();
  return eta;
}

Eigen::VectorXd LinearFit::mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd g(theta.size());
  g(0) = 1.0;
  g.tail(x.size()) = x;
  if (link == OutcomeLink::kExp) g *= predict(x);
  return g;
}

double predict_outcome(const LinearFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return fit.predict(x);
}

LinearFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                     OutcomeLink link) {
  if (x.rows() != y.size()) throw DataError("fit_linear: row count mismatch");
  if (x.rows() < x.cols() + 2) {
    throw DataError("fit_linear: need at least d + 2 rows, got " + std::to_string(x.rows()));
  }
  if (ridge < 0) throw DataError("fit_linear: ridge must be nonnegative");
  const Eigen::MatrixXd design = with_intercept(x);
  LinearFit fit = link == OutcomeLink::kExp ? fit_exp(design, y, ridge) : fit_identity(design, y, ridge);
  fit.ridge = ridge;
  fit.n_fit = x.rows();
  fit.link = link;
  fit.data_hash = fingerprint(x, y);
  return fit;
}

double LogisticFit::raw_probability(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return logistic(beta(0) + beta.tail(beta.size() - 1).dot(x));
}

double LogisticFit::probability(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::clamp(raw_probability(x), clip, 1.0 - clip);
}

double ProbabilityModel::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (const auto* c = std::get_if<double>(&model_)) return *c;
  return std::get<LogisticFit>(model_).probability(x);
}

LogisticFit fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels, double clip,
                         const Eigen::VectorXd* warm_start, int max_iterations) {
  if (features.rows() != labels.size()) throw DataError("fit_logistic: row count mismatch");
  if (!(clip > 0.0 && clip < 0.5)) throw DataError("fit_logistic: clip must lie in (0, 0.5)");
  const Index n_pos = labels.sum();
  if (n_pos == 0 || n_pos == labels.size()) {
    throw DataError("fit_logistic: labels contain a single class");
  }
  const Eigen::MatrixXd design = with_intercept(features);
  const Eigen::VectorXd yv = labels.cast<double>();
  const Index p = design.cols();

  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = design * b;
    double ll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) ll += yv(i) * eta(i) - softplus(eta(i));
    return ll;
  };

  LogisticFit fit;
  fit.clip = clip;
  if (warm_start != nullptr && warm_start->size() == p && warm_start->allFinite()) {
    fit.beta = *warm_start;
  } else {
    fit.beta = Eigen::VectorXd::Zero(p);
    const double rate = static_cast<double>(n_pos) / static_cast<double>(labels.size());
    fit.beta(0) = std::log(rate / (1.0 - rate));
  }
  double ll = loglik(fit.beta);
  for (int it = 0; it < max_iterations; ++it) {
    fit.iterations = it + 1;
    const Eigen::VectorXd eta = design * fit.beta;
    Eigen::VectorXd prob(eta.size()), w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      prob(i) = logistic(eta(i));
      w(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = design.transpose() * (yv - prob);
    if (grad.norm() < 1e-6) {
      fit.converged = true;
      break;
    }
    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) break;
    const Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      const Eigen::VectorXd candidate = fit.beta + t * step;
      const double lc = loglik(candidate);
      if (lc >= ll - 1e-12 * std::abs(ll)) {
        fit.beta = candidate;
        ll = lc;
        improved = true;
        break;
      }
    }
    if (!improved || fit.beta.norm() > 1e4) break;
  }
  if (fit.beta.norm() > 1e4) fit.converged = false;
  // perfect separation
  const Eigen::VectorXd eta = design * fit.beta;
  bool separated = true;
  for (Index i = 0; i < eta.size() && separated; ++i) separated = labels(i) == 1 ? eta(i) > 0 : eta(i) < 0;
  if (separated) fit.converged = false;
  return fit;
}

LinearFit fit_outcome(const Dataset& ds, std::span<const Index> rows, const ModelOptions& opts) {
  const Dataset sub = ds.select(rows);
  const double ridge = opts.ridge.value_or(default_ridge(sub.covariates()));
  return fit_linear(sub.covariates(), sub.outcome(), ridge, opts.link);
}

RctNuisances fit_rct_nuisances(const Dataset& ds, const DataSplit& split, const ModelOptions& opts) {
  if (split.n_treated() == 0) throw DataError("no treated RCT rows");
  ProbabilityModel e1;
  if (opts.e1_mode == PropensityMode::kKnown) {
    const double p = opts.e1_known.value_or(static_cast<double>(split.n_treated()) /
                                            static_cast<double>(split.n_rct()));
    e1 = ProbabilityModel(p);
  } else {
    const Dataset rct = ds.select(split.rct);
    e1 = ProbabilityModel(fit_logistic(rct.covariates(), rct.treatment(), opts.clip));
  }
  return {fit_outcome(ds, split.rct_control, opts), fit_outcome(ds, split.rct_treated, opts),
          std::move(e1)};
}

NuisanceSet extend_nuisances(const Dataset& ds, const DataSplit& split, const RctNuisances& rct,
                             std::span<const Index> borrow_set, const ModelOptions& opts,
                             const Eigen::VectorXd* pi_warm_start) {
  for (const Index j : borrow_set) {
    if (j < 0 || j >= ds.rows() || ds.is_rct(j)) {
      throw DataError("borrow set contains a non-EC row " + std::to_string(j));
    }
  }
  NuisanceSet nu{rct.mu0, rct.mu1, rct.mu0, rct.mu1, rct.e1, ProbabilityModel(1.0), 1.0,
                 split.n_rct(), static_cast<Index>(borrow_set.size()), opts.clip};
  if (borrow_set.empty()) return nu;

  IndexList controls = split.rct_control;
  controls.insert(controls.end(), borrow_set.begin(), borrow_set.end());
  nu.m0 = fit_outcome(ds, controls, opts);

  IndexList combined = split.rct;
  combined.insert(combined.end(), borrow_set.begin(), borrow_set.end());
  const Dataset pooled = ds.select(combined);
  nu.pi = ProbabilityModel(fit_logistic(pooled.covariates(), pooled.source(), opts.clip, pi_warm_start));
  nu.q_hat = static_cast<double>(split.n_rct()) / static_cast<double>(combined.size());
  return nu;
}

NuisanceSet assemble_nuisances(const Dataset& ds, std::span<const Index> borrow_set,
                               const ModelOptions& opts) {
  const DataSplit s = split(ds);
  return extend_nuisances(ds, s, fit_rct_nuisances(ds, s, opts), borrow_set, opts);
}

}  // namespace ecb
