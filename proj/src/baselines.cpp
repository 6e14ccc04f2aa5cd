#include "ecb/baselines.hpp"

#include <cmath>

#include "ecb/calibration.hpp"
#include "ecb/error.hpp"

namespace ecb {

namespace {

// Delta-method prediction variance sigma^2 g(x)' (J'J)^{-1} g(x), with g the
// gradient of the mean function and J its rows on the training data.
Eigen::VectorXd prediction_variance(const LinearFit& fit, const Dataset& train, const Eigen::MatrixXd& at) {
  const Index p = fit.theta.size();
  Eigen::MatrixXd jac(train.rows(), p);
  for (Index i = 0; i < train.rows(); ++i) jac.row(i) = fit.mean_gradient(train.covariates().row(i).transpose());
  const Eigen::VectorXd resid = train.outcome() - fit.predict_rows(train.covariates());
  const double dof = static_cast<double>(std::max<Index>(1, train.rows() - p));
  const double sigma2 = resid.squaredNorm() / dof;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(jac.transpose() * jac);
  Eigen::MatrixXd g(p, at.rows());
  for (Index j = 0; j < at.rows(); ++j) g.col(j) = fit.mean_gradient(at.row(j).transpose());
  const Eigen::MatrixXd solved = ldlt.solve(g);
  return sigma2 * g.cwiseProduct(solved).colwise().sum().transpose();
}

}  // namespace

EstimateReport nb(const Dataset& ds, const ModelOptions& opts) {
  const DataSplit sp = split(ds);
  const RctNuisances rct = fit_rct_nuisances(ds, sp, opts);
  EstimateReport r = tau_aipw(ds.select(sp.rct), rct.mu0, rct.mu1, rct.e1, opts.clip);
  r.method = "nb";
  return r;
}

EstimateReport estimate_with_borrow_set(const Dataset& ds, std::span<const Index> borrow_set,
                                        const ModelOptions& opts) {
  const DataSplit sp = split(ds);
  const RctNuisances rct = fit_rct_nuisances(ds, sp, opts);
  const EstimateReport aipw = tau_aipw(ds.select(sp.rct), rct.mu0, rct.mu1, rct.e1, opts.clip);
  const NuisanceSet nu = extend_nuisances(ds, sp, rct, borrow_set, opts);
  IndexList rows = sp.rct;
  rows.insert(rows.end(), borrow_set.begin(), borrow_set.end());
  return with_bias(tau_combined(ds.select(rows), nu), aipw);
}

EstimateReport fb(const Dataset& ds, const ModelOptions& opts) {
  const DataSplit sp = split(ds);
  EstimateReport r = estimate_with_borrow_set(ds, sp.ec, opts);
  r.method = "fb";
  return r;
}

EstimateReport fcb(const Dataset& ds, std::optional<double> lambda, const ModelOptions& opts) {
  if (split(ds).ec.empty()) {
    EstimateReport r = fb(ds, opts);
    r.method = "fcb";
    return r;
  }
  const BiasFit fit = fit_bias(ds, lambda, opts);
  EstimateReport r = fb(apply_calibration(ds, calibrate(ds, fit)), opts);
  r.method = "fcb";
  return r;
}

double adaptive_soft_threshold(double b_hat, double variance, double lambda, double nu) {
  if (lambda == 0.0) return b_hat;
  const double magnitude = std::abs(b_hat);
  if (magnitude == 0.0) return 0.0;
  const double threshold = lambda * variance / (2.0 * std::pow(magnitude, nu));
  return magnitude <= threshold ? 0.0 : std::copysign(magnitude - threshold, b_hat);
}

AlbFit alb_initial(const Dataset& ds, const ModelOptions& opts) {
  const DataSplit sp = split(ds);
  if (sp.ec.empty()) throw DataError("alb: no external controls");
  const Dataset controls = ds.select(sp.rct_control);
  const Dataset ecs = ds.select(sp.ec);
  const LinearFit mu0 = fit_outcome(ds, sp.rct_control, opts);
  const LinearFit mu0_ec = fit_outcome(ds, sp.ec, opts);
  AlbFit fit;
  fit.ec_rows = sp.ec;
  fit.b_hat = mu0_ec.predict_rows(ecs.covariates()) - mu0.predict_rows(ecs.covariates());
  fit.sigma_diag = prediction_variance(mu0_ec, ecs, ecs.covariates()) +
                   prediction_variance(mu0, controls, ecs.covariates());
  fit.sigma_diag = fit.sigma_diag.cwiseMax(1e-300);
  fit.b_tilde = fit.b_hat;
  return fit;
}

AlbFit alb_threshold(AlbFit fit, double lambda, double nu) {
  fit.lambda = lambda;
  fit.nu = nu;
  fit.borrowed.clear();
  for (Index j = 0; j < fit.b_hat.size(); ++j) {
    fit.b_tilde(j) = adaptive_soft_threshold(fit.b_hat(j), fit.sigma_diag(j), lambda, nu);
    if (fit.b_tilde(j) == 0.0) fit.borrowed.push_back(fit.ec_rows[static_cast<std::size_t>(j)]);
  }
  return fit;
}

std::vector<double> default_alb_lambdas(Index n_ec) {
  const double s = std::sqrt(static_cast<double>(n_ec));
  return {0.01 * s, 0.1 * s, 1.0 * s, 10.0 * s};
}

AlbResult alb(const Dataset& ds, const std::vector<double>& lambda_grid, double nu,
              const ModelOptions& opts) {
  if (lambda_grid.empty()) throw DataError("alb: empty lambda grid");
  const AlbFit initial = alb_initial(ds, opts);
  std::optional<AlbResult> best;
  for (const double lambda : lambda_grid) {
    AlbFit fit = alb_threshold(initial, lambda, nu);
    EstimateReport report = estimate_with_borrow_set(ds, fit.borrowed, opts);
    if (!best || report.mse_hat < best->report.mse_hat) best = AlbResult{std::move(fit), std::move(report)};
  }
  best->report.method = "alb";
  return *best;
}

}  // namespace ecb
