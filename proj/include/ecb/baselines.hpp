#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ecb/dataset.hpp"
#include "ecb/estimators.hpp"
#include "ecb/nuisance.hpp"

namespace ecb {

/// No borrowing: AIPW on the trial rows.
EstimateReport nb(const Dataset& ds, const ModelOptions& opts = {});

/// Full borrowing: combined estimator with every EC. Equals nb() without ECs.
EstimateReport fb(const Dataset& ds, const ModelOptions& opts = {});

/// Full calibrated borrowing: calibrate every EC outcome, then fb().
EstimateReport fcb(const Dataset& ds, std::optional<double> lambda, const ModelOptions& opts = {});

/// Combined estimator on R u borrow_set with bias_hat against AIPW filled in.
EstimateReport estimate_with_borrow_set(const Dataset& ds, std::span<const Index> borrow_set,
                                        const ModelOptions& opts = {});

/// argmin_b (b_hat - b)^2 / variance + lambda |b| / |b_hat|^nu, which is
/// soft-thresholding of b_hat at lambda * variance / (2 |b_hat|^nu).
/// lambda = 0 returns b_hat unchanged; b_hat = 0 with lambda > 0 returns 0.
double adaptive_soft_threshold(double b_hat, double variance, double lambda, double nu);

/// Adaptive-lasso borrowing state under a diagonal covariance for b_hat.
struct AlbFit {
  IndexList ec_rows;
  Eigen::VectorXd b_hat;       // mu0_E(X_j) - mu0(X_j)
  Eigen::VectorXd sigma_diag;  // variance of b_hat_j
  Eigen::VectorXd b_tilde;
  double lambda = 0.0;
  double nu = 2.0;
  IndexList borrowed;  // ECs with b_tilde exactly 0
};

/// Initial bias estimates and their diagonal variances. The variance of
/// b_hat_j adds the prediction variances of both regressions at X_j, each
/// from its own homoscedastic residual variance.
AlbFit alb_initial(const Dataset& ds, const ModelOptions& opts = {});

/// Thresholds an initial fit at a given lambda.
AlbFit alb_threshold(AlbFit fit, double lambda, double nu);

/// {0.01, 0.1, 1, 10} * sqrt(N_E).
std::vector<double> default_alb_lambdas(Index n_ec);

struct AlbResult {
  AlbFit fit;
  EstimateReport report;
};

/// Chooses lambda from the grid by the smallest mse_hat of the resulting
/// combined estimate (ties go to the earlier grid entry).
AlbResult alb(const Dataset& ds, const std::vector<double>& lambda_grid, double nu,
              const ModelOptions& opts = {});

}  // namespace ecb
