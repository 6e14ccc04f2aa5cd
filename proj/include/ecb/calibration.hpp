#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ecb/borrowing.hpp"
#include "ecb/dataset.hpp"
#include "ecb/nuisance.hpp"

namespace ecb {

/// Linear bias function b(x) = theta_b'(1, x) between EC and RCT-control
/// conditional means, estimated from all control rows through
///   Y - m(X) = (pi0(X) - R) b(X) + noise,
/// where m(X) = E[Y | X, A=0] and pi0(X) = P(R=1 | X, A=0).
struct BiasFit {
  Eigen::VectorXd theta_b;  // intercept first
  double lambda = 0.0;      // ridge weight on the non-intercept coefficients
  std::optional<LinearFit> m_all;
  std::optional<LogisticFit> pi0;

  double bias_at(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

using CovariateFunction = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// Penalized least squares sum_i (U_i - b(X_i) V_i)^2 + lambda |theta_b without intercept|^2
/// over the given residuals. Throws NumericalError when every V is ~0.
Eigen::VectorXd solve_bias_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& v, double lambda);

/// lambda from {0, 1e-3, 1e-2, 1e-1} * n by 5-fold cross-validation of the
/// held-out squared loss (folds by row index mod 5).
double select_bias_lambda(const Eigen::MatrixXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Fits m and pi0 on all control rows, then the bias regression. A missing
/// lambda is chosen by select_bias_lambda.
BiasFit fit_bias(const Dataset& ds, std::optional<double> lambda, const ModelOptions& opts = {});

/// Same regression with caller-supplied m and pi0 (e.g. the true functions).
BiasFit fit_bias_with_nuisances(const Dataset& ds, const CovariateFunction& m,
                                const CovariateFunction& pi0, std::optional<double> lambda);

struct CalibratedEcs {
  IndexList ec_indices;
  Eigen::VectorXd y_tilde;     // Y_j - b(X_j)
  Eigen::VectorXd bias_at_ec;  // b(X_j)
};

CalibratedEcs calibrate(const Dataset& ds, const BiasFit& fit);

/// Copy of ds with EC outcomes replaced by their calibrated values.
Dataset apply_calibration(const Dataset& ds, const CalibratedEcs& calibrated);

/// Calibrate all ECs, then run the adaptive borrowing scan on the result.
BorrowResult acib(const Dataset& ds, std::optional<double> lambda, const KGrid& grid,
                  const ScanOptions& opts);

/// Euclidean distances of the raw and calibrated EC outcomes from the ideal
/// outcomes mu0_hat(X_j), mu0 fit on the RCT controls.
struct CalibrationDistance {
  double raw = 0.0;
  double calibrated = 0.0;
};

CalibrationDistance calibration_distance(const Dataset& ds, const CalibratedEcs& calibrated,
                                         const ModelOptions& opts = {});

}  // namespace ecb
