#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "ecb/dataset.hpp"

namespace ecb {

/// Mean function of an outcome model: theta'(1, x) or exp(theta'(1, x)).
enum class OutcomeLink { kIdentity, kExp };

/// Squared-loss ERM for an outcome regression,
///   (1/N) sum_i (y_i - mu(x_i; theta))^2 + ridge * |theta without intercept|^2.
///
/// `hessian` is the Hessian of that objective at theta (for the identity link
/// (2/N) X'X + 2 ridge D, with D the identity minus its intercept entry).
struct LinearFit {
  Eigen::VectorXd theta;  // intercept first
  Eigen::MatrixXd hessian;
  double ridge = 0.0;
  Index n_fit = 0;
  OutcomeLink link = OutcomeLink::kIdentity;
  std::uint64_t data_hash = 0;
  bool converged = true;
  int iterations = 0;

  Index dim() const { return theta.size() - 1; }
  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& x) const;
  /// d mu(x; theta) / d theta.
  Eigen::VectorXd mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Logistic regression fit by damped Newton (IRLS) iterations.
struct LogisticFit {
  Eigen::VectorXd beta;  // intercept first
  bool converged = false;
  int iterations = 0;
  double clip = 0.01;

  double raw_probability(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Clipped to [clip, 1 - clip].
  double probability(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// A probability evaluated at covariates: either a known constant or a logistic fit.
class ProbabilityModel {
 public:
  explicit ProbabilityModel(double constant = 1.0) : model_(constant) {}
  explicit ProbabilityModel(LogisticFit fit) : model_(std::move(fit)) {}

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool is_constant() const { return std::holds_alternative<double>(model_); }
  double constant() const { return std::get<double>(model_); }
  const LogisticFit& fit() const { return std::get<LogisticFit>(model_); }

 private:
  std::variant<double, LogisticFit> model_;
};

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x);

/// Numerical-stability ridge: 1e-6 * trace((2/N) X'X) / (d + 1).
double default_ridge(const Eigen::MatrixXd& x);

/// Throws NumericalError for a rank-deficient design with ridge = 0.
LinearFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                     OutcomeLink link = OutcomeLink::kIdentity);

/// At most `max_iterations` Newton steps. Divergence (|beta| > 1e4), a singular
/// information matrix, or hitting the cap all return converged = false.
/// Throws DataError when only one label class is present.
LogisticFit fit_logistic(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                         double clip = 0.01, const Eigen::VectorXd* warm_start = nullptr,
                         int max_iterations = 200);

double predict_outcome(const LinearFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x);

enum class PropensityMode { kKnown, kFitted };

struct ModelOptions {
  OutcomeLink link = OutcomeLink::kIdentity;
  std::optional<double> ridge;  // nullopt: default_ridge per fit
  double clip = 0.01;
  PropensityMode e1_mode = PropensityMode::kKnown;
  std::optional<double> e1_known;  // nullopt with kKnown: N_t / N_R
};

LinearFit fit_outcome(const Dataset& ds, std::span<const Index> rows, const ModelOptions& opts);

/// Models that depend only on trial rows; shared by every candidate borrow set.
struct RctNuisances {
  LinearFit mu0;
  LinearFit mu1;
  ProbabilityModel e1;
};

/// Every nuisance needed by the combined estimator on R u S.
struct NuisanceSet {
  LinearFit mu0, mu1;
  LinearFit m0, m1;  // m1 is mu1
  ProbabilityModel e1;
  ProbabilityModel pi;  // constant 1 when S is empty
  double q_hat = 1.0;   // N_R / (N_R + N_S)
  Index n_rct = 0;
  Index n_borrowed = 0;
  double clip = 0.01;

  /// e_S(x) = e1(x) * pi(x), unclipped.
  double e_s(const Eigen::Ref<const Eigen::VectorXd>& x) const { return e1(x) * pi(x); }
};

RctNuisances fit_rct_nuisances(const Dataset& ds, const DataSplit& split, const ModelOptions& opts);

/// Refits m0 on RCT controls u S and pi on R u S. `pi_warm_start` seeds the
/// logistic fit (e.g. with the fit from a neighbouring borrow set).
NuisanceSet extend_nuisances(const Dataset& ds, const DataSplit& split, const RctNuisances& rct,
                             std::span<const Index> borrow_set, const ModelOptions& opts,
                             const Eigen::VectorXd* pi_warm_start = nullptr);

NuisanceSet assemble_nuisances(const Dataset& ds, std::span<const Index> borrow_set,
                               const ModelOptions& opts);

}  // namespace ecb
