#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecb/dataset.hpp"
#include "ecb/methods.hpp"

namespace ecb {

enum class Mechanism { kLinear, kNonlinear };

std::string to_string(Mechanism m);
Mechanism parse_mechanism(const std::string& name);

/// Synthetic trial + external-control design.
///
/// Covariates are i.i.d. N(0, 1) truncated to [-2, 2]. The n_rct trial rows
/// are drawn from the n_rct + n_ec pool by weighted sampling without
/// replacement with weights logistic(c + selection_slope * sum(x)), c set so
/// the mean weight is n_rct / N. Within the trial exactly n_treated rows are
/// treated, completely at random.
///
/// Linear:    Y(0) = b'x + e,       Y(1) = Y(0) + a'(1, x),  EC: b'x + delta * 0.05 * sum(x) + e'
/// Nonlinear: Y(0) = exp(b'x) + e,  Y(1) = exp(b'x + a'(1, x)) + e,  EC: exp(b'x) + delta * 0.1 * sum(x) + e'
/// with a = 0.1 * ones(d + 1), b ~ U[2, 3]^d (Linear) or U[-1, 1]^d (Nonlinear)
/// drawn once from beta_seed, e ~ N(0, sigma_rct^2) and e' ~ N(0, sigma_ec^2).
struct DgpConfig {
  Mechanism mechanism = Mechanism::kLinear;
  Index d = 8;
  Index n_rct = 300;
  Index n_treated = 200;
  Index n_ec = 1000;
  double delta = 0.0;
  std::uint64_t seed = 1;
  std::uint64_t beta_seed = 2024;
  double sigma_rct = 1.0;
  double sigma_ec = 1.2;
  double selection_slope = 0.3;

  void validate() const;
};

/// SplitMix64 of (base, stream): independent, order-free RNG streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Rejection sampling of N(0, 1) restricted to [-bound, bound].
Eigen::MatrixXd sample_truncated_normal(Index n, Index d, std::mt19937_64& rng, double bound = 2.0);

Eigen::VectorXd draw_beta(const DgpConfig& config);

/// E[Y(1) - Y(0) | X = x].
double conditional_effect(const DgpConfig& config, const Eigen::VectorXd& beta,
                          const Eigen::Ref<const Eigen::VectorXd>& x);
/// E[Y | X = x, A = 0] in the trial (is_ec = false) or among ECs.
double control_mean(const DgpConfig& config, const Eigen::VectorXd& beta,
                    const Eigen::Ref<const Eigen::VectorXd>& x, bool is_ec);

Dataset generate(const DgpConfig& config);

/// Trial-population ATE by Monte Carlo: average conditional effect over the
/// trial rows of repeated selection draws, at least `n_draws` rows in total.
/// Cached per (mechanism, d, sizes, beta_seed, slope, n_draws).
double true_ate(const DgpConfig& config, Index n_draws = 100000);

/// Outcome link matching the mechanism (exp for Nonlinear).
MethodOptions default_method_options(const DgpConfig& config);

struct ReplicationReport {
  std::string method;
  double est_mean = 0.0;
  double bias_abs = 0.0;
  double sd_empirical = 0.0;
  double sd_estimated_mean = 0.0;
  double mse_empirical = 0.0;
  double mse_estimated_mean = 0.0;
  Index n_ecs_modal = 0;
  Index n_reps = 0;
  Index n_failed = 0;
  double tau_true = 0.0;
  std::string tau_true_source = "monte-carlo";
  std::vector<double> estimates;
  std::vector<double> se_hats;
  std::vector<Index> n_ecs;
};

struct ReplicationOptions {
  MethodOptions methods;
  int jobs = 1;
  Index truth_draws = 100000;
  std::optional<double> tau_true;  // overrides the Monte Carlo truth
};

/// Rep r uses seed derive_seed(config.seed, r); every method sees the same
/// data. Results are independent of `jobs`. A method failing on more than 5%
/// of replications raises NumericalError.
std::vector<ReplicationReport> replicate(const DgpConfig& config, const std::vector<Method>& methods,
                                         Index n_reps, const ReplicationOptions& opts);

Index modal_value(const std::vector<Index>& values);

/// method,est,bias_abs,sd,sd_hat,mse,mse_hat,n_ecs,n_reps,n_failed,tau_true,tau_source
/// (prefixed by a delta column when `delta` is set).
std::string replication_csv(const std::vector<ReplicationReport>& reports, std::optional<double> delta = {},
                            bool header = true);

/// Small one-covariate designs with X ~ U(0, 2) and RCT controls 2X + N(0, 0.2^2):
///   kOutliers:    EC -0.9 + 2.5X + N(0, 0.5^2) plus five outliers (1.6..2.0, 0.5)
///   kShiftedLine: EC -2 + 3X + N(0, 0.4^2)
///   kQuadratic:   EC X^2 - 2X + 2 + N(0, 0.4^2)
/// Treated rows (n_treated, may be 0) follow 2X + 1 + N(0, 0.2^2).
enum class Illustration { kOutliers, kShiftedLine, kQuadratic };

Dataset generate_illustration(Illustration which, std::uint64_t seed, Index n_control = 100,
                              Index n_ec = 200, Index n_treated = 100);

}  // namespace ecb
