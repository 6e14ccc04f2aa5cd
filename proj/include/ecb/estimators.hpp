#pragma once

#include <string>

#include <Eigen/Dense>

#include "ecb/dataset.hpp"
#include "ecb/nuisance.hpp"

namespace ecb {

/// Point estimate with plug-in variance, bias and MSE.
///
/// se_hat^2 = sample variance(phi_values) / n_used and
/// mse_hat = bias_hat^2 + se_hat^2.
struct EstimateReport {
  std::string method;
  double tau_hat = 0.0;
  double se_hat = 0.0;
  double bias_hat = 0.0;
  double mse_hat = 0.0;
  Index n_used = 0;
  Index k_borrowed = 0;
  Index n_clipped = 0;  // rows whose propensity hit the clip bounds
  Eigen::VectorXd phi_values;
};

/// RCT-only augmented IPW estimate. `rct` must hold trial rows only.
EstimateReport tau_aipw(const Dataset& rct, const LinearFit& mu0, const LinearFit& mu1,
                        const ProbabilityModel& e1, double clip = 0.01);

/// Combined estimate on R u S from the efficient influence function under
/// exchangeability of the borrowed ECs. bias_hat is left at 0; see with_bias.
EstimateReport tau_combined(const Dataset& combined, const NuisanceSet& nu);

double bias_hat(const EstimateReport& tau_s, const EstimateReport& tau_rct);
double mse_hat(const EstimateReport& report);

/// Sets bias_hat = tau_s - tau_aipw and refreshes mse_hat.
EstimateReport with_bias(EstimateReport tau_s, const EstimateReport& tau_rct);

double sample_variance(const Eigen::VectorXd& v);

}  // namespace ecb
