#include "ecb/estimators.hpp"

#include <cmath>

#include "ecb/error.hpp"

namespace ecb {

namespace {

void finish(EstimateReport& r) {
  r.n_used = r.phi_values.size();
  r.tau_hat = r.phi_values.mean();
  r.se_hat = r.n_used > 1 ? std::sqrt(sample_variance(r.phi_values) / static_cast<double>(r.n_used)) : 0.0;
  r.mse_hat = mse_hat(r);
  if (!std::isfinite(r.tau_hat) || !std::isfinite(r.se_hat)) {
    throw NumericalError("estimator produced a non-finite value");
  }
}

}  // namespace

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

EstimateReport tau_aipw(const Dataset& rct, const LinearFit& mu0, const LinearFit& mu1,
                        const ProbabilityModel& e1, double clip) {
  EstimateReport r;
  r.method = "aipw";
  r.phi_values.resize(rct.rows());
  for (Index i = 0; i < rct.rows(); ++i) {
    if (!rct.is_rct(i)) throw DataError("tau_aipw: dataset contains EC rows");
    const auto x = rct.covariates().row(i).transpose();
    const double e = e1(x);
    if (!(e >= clip && e <= 1.0 - clip)) {
      throw NumericalError("tau_aipw: propensity " + std::to_string(e) + " outside the clip range");
    }
    const double m1 = mu1.predict(x), m0 = mu0.predict(x);
    const double a = rct.treatment()(i), y = rct.outcome()(i);
    r.phi_values(i) = a * (y - m1) / e - (1.0 - a) * (y - m0) / (1.0 - e) + m1 - m0;
  }
  finish(r);
  return r;
}

EstimateReport tau_combined(const Dataset& combined, const NuisanceSet& nu) {
  Index n_rct = 0;
  for (Index i = 0; i < combined.rows(); ++i) n_rct += combined.source()(i);
  if (n_rct != nu.n_rct || combined.rows() - n_rct != nu.n_borrowed) {
    throw DataError("tau_combined: nuisances were assembled on a different R u S");
  }
  EstimateReport r;
  r.method = "combined";
  r.k_borrowed = nu.n_borrowed;
  r.phi_values.resize(combined.rows());
  const double q = nu.q_hat;
  for (Index i = 0; i < combined.rows(); ++i) {
    const auto x = combined.covariates().row(i).transpose();
    const double raw = nu.e_s(x);
    if (!std::isfinite(raw)) throw NumericalError("tau_combined: non-finite propensity");
    const double es = std::clamp(raw, nu.clip, 1.0 - nu.clip);
    if (es != raw) ++r.n_clipped;
    const double pi = nu.pi(x);
    const double m1 = nu.m1.predict(x), m0 = nu.m0.predict(x);
    const double a = combined.treatment()(i), rr = combined.source()(i), y = combined.outcome()(i);
    r.phi_values(i) = pi / q * (rr * a * (y - m1) / es - (1.0 - a) * (y - m0) / (1.0 - es)) +
                      rr / q * (m1 - m0);
  }
  finish(r);
  return r;
}

double bias_hat(const EstimateReport& tau_s, const EstimateReport& tau_rct) {
  return tau_s.tau_hat - tau_rct.tau_hat;
}

double mse_hat(const EstimateReport& report) {
  return report.bias_hat * report.bias_hat + report.se_hat * report.se_hat;
}

EstimateReport with_bias(EstimateReport tau_s, const EstimateReport& tau_rct) {
  tau_s.bias_hat = bias_hat(tau_s, tau_rct);
  tau_s.mse_hat = mse_hat(tau_s);
  return tau_s;
}

}  // namespace ecb
