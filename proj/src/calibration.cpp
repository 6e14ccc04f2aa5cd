#include "ecb/calibration.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "ecb/error.hpp"

namespace ecb {

namespace {

struct Residuals {
  Eigen::MatrixXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

IndexList control_rows(const Dataset& ds) {
  IndexList rows;
  for (Index i = 0; i < ds.rows(); ++i) {
    if (!ds.is_treated(i)) rows.push_back(i);
  }
  return rows;
}

void require_both_sources(const Dataset& controls) {
  const Index n_rct = controls.source().sum();
  if (n_rct == 0 || n_rct == controls.rows()) {
    throw DataError("fit_bias: need both RCT controls and external controls");
  }
}

Residuals residuals(const Dataset& controls, const CovariateFunction& m, const CovariateFunction& pi0) {
  Residuals r{controls.covariates(), Eigen::VectorXd(controls.rows()), Eigen::VectorXd(controls.rows())};
  for (Index i = 0; i < controls.rows(); ++i) {
    const auto x = controls.covariates().row(i).transpose();
    r.u(i) = controls.outcome()(i) - m(x);
    r.v(i) = pi0(x) - static_cast<double>(controls.source()(i));
  }
  return r;
}

BiasFit finish_fit(const Residuals& r, std::optional<double> lambda) {
  BiasFit fit;
  fit.lambda = lambda.has_value() ? *lambda : select_bias_lambda(r.x, r.u, r.v);
  fit.theta_b = solve_bias_regression(r.x, r.u, r.v, fit.lambda);
  return fit;
}

}  // namespace

double BiasFit::bias_at(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return theta_b(0) + theta_b.tail(theta_b.size() - 1).dot(x);
}

Eigen::VectorXd solve_bias_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& v, double lambda) {
  if (lambda < 0) throw DataError("bias regression: lambda must be nonnegative");
  if (v.size() == 0 || v.cwiseAbs().maxCoeff() < 1e-12) {
    throw NumericalError("bias regression: sampling-score residuals are all zero; b(X) is not identified");
  }
  const Eigen::MatrixXd design = v.asDiagonal() * with_intercept(x);
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().tail(x.cols()).array() += lambda;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
    throw NumericalError("bias regression: singular normal equations");
  }
  return ldlt.solve(design.transpose() * u);
}

double select_bias_lambda(const Eigen::MatrixXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  constexpr int kFolds = 5;
  constexpr std::array<double, 4> kScales{0.0, 1e-3, 1e-2, 1e-1};
  const Index n = x.rows();
  double best_lambda = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const double scale : kScales) {
    const double lambda = scale * static_cast<double>(n);
    double loss = 0.0;
    for (int f = 0; f < kFolds; ++f) {
      IndexList train, test;
      for (Index i = 0; i < n; ++i) (i % kFolds == f ? test : train).push_back(i);
      Eigen::MatrixXd xt(train.size(), x.cols());
      Eigen::VectorXd ut(train.size()), vt(train.size());
      for (std::size_t k = 0; k < train.size(); ++k) {
        xt.row(k) = x.row(train[k]);
        ut(k) = u(train[k]);
        vt(k) = v(train[k]);
      }
      Eigen::VectorXd theta;
      try {
        theta = solve_bias_regression(xt, ut, vt, lambda * static_cast<double>(train.size()) / n);
      } catch (const NumericalError&) {
        loss = std::numeric_limits<double>::infinity();
        break;
      }
      for (const Index i : test) {
        const double b = theta(0) + theta.tail(x.cols()).dot(x.row(i));
        loss += (u(i) - b * v(i)) * (u(i) - b * v(i));
      }
    }
    if (loss < best_loss) {
      best_loss = loss;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

BiasFit fit_bias(const Dataset& ds, std::optional<double> lambda, const ModelOptions& opts) {
  const Dataset controls = ds.select(control_rows(ds));
  require_both_sources(controls);
  const double ridge = opts.ridge.value_or(default_ridge(controls.covariates()));
  LinearFit m_all = fit_linear(controls.covariates(), controls.outcome(), ridge, opts.link);
  LogisticFit pi0 = fit_logistic(controls.covariates(), controls.source(), opts.clip);
  const Residuals r = residuals(
      controls, [&](const auto& x) { return m_all.predict(x); },
      [&](const auto& x) { return pi0.probability(x); });
  BiasFit fit = finish_fit(r, lambda);
  fit.m_all = std::move(m_all);
  fit.pi0 = std::move(pi0);
  return fit;
}

BiasFit fit_bias_with_nuisances(const Dataset& ds, const CovariateFunction& m,
                                const CovariateFunction& pi0, std::optional<double> lambda) {
  const Dataset controls = ds.select(control_rows(ds));
  require_both_sources(controls);
  return finish_fit(residuals(controls, m, pi0), lambda);
}

CalibratedEcs calibrate(const Dataset& ds, const BiasFit& fit) {
  if (fit.theta_b.size() != ds.dim() + 1) throw DataError("calibrate: bias fit dimension mismatch");
  CalibratedEcs out;
  for (Index i = 0; i < ds.rows(); ++i) {
    if (!ds.is_rct(i)) out.ec_indices.push_back(i);
  }
  const auto n = static_cast<Index>(out.ec_indices.size());
  out.y_tilde.resize(n);
  out.bias_at_ec.resize(n);
  for (Index k = 0; k < n; ++k) {
    const Index i = out.ec_indices[static_cast<std::size_t>(k)];
    out.bias_at_ec(k) = fit.bias_at(ds.covariates().row(i).transpose());
    out.y_tilde(k) = ds.outcome()(i) - out.bias_at_ec(k);
  }
  return out;
}

Dataset apply_calibration(const Dataset& ds, const CalibratedEcs& calibrated) {
  if (calibrated.ec_indices.empty()) return ds;
  return ds.with_outcomes(calibrated.ec_indices, calibrated.y_tilde);
}

BorrowResult acib(const Dataset& ds, std::optional<double> lambda, const KGrid& grid,
                  const ScanOptions& opts) {
  const BiasFit fit = fit_bias(ds, lambda, opts.model);
  const Dataset calibrated = apply_calibration(ds, calibrate(ds, fit));
  BorrowResult result = aib(calibrated, grid, opts);
  result.calibrated = true;
  result.final.method = "acib";
  return result;
}

CalibrationDistance calibration_distance(const Dataset& ds, const CalibratedEcs& calibrated,
                                         const ModelOptions& opts) {
  const DataSplit sp = split(ds);
  const LinearFit mu0 = fit_outcome(ds, sp.rct_control, opts);
  CalibrationDistance d;
  for (std::size_t k = 0; k < calibrated.ec_indices.size(); ++k) {
    const Index i = calibrated.ec_indices[k];
    const double ideal = mu0.predict(ds.covariates().row(i).transpose());
    const double raw = ds.outcome()(i) - ideal;
    const double cal = calibrated.y_tilde(static_cast<Index>(k)) - ideal;
    d.raw += raw * raw;
    d.calibrated += cal * cal;
  }
  d.raw = std::sqrt(d.raw);
  d.calibrated = std::sqrt(d.calibrated);
  return d;
}

}  // namespace ecb
