#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

// Independent reference computations for the tests. None of these call into
// the library's fitting code.
namespace oracle {

/// Dense Gaussian elimination with partial pivoting.
Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b);

/// argmin (1/n) |y - X1 theta|^2 + ridge |theta_{1..d}|^2, X1 = [1, X].
Eigen::VectorXd ridge_normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge);

/// Central differences of f at theta.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
                                 double h = 1e-6);

/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// For each candidate (xe_j, ye_j): refit the ridge regression on the controls
/// plus that one row and return sum_i |loss_i(new) - loss_i(old)| over the controls.
std::vector<double> retrain_loss_deltas(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, const Eigen::MatrixXd& xe,
                                        const Eigen::VectorXd& ye, double ridge);

/// Variance of N(0, 1) truncated to [-b, b].
double truncated_normal_variance(double b);

/// Golden-section minimizer of a unimodal function on [lo, hi].
double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

/// Plain AIPW with constant propensity, written out from the definition.
double aipw_constant_propensity(const Eigen::VectorXi& a, const Eigen::VectorXd& y, const Eigen::VectorXd& m0,
                                const Eigen::VectorXd& m1, double e);

}  // namespace oracle
