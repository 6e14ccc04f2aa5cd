#pragma once

#include <string>
#include <vector>

#include "ecb/dataset.hpp"
#include "ecb/estimators.hpp"
#include "ecb/influence.hpp"
#include "ecb/nuisance.hpp"

namespace ecb {

/// Candidate borrow-set sizes: strictly increasing, starts at 0, ends at N_E.
class KGrid {
 public:
  static KGrid with_step(Index n_ec, Index step);
  /// step = max(1, N_E / 20).
  static KGrid default_for(Index n_ec);
  static KGrid from_points(std::vector<Index> points, Index n_ec);

  const std::vector<Index>& points() const { return points_; }
  Index step() const { return step_; }
  std::size_t size() const { return points_.size(); }

 private:
  KGrid(std::vector<Index> points, Index step) : points_(std::move(points)), step_(step) {}
  std::vector<Index> points_;
  Index step_ = 1;
};

struct ScanOptions {
  ModelOptions model;
  int jobs = 1;
  /// Moving average (window 3) of the MSE curve, used only for the argmin.
  bool smooth_argmin = false;
};

struct BorrowResult {
  KGrid grid = KGrid::with_step(0, 1);
  std::vector<double> mse_curve;
  std::vector<double> bias_curve;
  std::vector<double> se_curve;
  std::vector<double> tau_curve;
  Index k_hat = 0;
  IndexList borrowed_indices;
  EstimateReport final;
  EstimateReport aipw;
  bool calibrated = false;
};

/// Evaluates the combined estimator on R u S_k for every k in the grid and
/// picks the k with the smallest estimated MSE (ties go to the smaller k).
/// m0 and pi are refit per grid point; mu0, mu1, e1 and tau_aipw once.
/// Throws NumericalError naming the offending k if a fit fails.
BorrowResult scan(const Dataset& ds, const InfluenceRanking& ranking, const KGrid& grid,
                  const ScanOptions& opts);

/// Full adaptive borrowing: fit mu0, rank ECs by influence, scan.
BorrowResult aib(const Dataset& ds, const KGrid& grid, const ScanOptions& opts);

/// CSV with header "k,mse_hat,bias_hat,se_hat,tau_hat".
std::string mse_curve_csv(const BorrowResult& result);

}  // namespace ecb
