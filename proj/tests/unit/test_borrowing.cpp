#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "designs.hpp"
#include "ecb/baselines.hpp"
#include "ecb/borrowing.hpp"
#include "ecb/error.hpp"

using namespace ecb;

namespace {

// Trial of n controls and n treated; the ECs are exact copies of the controls.
Dataset duplicated_controls(std::uint64_t seed, Index n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(3 * n, 2);
  Eigen::VectorXi a(3 * n), r(3 * n);
  Eigen::VectorXd y(3 * n);
  for (Index i = 0; i < 2 * n; ++i) {
    x(i, 0) = z(rng);
    x(i, 1) = z(rng);
    a(i) = i < n;
    r(i) = 1;
    y(i) = 1.0 + x(i, 0) - 0.5 * x(i, 1) + (a(i) ? 1.0 : 0.0) + z(rng);
  }
  for (Index j = 0; j < n; ++j) {
    x.row(2 * n + j) = x.row(n + j);
    y(2 * n + j) = y(n + j);
    a(2 * n + j) = 0;
    r(2 * n + j) = 0;
  }
  return Dataset(x, a, y, r);
}

}  // namespace

TEST_CASE("k grid construction") {
  CHECK(KGrid::default_for(1000).step() == 50);
  CHECK(KGrid::default_for(1000).size() == 21);
  CHECK(KGrid::default_for(10).points() == std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(KGrid::with_step(205, 50).points() == std::vector<Index>{0, 50, 100, 150, 200, 205});
  CHECK(KGrid::with_step(0, 50).points() == std::vector<Index>{0});
  CHECK(KGrid::from_points({0, 7, 30}, 30).size() == 3);
  CHECK_THROWS_AS(KGrid::with_step(10, 0), DataError);
  CHECK_THROWS_AS(KGrid::from_points({0, 5, 5, 30}, 30), DataError);
  CHECK_THROWS_AS(KGrid::from_points({0, 31}, 30), DataError);
  CHECK_THROWS_AS(KGrid::from_points({3, 30}, 30), DataError);
}

TEST_CASE("single-point grid returns the trial estimate") {
  const Dataset full = design::random_small(1);
  const Dataset ds = full.select(split(full).rct);
  const BorrowResult r = aib(ds, KGrid::from_points({0}, 0), {});
  CHECK(r.k_hat == 0);
  CHECK(r.borrowed_indices.empty());
  const EstimateReport base = nb(ds);
  CHECK(std::abs(r.final.tau_hat - base.tau_hat) < 1e-10);
  CHECK(std::abs(r.final.se_hat - base.se_hat) < 1e-10);
  const std::string csv = mse_curve_csv(r);
  CHECK(csv.rfind("k,mse_hat,bias_hat,se_hat,tau_hat\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("ECs that duplicate the controls: full borrowing beats none") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = duplicated_controls(seed, 60);
    const BorrowResult r = aib(ds, KGrid::with_step(60, 10), {});
    CHECK(std::abs(r.bias_curve.back()) < 1e-3);
    CHECK(r.mse_curve.back() < r.mse_curve.front());
    CHECK(r.k_hat > 0);
  }
}

// Intermediate prefixes of the duplicated set are not bias free, so the
// curve need not be monotone and the argmin can stop short of N_E.
TEST_CASE("ECs that duplicate the controls are all borrowed" * doctest::may_fail()) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const BorrowResult r = aib(duplicated_controls(seed, 60), KGrid::with_step(60, 10), {});
    CHECK(r.k_hat == 60);
  }
}

TEST_CASE("curve invariants") {
  const Dataset ds = design::random_small(3, 60, 45, 2);
  const KGrid grid = KGrid::with_step(45, 5);
  const BorrowResult r = aib(ds, grid, {});
  REQUIRE(r.mse_curve.size() == grid.size());

  SUBCASE("endpoints") {
    const EstimateReport base = nb(ds);
    CHECK(r.mse_curve.front() == doctest::Approx(base.se_hat * base.se_hat).epsilon(1e-10));
    CHECK(r.bias_curve.front() == doctest::Approx(0.0));
    const EstimateReport full = fb(ds);
    CHECK(r.mse_curve.back() == doctest::Approx(full.mse_hat).epsilon(1e-10));
    CHECK(r.tau_curve.back() == doctest::Approx(full.tau_hat).epsilon(1e-10));
  }
  SUBCASE("argmin with ties to the smaller k") {
    const auto best = std::min_element(r.mse_curve.begin(), r.mse_curve.end());
    CHECK(r.k_hat == grid.points()[static_cast<std::size_t>(best - r.mse_curve.begin())]);
    CHECK(r.final.mse_hat == doctest::Approx(*best));
  }
  SUBCASE("curve consistency") {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(r.mse_curve[i] == doctest::Approx(r.bias_curve[i] * r.bias_curve[i] + r.se_curve[i] * r.se_curve[i]));
      CHECK(r.bias_curve[i] == doctest::Approx(r.tau_curve[i] - r.aipw.tau_hat));
    }
  }
  SUBCASE("nested borrow sets") {
    const LinearFit mu0 = fit_outcome(ds, split(ds).rct_control, {});
    const InfluenceRanking ranking = rank_and_nest(ds, split(ds), mu0);
    CHECK(r.borrowed_indices == ranking.prefix(r.k_hat));
    for (Index k = 0; k + 5 <= 45; k += 5) {
      const IndexList small = ranking.prefix(k), big = ranking.prefix(k + 5);
      CHECK(std::equal(small.begin(), small.end(), big.begin()));
    }
  }
  SUBCASE("scan matches per-k estimates") {
    const LinearFit mu0 = fit_outcome(ds, split(ds).rct_control, {});
    const InfluenceRanking ranking = rank_and_nest(ds, split(ds), mu0);
    for (const std::size_t i : {std::size_t{2}, std::size_t{5}}) {
      const Index k = grid.points()[i];
      const EstimateReport e = estimate_with_borrow_set(ds, ranking.prefix(k));
      CHECK(r.tau_curve[i] == doctest::Approx(e.tau_hat).epsilon(1e-8));
    }
  }
}

TEST_CASE("scan is independent of the worker count") {
  const Dataset ds = design::two_cluster(4, 100, 100, 200, 100, 5.0);
  ScanOptions one, many;
  many.jobs = 4;
  const BorrowResult a = aib(ds, KGrid::with_step(200, 20), one);
  const BorrowResult b = aib(ds, KGrid::with_step(200, 20), many);
  CHECK(a.mse_curve == b.mse_curve);
  CHECK(a.k_hat == b.k_hat);
  CHECK(a.final.tau_hat == b.final.tau_hat);
}

TEST_CASE("smoothed argmin") {
  const Dataset ds = design::random_small(6, 60, 45, 2);
  ScanOptions opts;
  opts.smooth_argmin = true;
  const BorrowResult smooth = aib(ds, KGrid::with_step(45, 5), opts);
  const BorrowResult raw = aib(ds, KGrid::with_step(45, 5), {});
  CHECK(smooth.mse_curve == raw.mse_curve);
  CHECK(smooth.k_hat % 5 == 0);
}

TEST_CASE("shifted cluster is mostly left out") {
  const Dataset ds = design::two_cluster(8, 200, 200, 300, 150, 20.0);
  const BorrowResult r = aib(ds, KGrid::with_step(300, 25), {});
  CHECK(r.k_hat <= 175);
  CHECK(r.mse_curve.back() > r.mse_curve[6]);
}

TEST_CASE("mse curve csv") {
  const Dataset ds = design::random_small(9);
  const BorrowResult r = aib(ds, KGrid::with_step(30, 10), {});
  const std::string csv = mse_curve_csv(r);
  CHECK(csv.rfind("k,mse_hat,bias_hat,se_hat,tau_hat\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("\n30,") != std::string::npos);
}
