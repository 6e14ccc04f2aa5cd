#include "ecb/borrowing.hpp"

#include <algorithm>

#include "ecb/error.hpp"
#include "ecb/parallel.hpp"

namespace ecb {

KGrid KGrid::with_step(Index n_ec, Index step) {
  if (n_ec < 0) throw DataError("KGrid: negative EC count");
  if (step < 1) throw DataError("KGrid: step must be >= 1");
  std::vector<Index> pts;
  for (Index k = 0; k < n_ec; k += step) pts.push_back(k);
  pts.push_back(n_ec);
  return KGrid(std::move(pts), step);
}

KGrid KGrid::default_for(Index n_ec) { return with_step(n_ec, std::max<Index>(1, n_ec / 20)); }

KGrid KGrid::from_points(std::vector<Index> points, Index n_ec) {
  if (points.empty() || points.front() != 0 || points.back() != n_ec) {
    throw DataError("KGrid: points must start at 0 and end at N_E");
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] <= points[i - 1]) throw DataError("KGrid: points must be strictly increasing");
  }
  Index step = points.size() > 1 ? points[1] - points[0] : 1;
  return KGrid(std::move(points), std::max<Index>(1, step));
}

BorrowResult scan(const Dataset& ds, const InfluenceRanking& ranking, const KGrid& grid,
                  const ScanOptions& opts) {
  const DataSplit sp = split(ds);
  if (grid.points().back() != sp.n_ec()) throw DataError("scan: grid does not end at N_E");
  if (ranking.size() != sp.n_ec()) throw DataError("scan: ranking does not cover every EC");

  const RctNuisances rct = fit_rct_nuisances(ds, sp, opts.model);
  const EstimateReport aipw = tau_aipw(ds.select(sp.rct), rct.mu0, rct.mu1, rct.e1, opts.model.clip);

  const std::size_t g = grid.size();
  std::vector<EstimateReport> reports(g);
  parallel_for(g, opts.jobs, [&](std::size_t i) {
    const Index k = grid.points()[i];
    try {
      const IndexList borrow = ranking.prefix(k);
      const NuisanceSet nu = extend_nuisances(ds, sp, rct, borrow, opts.model);
      IndexList rows = sp.rct;
      rows.insert(rows.end(), borrow.begin(), borrow.end());
      reports[i] = with_bias(tau_combined(ds.select(rows), nu), aipw);
    } catch (const std::exception& e) {
      throw NumericalError("scan failed at k = " + std::to_string(k) + ": " + e.what());
    }
  });

  BorrowResult out;
  out.grid = grid;
  out.aipw = aipw;
  for (const auto& r : reports) {
    out.mse_curve.push_back(r.mse_hat);
    out.bias_curve.push_back(r.bias_hat);
    out.se_curve.push_back(r.se_hat);
    out.tau_curve.push_back(r.tau_hat);
  }
  std::vector<double> criterion = out.mse_curve;
  if (opts.smooth_argmin && g >= 3) {
    for (std::size_t i = 0; i < g; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1, hi = std::min(g - 1, i + 1);
      double s = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) s += out.mse_curve[j];
      criterion[i] = s / static_cast<double>(hi - lo + 1);
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < g; ++i) {
    if (criterion[i] < criterion[best]) best = i;
  }
  out.k_hat = grid.points()[best];
  out.borrowed_indices = ranking.prefix(out.k_hat);
  out.final = reports[best];
  out.final.method = "aib";
  return out;
}

BorrowResult aib(const Dataset& ds, const KGrid& grid, const ScanOptions& opts) {
  const DataSplit sp = split(ds);
  if (sp.ec.empty()) {
    return scan(ds, InfluenceRanking{}, grid, opts);
  }
  const LinearFit mu0 = fit_outcome(ds, sp.rct_control, opts.model);
  return scan(ds, rank_and_nest(ds, sp, mu0), grid, opts);
}

std::string mse_curve_csv(const BorrowResult& result) {
  std::string out = "k,mse_hat,bias_hat,se_hat,tau_hat\n";
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    out += std::to_string(result.grid.points()[i]) + "," + format_double(result.mse_curve[i]) + "," +
           format_double(result.bias_curve[i]) + "," + format_double(result.se_curve[i]) + "," +
           format_double(result.tau_curve[i]) + "\n";
  }
  return out;
}

}  // namespace ecb
