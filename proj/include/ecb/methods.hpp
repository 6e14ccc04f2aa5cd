#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecb/baselines.hpp"
#include "ecb/borrowing.hpp"
#include "ecb/dataset.hpp"
#include "ecb/estimators.hpp"

namespace ecb {

enum class Method { kNb, kFb, kFcb, kAlb, kAib, kAcib };

std::string to_string(Method m);
/// Accepts nb, fb, fcb, alb, aib, acib (any case). Throws DataError otherwise.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

struct MethodOptions {
  ModelOptions model;
  std::optional<Index> grid_step;     // nullopt: KGrid::default_for
  std::optional<double> bias_lambda;  // nullopt: cross-validated
  std::optional<std::vector<double>> alb_lambdas;
  double alb_nu = 2.0;
  int jobs = 1;
  bool smooth_argmin = false;
};

struct MethodOutcome {
  EstimateReport report;
  std::optional<BorrowResult> borrow;  // aib / acib
  std::optional<AlbFit> alb;
};

KGrid grid_for(const Dataset& ds, const MethodOptions& opts);

MethodOutcome run_method(Method method, const Dataset& ds, const MethodOptions& opts);

}  // namespace ecb
