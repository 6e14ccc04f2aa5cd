#include "ecb/methods.hpp"

#include <algorithm>
#include <cctype>

#include "ecb/calibration.hpp"
#include "ecb/error.hpp"

namespace ecb {

std::string to_string(Method m) {
  switch (m) {
    case Method::kNb: return "nb";
    case Method::kFb: return "fb";
    case Method::kFcb: return "fcb";
    case Method::kAlb: return "alb";
    case Method::kAib: return "aib";
    case Method::kAcib: return "acib";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const Method m : all_methods()) {
    if (to_string(m) == lower) return m;
  }
  throw DataError("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll{Method::kNb,  Method::kFb,  Method::kFcb,
                                        Method::kAlb, Method::kAib, Method::kAcib};
  return kAll;
}

KGrid grid_for(const Dataset& ds, const MethodOptions& opts) {
  const Index n_ec = ds.rows() - ds.source().sum();
  return opts.grid_step ? KGrid::with_step(n_ec, *opts.grid_step) : KGrid::default_for(n_ec);
}

MethodOutcome run_method(Method method, const Dataset& ds, const MethodOptions& opts) {
  MethodOutcome out;
  const ScanOptions scan_opts{opts.model, opts.jobs, opts.smooth_argmin};
  switch (method) {
    case Method::kNb:
      out.report = nb(ds, opts.model);
      break;
    case Method::kFb:
      out.report = fb(ds, opts.model);
      break;
    case Method::kFcb:
      out.report = fcb(ds, opts.bias_lambda, opts.model);
      break;
    case Method::kAlb: {
      const Index n_ec = ds.rows() - ds.source().sum();
      if (n_ec == 0) {
        out.report = nb(ds, opts.model);
        out.report.method = "alb";
        break;
      }
      AlbResult r = alb(ds, opts.alb_lambdas.value_or(default_alb_lambdas(n_ec)), opts.alb_nu, opts.model);
      out.report = std::move(r.report);
      out.alb = std::move(r.fit);
      break;
    }
    case Method::kAib: {
      BorrowResult r = aib(ds, grid_for(ds, opts), scan_opts);
      out.report = r.final;
      out.borrow = std::move(r);
      break;
    }
    case Method::kAcib: {
      const Index n_ec = ds.rows() - ds.source().sum();
      BorrowResult r = n_ec == 0 ? aib(ds, grid_for(ds, opts), scan_opts)
                                 : acib(ds, opts.bias_lambda, grid_for(ds, opts), scan_opts);
      r.final.method = "acib";
      out.report = r.final;
      out.borrow = std::move(r);
      break;
    }
  }
  return out;
}

}  // namespace ecb
