#include "ecb/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

#include "ecb/error.hpp"
#include "ecb/parallel.hpp"

namespace ecb {

namespace {

constexpr std::uint64_t kTruthStream = 0x7472757468ULL;  // "truth"

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double shift_coefficient(Mechanism m) { return m == Mechanism::kLinear ? 0.05 : 0.1; }

// Trial membership: weighted sampling without replacement (Efraimidis-Spirakis
// keys log(u) / w), weights from a logistic score centered on n_rct / N.
Eigen::VectorXi select_trial_rows(const Eigen::MatrixXd& x, const DgpConfig& c, std::mt19937_64& rng) {
  const Index n = x.rows();
  const Eigen::VectorXd score = c.selection_slope * x.rowwise().sum();
  const double target = static_cast<double>(c.n_rct) / static_cast<double>(n);
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (Index i = 0; i < n; ++i) mean += logistic(mid + score(i));
    mean /= static_cast<double>(n);
    (mean < target ? lo : hi) = mid;
  }
  const double intercept = 0.5 * (lo + hi);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<double, Index>> keys(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    keys[static_cast<std::size_t>(i)] = {std::log(u) / logistic(intercept + score(i)), i};
  }
  std::partial_sort(keys.begin(), keys.begin() + c.n_rct, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  Eigen::VectorXi r = Eigen::VectorXi::Zero(n);
  for (Index k = 0; k < c.n_rct; ++k) r(keys[static_cast<std::size_t>(k)].second) = 1;
  return r;
}

}  // namespace

std::string to_string(Mechanism m) { return m == Mechanism::kLinear ? "linear" : "nonlinear"; }

Mechanism parse_mechanism(const std::string& name) {
  if (name == "linear" || name == "Linear") return Mechanism::kLinear;
  if (name == "nonlinear" || name == "Nonlinear") return Mechanism::kNonlinear;
  throw DataError("unknown mechanism '" + name + "'");
}

void DgpConfig::validate() const {
  if (d < 1) throw DataError("DgpConfig: d must be >= 1");
  if (n_treated < 1 || n_treated >= n_rct) throw DataError("DgpConfig: need 0 < n_treated < n_rct");
  if (n_ec < 0) throw DataError("DgpConfig: n_ec must be >= 0");
  if (delta < 0) throw DataError("DgpConfig: delta must be >= 0");
  if (!(sigma_rct > 0) || !(sigma_ec > 0)) throw DataError("DgpConfig: noise scales must be positive");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd sample_truncated_normal(Index n, Index d, std::mt19937_64& rng, double bound) {
  if (n < 1 || d < 1) throw DataError("sample_truncated_normal: n and d must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      double v = normal(rng);
      while (v < -bound || v > bound) v = normal(rng);
      x(i, j) = v;
    }
  }
  return x;
}

Eigen::VectorXd draw_beta(const DgpConfig& config) {
  std::mt19937_64 rng(config.beta_seed);
  const bool linear = config.mechanism == Mechanism::kLinear;
  std::uniform_real_distribution<double> unif(linear ? 2.0 : -1.0, linear ? 3.0 : 1.0);
  Eigen::VectorXd beta(config.d);
  for (Index j = 0; j < config.d; ++j) beta(j) = unif(rng);
  return beta;
}

double conditional_effect(const DgpConfig& config, const Eigen::VectorXd& beta,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double alpha_term = 0.1 + 0.1 * x.sum();
  if (config.mechanism == Mechanism::kLinear) return alpha_term;
  const double base = beta.dot(x);
  return std::exp(base + alpha_term) - std::exp(base);
}

double control_mean(const DgpConfig& config, const Eigen::VectorXd& beta,
                    const Eigen::Ref<const Eigen::VectorXd>& x, bool is_ec) {
  const double base = config.mechanism == Mechanism::kLinear ? beta.dot(x) : std::exp(beta.dot(x));
  return is_ec ? base + config.delta * shift_coefficient(config.mechanism) * x.sum() : base;
}

Dataset generate(const DgpConfig& config) {
  config.validate();
  const Eigen::VectorXd beta = draw_beta(config);
  std::mt19937_64 rng(config.seed);
  const Index n = config.n_rct + config.n_ec;
  Eigen::MatrixXd x = sample_truncated_normal(n, config.d, rng);
  Eigen::VectorXi r = select_trial_rows(x, config, rng);

  IndexList trial;
  for (Index i = 0; i < n; ++i) {
    if (r(i) == 1) trial.push_back(i);
  }
  std::shuffle(trial.begin(), trial.end(), rng);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(n);
  for (Index k = 0; k < config.n_treated; ++k) a(trial[static_cast<std::size_t>(k)]) = 1;

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const auto xi = x.row(i).transpose();
    const bool is_ec = r(i) == 0;
    const double noise = normal(rng) * (is_ec ? config.sigma_ec : config.sigma_rct);
    double mean = control_mean(config, beta, xi, is_ec);
    if (a(i) == 1) mean += conditional_effect(config, beta, xi);
    y(i) = mean + noise;
  }
  return Dataset(std::move(x), std::move(a), std::move(y), std::move(r));
}

double true_ate(const DgpConfig& config, Index n_draws) {
  config.validate();
  using Key = std::tuple<int, Index, Index, Index, std::uint64_t, double, Index>;
  static std::map<Key, double> cache;
  static std::mutex mutex;
  const Key key{static_cast<int>(config.mechanism), config.d, config.n_rct, config.n_ec,
                config.beta_seed, config.selection_slope, n_draws};
  {
    const std::lock_guard lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const Eigen::VectorXd beta = draw_beta(config);
  double sum = 0.0;
  Index count = 0;
  for (std::uint64_t t = 0; count < n_draws; ++t) {
    std::mt19937_64 rng(derive_seed(config.beta_seed ^ kTruthStream, t));
    const Eigen::MatrixXd x = sample_truncated_normal(config.n_rct + config.n_ec, config.d, rng);
    const Eigen::VectorXi r = select_trial_rows(x, config, rng);
    for (Index i = 0; i < x.rows(); ++i) {
      if (r(i) == 1) {
        sum += conditional_effect(config, beta, x.row(i).transpose());
        ++count;
      }
    }
  }
  const double tau = sum / static_cast<double>(count);
  const std::lock_guard lock(mutex);
  cache[key] = tau;
  return tau;
}

MethodOptions default_method_options(const DgpConfig& config) {
  MethodOptions opts;
  opts.model.link = config.mechanism == Mechanism::kNonlinear ? OutcomeLink::kExp : OutcomeLink::kIdentity;
  return opts;
}

Index modal_value(const std::vector<Index>& values) {
  if (values.empty()) return 0;
  std::map<Index, Index> counts;
  for (const Index v : values) ++counts[v];
  Index best = counts.begin()->first, best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

std::vector<ReplicationReport> replicate(const DgpConfig& config, const std::vector<Method>& methods,
                                         Index n_reps, const ReplicationOptions& opts) {
  config.validate();
  if (n_reps < 1) throw DataError("replicate: n_reps must be >= 1");
  const double tau = opts.tau_true.value_or(true_ate(config, opts.truth_draws));

  struct Cell {
    bool ok = false;
    double tau_hat = 0.0, se = 0.0;
    Index k = 0;
  };
  const std::size_t m = methods.size();
  std::vector<Cell> cells(static_cast<std::size_t>(n_reps) * m);
  MethodOptions inner = opts.methods;
  inner.jobs = 1;

  parallel_for(static_cast<std::size_t>(n_reps), opts.jobs, [&](std::size_t rep) {
    DgpConfig c = config;
    c.seed = derive_seed(config.seed, rep);
    const Dataset ds = generate(c);
    for (std::size_t j = 0; j < m; ++j) {
      Cell& cell = cells[rep * m + j];
      try {
        const MethodOutcome out = run_method(methods[j], ds, inner);
        cell = {true, out.report.tau_hat, out.report.se_hat, out.report.k_borrowed};
      } catch (const std::exception&) {
        cell.ok = false;
      }
    }
  });

  std::vector<ReplicationReport> reports;
  for (std::size_t j = 0; j < m; ++j) {
    ReplicationReport rep;
    rep.method = to_string(methods[j]);
    rep.tau_true = tau;
    rep.tau_true_source = opts.tau_true ? "supplied" : "monte-carlo";
    for (Index r = 0; r < n_reps; ++r) {
      const Cell& cell = cells[static_cast<std::size_t>(r) * m + j];
      if (!cell.ok) {
        ++rep.n_failed;
        continue;
      }
      rep.estimates.push_back(cell.tau_hat);
      rep.se_hats.push_back(cell.se);
      rep.n_ecs.push_back(cell.k);
    }
    if (static_cast<double>(rep.n_failed) > 0.05 * static_cast<double>(n_reps)) {
      throw NumericalError("replicate: method " + rep.method + " failed on " + std::to_string(rep.n_failed) +
                           " of " + std::to_string(n_reps) + " replications");
    }
    rep.n_reps = static_cast<Index>(rep.estimates.size());
    if (rep.n_reps == 0) throw NumericalError("replicate: no successful replications");
    const double cnt = static_cast<double>(rep.n_reps);
    const Eigen::Map<const Eigen::VectorXd> est(rep.estimates.data(), rep.n_reps);
    const Eigen::Map<const Eigen::VectorXd> se(rep.se_hats.data(), rep.n_reps);
    rep.est_mean = est.mean();
    rep.bias_abs = std::abs(rep.est_mean - tau);
    rep.sd_empirical = rep.n_reps > 1 ? std::sqrt((est.array() - rep.est_mean).square().sum() / (cnt - 1.0)) : 0.0;
    rep.sd_estimated_mean = se.mean();
    rep.mse_empirical = (est.array() - tau).square().mean();
    rep.mse_estimated_mean = rep.bias_abs * rep.bias_abs + se.array().square().mean();
    rep.n_ecs_modal = modal_value(rep.n_ecs);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string replication_csv(const std::vector<ReplicationReport>& reports, std::optional<double> delta,
                            bool header) {
  std::string out;
  if (header) {
    if (delta) out += "delta,";
    out += "method,est,bias_abs,sd,sd_hat,mse,mse_hat,n_ecs,n_reps,n_failed,tau_true,tau_source\n";
  }
  for (const auto& r : reports) {
    if (delta) out += format_double(*delta) + ",";
    out += r.method + "," + format_double(r.est_mean) + "," + format_double(r.bias_abs) + "," +
           format_double(r.sd_empirical) + "," + format_double(r.sd_estimated_mean) + "," +
           format_double(r.mse_empirical) + "," + format_double(r.mse_estimated_mean) + "," +
           std::to_string(r.n_ecs_modal) + "," + std::to_string(r.n_reps) + "," + std::to_string(r.n_failed) +
           "," + format_double(r.tau_true) + "," + r.tau_true_source + "\n";
  }
  return out;
}

Dataset generate_illustration(Illustration which, std::uint64_t seed, Index n_control, Index n_ec,
                              Index n_treated) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n_out = which == Illustration::kOutliers ? 5 : 0;
  const Index n = n_control + n_treated + n_ec + n_out;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(n), r = Eigen::VectorXi::Zero(n);
  Eigen::VectorXd y(n);
  Index i = 0;
  for (Index k = 0; k < n_control; ++k, ++i) {
    x(i, 0) = unif(rng);
    y(i) = 2.0 * x(i, 0) + 0.2 * normal(rng);
    r(i) = 1;
  }
  for (Index k = 0; k < n_treated; ++k, ++i) {
    x(i, 0) = unif(rng);
    y(i) = 2.0 * x(i, 0) + 1.0 + 0.2 * normal(rng);
    r(i) = 1;
    a(i) = 1;
  }
  for (Index k = 0; k < n_ec; ++k, ++i) {
    const double v = unif(rng);
    x(i, 0) = v;
    switch (which) {
      case Illustration::kOutliers: y(i) = -0.9 + 2.5 * v + 0.5 * normal(rng); break;
      case Illustration::kShiftedLine: y(i) = -2.0 + 3.0 * v + 0.4 * normal(rng); break;
      case Illustration::kQuadratic: y(i) = v * v - 2.0 * v + 2.0 + 0.4 * normal(rng); break;
    }
  }
  for (Index k = 0; k < n_out; ++k, ++i) {
    x(i, 0) = 1.6 + 0.1 * static_cast<double>(k);
    y(i) = 0.5;
  }
  return Dataset(std::move(x), std::move(a), std::move(y), std::move(r));
}

}  // namespace ecb
