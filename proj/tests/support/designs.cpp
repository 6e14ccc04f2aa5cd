#include "designs.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace design {

using ecb::Index;

ecb::Dataset random_small(std::uint64_t seed, Index n_rct, Index n_ec, Index d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const Index n = n_rct + n_ec;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(n), r = Eigen::VectorXi::Zero(n);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = z(rng);
    r(i) = i < n_rct ? 1 : 0;
    a(i) = i < n_rct / 2 ? 1 : 0;
    y(i) = 1.0 + x.row(i).sum() + 0.7 * a(i) + (r(i) == 0 ? 0.5 : 0.0) + z(rng);
  }
  return ecb::Dataset(std::move(x), std::move(a), std::move(y), std::move(r));
}

ecb::Dataset two_cluster(std::uint64_t seed, Index n_control, Index n_treated, Index n_ec, Index k_star, double shift,
                         Index d, double effect) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const Index n_rct = n_control + n_treated, n = n_rct + n_ec;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(n), r = Eigen::VectorXi::Zero(n);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = z(rng);
    r(i) = i < n_rct ? 1 : 0;
    a(i) = i < n_treated ? 1 : 0;
    double mean = 1.0 + x.row(i).sum();
    if (a(i) == 1) mean += effect;
    if (r(i) == 0 && i - n_rct >= k_star) mean += shift;
    y(i) = mean + z(rng);
  }
  return ecb::Dataset(std::move(x), std::move(a), std::move(y), std::move(r));
}

KnownBias known_bias(std::uint64_t seed, Index n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pi0 = [](const Eigen::Ref<const Eigen::VectorXd>& x) { return 1.0 / (1.0 + std::exp(-(0.3 * x(0) - 0.2 * x(1)))); };
  Eigen::VectorXd theta_b(3);
  theta_b << 0.5, 1.0, -0.5;
  auto b = [theta_b](const Eigen::Ref<const Eigen::VectorXd>& x) { return theta_b(0) + theta_b.tail(2).dot(x); };
  auto mu = [](const Eigen::Ref<const Eigen::VectorXd>& x) { return 2.0 + x(0) - x(1); };
  auto m = [=](const Eigen::Ref<const Eigen::VectorXd>& x) { return mu(x) + (1.0 - pi0(x)) * b(x); };

  const Index n_treated = 50;
  Eigen::MatrixXd x(n + n_treated, 2);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(n + n_treated), r(n + n_treated);
  Eigen::VectorXd y(n + n_treated);
  for (Index i = 0; i < n + n_treated; ++i) {
    x(i, 0) = z(rng);
    x(i, 1) = z(rng);
    const Eigen::VectorXd xi = x.row(i).transpose();
    if (i >= n) {
      r(i) = 1;
      a(i) = 1;
      y(i) = mu(xi) + 1.0 + z(rng);
      continue;
    }
    r(i) = u(rng) < pi0(xi) ? 1 : 0;
    y(i) = mu(xi) + (r(i) == 0 ? b(xi) : 0.0) + z(rng);
  }
  return {ecb::Dataset(std::move(x), std::move(a), std::move(y), std::move(r)), m, pi0, theta_b};
}

namespace {

struct Group {
  Index n;
  double age_mean, age_sd, educ_mean, educ_sd;
  double black, hispan, married, nodegree;
  double re74_zero, re74_mean, re75_zero, re75_mean;
};

}  // namespace

std::string nsw_like_csv(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto bern = [&](double p) { return u(rng) < p ? 1 : 0; };
  auto earnings = [&](double p_zero, double mean_positive) {
    if (u(rng) < p_zero) return 0.0;
    return std::exponential_distribution<double>(1.0 / mean_positive)(rng);
  };

  const Group groups[] = {
      {185, 25.8, 7.2, 10.35, 2.0, 0.84, 0.06, 0.19, 0.71, 0.71, 7.2, 0.60, 3.8},   // trial, treated
      {260, 25.1, 7.1, 10.09, 1.6, 0.83, 0.11, 0.15, 0.83, 0.75, 8.4, 0.65, 3.6},   // trial, control
      {123, 38.3, 12.9, 10.3, 3.2, 0.45, 0.12, 0.70, 0.51, 0.35, 8.6, 0.50, 5.2}};  // external
  std::ostringstream out;
  out.precision(17);
  out << "age,educ,black,hispan,married,nodegree,re74,re75,treat,re78,nsw\n";
  for (int g = 0; g < 3; ++g) {
    const Group& gr = groups[g];
    const int treat = g == 0 ? 1 : 0, nsw = g < 2 ? 1 : 0;
    for (Index i = 0; i < gr.n; ++i) {
      const double age = std::max(17.0, std::round(gr.age_mean + gr.age_sd * z(rng)));
      const double educ = std::clamp(std::round(gr.educ_mean + gr.educ_sd * z(rng)), 3.0, 17.0);
      const int black = bern(gr.black), hispan = black ? 0 : bern(gr.hispan / (1.0 - gr.black));
      const int married = bern(gr.married), nodegree = bern(gr.nodegree);
      const double re74 = earnings(gr.re74_zero, gr.re74_mean), re75 = earnings(gr.re75_zero, gr.re75_mean);
      double mean = 3.2 + 0.25 * re74 + 0.35 * re75 + 0.3 * (educ - 10.0) - 0.6 * black + 0.4 * married -
                    0.02 * (age - 25.0);
      if (treat) mean += 1.8;
      // A minority of the comparison sample follows a different earnings path.
      if (!nsw && i % 3 == 0) mean -= 0.08 * (age - 25.0) + 2.0;
      const double re78 = std::max(0.0, mean + 5.0 * z(rng));
      out << age << ',' << educ << ',' << black << ',' << hispan << ',' << married << ',' << nodegree << ','
          << re74 << ',' << re75 << ',' << treat << ',' << re78 << ',' << nsw << '\n';
    }
  }
  return out.str();
}

}  // namespace design
