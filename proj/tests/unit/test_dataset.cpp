#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "designs.hpp"
#include "ecb/dataset.hpp"
#include "ecb/error.hpp"
#include "ecb/simulation.hpp"

using namespace ecb;

namespace {

Dataset tiny(std::initializer_list<std::pair<int, int>> ra, Index d = 1) {
  const Index n = static_cast<Index>(ra.size());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi a(n), r(n);
  Eigen::VectorXd y(n);
  Index i = 0;
  for (const auto& [rr, aa] : ra) {
    for (Index j = 0; j < d; ++j) x(i, j) = 0.5 * static_cast<double>(i) + static_cast<double>(j * j);
    r(i) = rr;
    a(i) = aa;
    y(i) = static_cast<double>(i);
    ++i;
  }
  return Dataset(x, a, y, r);
}

}  // namespace

TEST_CASE("well-formed four-row csv loads") {
  const Dataset ds = parse_csv("x1,x2,A,Y,R\n0.1,1,1,2.5,1\n0.2,2,0,1.5,1\n0.3,3,0,1.0,0\n0.4,4,0,0.5,0\n");
  CHECK(ds.rows() == 4);
  CHECK(ds.dim() == 2);
  CHECK(ds.covariate_names() == std::vector<std::string>{"x1", "x2"});
  CHECK(ds.outcome()(1) == 1.5);
  CHECK(ds.source()(3) == 0);
}

TEST_CASE("csv validation errors") {
  CHECK_THROWS_WITH_AS(parse_csv("x,A,Y,R\n1,1,2,0\n"), doctest::Contains("EC row is treated"), DataError);
  CHECK_THROWS_WITH_AS(parse_csv("x,A,Y\n1,1,2\n"), doctest::Contains("missing column 'R'"), DataError);
  CHECK_THROWS_WITH_AS(parse_csv("x,A,Y,R\n1,1,abc,1\n"), doctest::Contains("'Y'"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK_THROWS_AS(parse_csv("x,A,Y,R\n"), DataError);
  CHECK_THROWS_AS(parse_csv("x,A,Y,R\n1,1,nan,1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("x,A,Y,R\n1,2,1,1\n"), DataError);
  CHECK_THROWS_AS(parse_csv("x,A,Y,R\n1,1,1\n"), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("schema maps column roles and selects covariates") {
  const Schema s = Schema::parse("treatment=treat;outcome=re78;source=nsw;covariates=age,educ");
  CHECK(s.treatment == "treat");
  CHECK(s.outcome == "re78");
  CHECK(s.source == "nsw");
  CHECK(s.covariates == std::vector<std::string>{"age", "educ"});
  const Dataset ds = parse_csv("educ,junk,age,treat,re78,nsw\n10,9,25,1,3.5,1\n12,9,30,0,2.5,1\n", s);
  CHECK(ds.dim() == 2);
  CHECK(ds.covariates()(0, 0) == 25);  // schema order, not file order
  CHECK(ds.covariates()(0, 1) == 10);
  CHECK_THROWS_AS(Schema::parse("treatment"), DataError);
  CHECK_THROWS_AS(Schema::parse("colour=red"), DataError);
}

TEST_CASE("csv round trip is bit exact") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1e3);
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(50), r = Eigen::VectorXi::Zero(50);
  for (Index i = 0; i < 50; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = z(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3);
    y(i) = z(rng) / 7.0;
    r(i) = i < 30;
    a(i) = i < 15;
  }
  x(0, 0) = 5e-324;
  x(1, 0) = -1.7976931348623157e308;
  const Dataset ds(x, a, y, r);
  const Dataset back = parse_csv(to_csv(ds));
  CHECK(back.covariates() == ds.covariates());
  CHECK(back.outcome() == ds.outcome());
  CHECK(back.treatment() == ds.treatment());
  CHECK(back.source() == ds.source());
  CHECK(back.fingerprint() == ds.fingerprint());
}

TEST_CASE("dataset constructor enforces invariants") {
  Eigen::MatrixXd x(2, 1);
  x << 1, 2;
  CHECK_THROWS_AS(Dataset(x, Eigen::Vector2i(0, 1), Eigen::Vector2d(1, 2), Eigen::Vector2i(1, 0)), DataError);
  CHECK_THROWS_AS(Dataset(x, Eigen::Vector2i(1, 0), Eigen::Vector3d(1, 2, 3), Eigen::Vector2i(1, 1)), DataError);
  CHECK_THROWS_AS(Dataset(x, Eigen::Vector2i(1, 0), Eigen::Vector2d(1, NAN), Eigen::Vector2i(1, 1)), DataError);
  CHECK_NOTHROW(Dataset(x, Eigen::Vector2i(1, 0), Eigen::Vector2d(1, 2), Eigen::Vector2i(1, 1)));
}

TEST_CASE("split partitions rows by source and arm") {
  const Dataset ds = tiny({{1, 1}, {1, 0}, {0, 0}, {1, 0}, {1, 0}, {0, 0}});
  const DataSplit sp = split(ds);
  CHECK(sp.rct == IndexList{0, 1, 3, 4});
  CHECK(sp.rct_treated == IndexList{0});
  CHECK(sp.rct_control == IndexList{1, 3, 4});
  CHECK(sp.ec == IndexList{2, 5});

  const Dataset all_rct = tiny({{1, 1}, {1, 0}, {1, 0}, {1, 0}});
  CHECK(split(all_rct).n_ec() == 0);

  // the three-row (1,1),(1,0),(0,0) table has a single control: too few for d = 1
  CHECK_THROWS_AS(split(tiny({{1, 1}, {1, 0}, {0, 0}})), DataError);
}

TEST_CASE("split of the default simulation design") {
  const DataSplit sp = split(generate(DgpConfig{}));
  CHECK(sp.n_rct() == 300);
  CHECK(sp.n_control() == 100);
  CHECK(sp.n_ec() == 1000);
}

TEST_CASE("split is a partition on random data") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset ds = design::random_small(s, 20 + static_cast<Index>(s), 10 + static_cast<Index>(s % 5));
    const DataSplit sp = split(ds);
    std::multiset<Index> all(sp.rct_treated.begin(), sp.rct_treated.end());
    all.insert(sp.rct_control.begin(), sp.rct_control.end());
    all.insert(sp.ec.begin(), sp.ec.end());
    CHECK(all.size() == static_cast<std::size_t>(ds.rows()));
    CHECK(std::set<Index>(all.begin(), all.end()).size() == all.size());
    CHECK(sp.n_treated() + sp.n_control() == sp.n_rct());
  }
}

TEST_CASE("standardize") {
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 2, 1, 3, 1;
  const Dataset ds(x, Eigen::Vector3i(1, 0, 0), Eigen::Vector3d(1, 2, 3), Eigen::Vector3i(1, 1, 1));

  SUBCASE("three-point column") {
    const IndexList cols{0};
    const Standardized st = standardize(ds, cols);
    CHECK(st.scaling.size() == 1);
    CHECK(st.scaling[0].mean == doctest::Approx(2.0));
    CHECK(st.scaling[0].scale == doctest::Approx(1.0));
    CHECK(st.data.covariates()(0, 0) == doctest::Approx(-1.0));
    CHECK(st.data.covariates()(1, 0) == doctest::Approx(0.0));
    CHECK(st.data.covariates()(2, 0) == doctest::Approx(1.0));
    CHECK(st.data.covariates().col(1) == ds.covariates().col(1));
  }
  SUBCASE("idempotent and invertible") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(5.0, 3.0);
    Eigen::MatrixXd big(40, 2);
    for (Index i = 0; i < 40; ++i) big.row(i) << z(rng), 100.0 * z(rng);
    Eigen::VectorXi a = Eigen::VectorXi::Zero(40), r = Eigen::VectorXi::Ones(40);
    const Dataset raw(big, a, Eigen::VectorXd::Zero(40), r);
    const IndexList cols{0, 1};
    const Standardized once = standardize(raw, cols);
    const Eigen::MatrixXd& c = once.data.covariates();
    for (Index j = 0; j < 2; ++j) {
      CHECK(std::abs(c.col(j).mean()) < 1e-10);
      CHECK(std::abs(std::sqrt((c.col(j).array() - c.col(j).mean()).square().sum() / 39.0) - 1.0) < 1e-10);
    }
    const Standardized twice = standardize(once.data, cols);
    CHECK((twice.data.covariates() - c).cwiseAbs().maxCoeff() < 1e-10);
    const Dataset back = unstandardize(once.data, once.scaling);
    CHECK(((back.covariates() - big).array() / big.array().abs().max(1.0)).abs().maxCoeff() < 1e-9);
  }
  SUBCASE("constant column rejected") {
    const IndexList cols{1};
    Eigen::MatrixXd k(3, 1);
    k << 4, 4, 4;
    const Dataset flat(k, Eigen::Vector3i(1, 0, 0), Eigen::Vector3d(1, 2, 3), Eigen::Vector3i(1, 1, 1));
    const IndexList c0{0};
    CHECK_THROWS_AS(standardize(flat, c0), DataError);
  }
  SUBCASE("binary columns are left alone") {
    CHECK(continuous_columns(ds) == IndexList{0});
  }
}

TEST_CASE("standardizing the NSW-style earnings records the raw mean") {
  const Dataset ds = parse_csv(design::nsw_like_csv(11), Schema::parse(design::kNswSchema));
  const IndexList cols = continuous_columns(ds);
  CHECK(cols == IndexList{0, 1, 6, 7});  // age, educ, re74, re75
  const Standardized st = standardize(ds, cols);
  CHECK(st.scaling[2].name == "re74");
  CHECK(st.scaling[2].mean == doctest::Approx(ds.covariates().col(6).mean()).epsilon(1e-12));
  const DataSplit sp = split(ds);
  CHECK(sp.n_treated() == 185);
  CHECK(sp.n_control() == 260);
  CHECK(sp.n_ec() == 123);
}

TEST_CASE("select and with_outcomes") {
  const Dataset ds = tiny({{1, 1}, {1, 0}, {0, 0}, {1, 0}});
  const IndexList rows{3, 0};
  const Dataset sub = ds.select(rows);
  CHECK(sub.rows() == 2);
  CHECK(sub.outcome()(0) == 3.0);
  CHECK_THROWS_AS(ds.select(IndexList{}), DataError);
  const IndexList one{2};
  const Dataset changed = ds.with_outcomes(one, Eigen::VectorXd::Constant(1, -7.0));
  CHECK(changed.outcome()(2) == -7.0);
  CHECK(changed.covariates() == ds.covariates());
  CHECK(changed.fingerprint() != ds.fingerprint());
}
