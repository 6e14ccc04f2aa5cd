#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ecb {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Unified sample table for trial rows (source = 1) and external controls
/// (source = 0). Immutable once constructed; the constructor validates.
///
/// Invariants: all columns share n >= 1 rows, every value is finite, and
/// every external row is untreated.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd covariates, Eigen::VectorXi treatment, Eigen::VectorXd outcome,
          Eigen::VectorXi source, std::vector<std::string> covariate_names = {});

  Index rows() const { return outcome_.size(); }
  Index dim() const { return covariates_.cols(); }

  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const Eigen::VectorXi& treatment() const { return treatment_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const Eigen::VectorXi& source() const { return source_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  bool is_rct(Index i) const { return source_(i) == 1; }
  bool is_treated(Index i) const { return treatment_(i) == 1; }

  /// Rows in the given order. Throws DataError when `rows` is empty.
  Dataset select(std::span<const Index> rows) const;

  /// Copy with outcome(rows[i]) replaced by values(i).
  Dataset with_outcomes(std::span<const Index> rows, const Eigen::VectorXd& values) const;

  Dataset with_covariates(Eigen::MatrixXd covariates) const;

  /// FNV-1a over covariates and outcomes; identifies the rows a model was fit on.
  std::uint64_t fingerprint() const;

 private:
  Eigen::MatrixXd covariates_;
  Eigen::VectorXi treatment_;
  Eigen::VectorXd outcome_;
  Eigen::VectorXi source_;
  std::vector<std::string> names_;
};

struct DataSplit {
  IndexList rct;          // R = 1
  IndexList rct_treated;  // R = 1, A = 1
  IndexList rct_control;  // R = 1, A = 0
  IndexList ec;           // R = 0

  Index n_rct() const { return static_cast<Index>(rct.size()); }
  Index n_treated() const { return static_cast<Index>(rct_treated.size()); }
  Index n_control() const { return static_cast<Index>(rct_control.size()); }
  Index n_ec() const { return static_cast<Index>(ec.size()); }
};

/// Partition rows by (R, A). Requires at least d + 2 RCT controls.
DataSplit split(const Dataset& ds);

/// Column roles in a CSV file. Empty `covariates` means "every other column".
struct Schema {
  std::string treatment = "A";
  std::string outcome = "Y";
  std::string source = "R";
  std::vector<std::string> covariates;

  /// Parses "treatment=treat;outcome=re78;source=rct;covariates=age,educ".
  static Schema parse(const std::string& text);
};

Dataset load_csv(const std::filesystem::path& path, const Schema& schema = {});
Dataset parse_csv(const std::string& text, const Schema& schema = {});

/// Writes covariates (by name, or x1..xd), then treatment, outcome, source.
/// Doubles use shortest round-trip formatting so load(write(ds)) is exact.
void write_csv(const std::filesystem::path& path, const Dataset& ds, const Schema& schema = {});
std::string to_csv(const Dataset& ds, const Schema& schema = {});

struct ColumnScaling {
  std::string name;
  Index column = 0;
  double mean = 0.0;
  double scale = 1.0;
};

struct Standardized {
  Dataset data;
  std::vector<ColumnScaling> scaling;
};

/// Centers and scales the chosen covariate columns to sample mean 0 and
/// sample standard deviation 1. Constant columns are rejected.
Standardized standardize(const Dataset& ds, std::span<const Index> columns);
Dataset unstandardize(const Dataset& ds, std::span<const ColumnScaling> scaling);

/// Columns that are not 0/1-valued; binary indicators stay on their scale.
IndexList continuous_columns(const Dataset& ds);

std::string format_double(double v);

/// FNV-1a over a design matrix and response; Dataset::fingerprint uses the same hash.
std::uint64_t fingerprint(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace ecb
