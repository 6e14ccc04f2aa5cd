#include "ecb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ecb/error.hpp"

namespace ecb {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& cell, std::size_t line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': non-numeric cell '" + cell + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': non-finite value");
  }
  return value;
}

int parse_flag(const std::string& cell, std::size_t line_no, const std::string& column) {
  const double v = parse_number(cell, line_no, column);
  if (v != 0.0 && v != 1.0) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': expected 0 or 1, got '" + cell + "'");
  }
  return static_cast<int>(v);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

Dataset::Dataset(Eigen::MatrixXd covariates, Eigen::VectorXi treatment, Eigen::VectorXd outcome,
                 Eigen::VectorXi source, std::vector<std::string> covariate_names)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      source_(std::move(source)),
      names_(std::move(covariate_names)) {
  const Index n = outcome_.size();
  if (n < 1) throw DataError("dataset has no rows");
  if (covariates_.rows() != n || treatment_.size() != n || source_.size() != n) {
    throw DataError("dataset columns have inconsistent row counts");
  }
  if (names_.empty()) {
    for (Index j = 0; j < covariates_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  }
  if (static_cast<Index>(names_.size()) != covariates_.cols()) {
    throw DataError("covariate name count does not match column count");
  }
  if (!covariates_.allFinite() || !outcome_.allFinite()) {
    throw DataError("dataset contains non-finite values");
  }
  for (Index i = 0; i < n; ++i) {
    if ((treatment_(i) != 0 && treatment_(i) != 1) || (source_(i) != 0 && source_(i) != 1)) {
      throw DataError("row " + std::to_string(i) + ": treatment and source must be 0/1");
    }
    if (source_(i) == 0 && treatment_(i) == 1) {
      throw DataError("row " + std::to_string(i) + ": EC row is treated");
    }
  }
}

Dataset Dataset::select(std::span<const Index> rows) const {
  if (rows.empty()) throw DataError("cannot select an empty row set");
  const auto m = static_cast<Index>(rows.size());
  Eigen::MatrixXd x(m, dim());
  Eigen::VectorXi a(m), r(m);
  Eigen::VectorXd y(m);
  for (Index k = 0; k < m; ++k) {
    const Index i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= this->rows()) throw DataError("row index out of range");
    x.row(k) = covariates_.row(i);
    a(k) = treatment_(i);
    y(k) = outcome_(i);
    r(k) = source_(i);
  }
  return Dataset(std::move(x), std::move(a), std::move(y), std::move(r), names_);
}

Dataset Dataset::with_outcomes(std::span<const Index> rows, const Eigen::VectorXd& values) const {
  if (static_cast<Index>(rows.size()) != values.size()) {
    throw DataError("with_outcomes: row and value counts differ");
  }
  Eigen::VectorXd y = outcome_;
  for (std::size_t k = 0; k < rows.size(); ++k) y(rows[k]) = values(static_cast<Index>(k));
  return Dataset(covariates_, treatment_, std::move(y), source_, names_);
}

Dataset Dataset::with_covariates(Eigen::MatrixXd covariates) const {
  return Dataset(std::move(covariates), treatment_, outcome_, source_, names_);
}

std::uint64_t Dataset::fingerprint() const { return ecb::fingerprint(covariates_, outcome_); }

std::uint64_t fingerprint(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::uint64_t h = kFnvOffset;
  const Index n = x.rows(), d = x.cols();
  fnv_bytes(h, &n, sizeof n);
  fnv_bytes(h, &d, sizeof d);
  fnv_bytes(h, x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
  fnv_bytes(h, y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  return h;
}

DataSplit split(const Dataset& ds) {
  DataSplit s;
  for (Index i = 0; i < ds.rows(); ++i) {
    if (ds.is_rct(i)) {
      s.rct.push_back(i);
      (ds.is_treated(i) ? s.rct_treated : s.rct_control).push_back(i);
    } else {
      s.ec.push_back(i);
    }
  }
  if (s.n_control() < ds.dim() + 2) {
    throw DataError("need at least d + 2 = " + std::to_string(ds.dim() + 2) +
                    " RCT controls, found " + std::to_string(s.n_control()));
  }
  return s;
}

Schema Schema::parse(const std::string& text) {
  Schema s;
  for (const auto& item : split_fields(text, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DataError("schema entry '" + item + "' lacks '='");
    const std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    if (key == "treatment") {
      s.treatment = value;
    } else if (key == "outcome") {
      s.outcome = value;
    } else if (key == "source") {
      s.source = value;
    } else if (key == "covariates") {
      s.covariates = split_fields(value, ',');
    } else {
      throw DataError("unknown schema key '" + key + "'");
    }
  }
  return s;
}

Dataset parse_csv(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_fields(line, ',');
      break;
    }
  }
  if (header.empty()) throw DataError("empty file");

  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < header.size(); ++j) pos[header[j]] = j;
  auto column = [&](const std::string& name) {
    const auto it = pos.find(name);
    if (it == pos.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  const std::size_t a_col = column(schema.treatment);
  const std::size_t y_col = column(schema.outcome);
  const std::size_t r_col = column(schema.source);
  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (const auto& h : header) {
      if (h != schema.treatment && h != schema.outcome && h != schema.source) cov_names.push_back(h);
    }
  }
  std::vector<std::size_t> x_cols;
  for (const auto& c : cov_names) x_cols.push_back(column(c));

  std::vector<double> xs, ys;
  std::vector<int> as, rs;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line, ',');
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      xs.push_back(parse_number(cells[x_cols[k]], line_no, cov_names[k]));
    }
    const int a = parse_flag(cells[a_col], line_no, schema.treatment);
    const int r = parse_flag(cells[r_col], line_no, schema.source);
    if (r == 0 && a == 1) {
      throw DataError("line " + std::to_string(line_no) + ": EC row is treated");
    }
    as.push_back(a);
    rs.push_back(r);
    ys.push_back(parse_number(cells[y_col], line_no, schema.outcome));
  }
  if (ys.empty()) throw DataError("empty file: no data rows");

  const auto n = static_cast<Index>(ys.size());
  const auto d = static_cast<Index>(x_cols.size());
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = xs[static_cast<std::size_t>(i * d + j)];
  }
  return Dataset(std::move(x), Eigen::Map<Eigen::VectorXi>(as.data(), n),
                 Eigen::Map<Eigen::VectorXd>(ys.data(), n), Eigen::Map<Eigen::VectorXi>(rs.data(), n),
                 std::move(cov_names));
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string to_csv(const Dataset& ds, const Schema& schema) {
  std::string out;
  for (const auto& name : ds.covariate_names()) out += name + ",";
  out += schema.treatment + "," + schema.outcome + "," + schema.source + "\n";
  for (Index i = 0; i < ds.rows(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j) out += format_double(ds.covariates()(i, j)) + ",";
    out += std::to_string(ds.treatment()(i)) + "," + format_double(ds.outcome()(i)) + "," +
           std::to_string(ds.source()(i)) + "\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds, const Schema& schema) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_csv(ds, schema);
}

Standardized standardize(const Dataset& ds, std::span<const Index> columns) {
  if (ds.rows() < 2) throw DataError("standardize needs at least two rows");
  Eigen::MatrixXd x = ds.covariates();
  std::vector<ColumnScaling> record;
  const double n = static_cast<double>(ds.rows());
  for (const Index j : columns) {
    if (j < 0 || j >= ds.dim()) throw DataError("standardize: column index out of range");
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / (n - 1.0);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      throw DataError("standardize: column '" + ds.covariate_names()[static_cast<std::size_t>(j)] +
                      "' is constant");
    }
    x.col(j) = (x.col(j).array() - mean) / sd;
    record.push_back({ds.covariate_names()[static_cast<std::size_t>(j)], j, mean, sd});
  }
  return {ds.with_covariates(std::move(x)), std::move(record)};
}

Dataset unstandardize(const Dataset& ds, std::span<const ColumnScaling> scaling) {
  Eigen::MatrixXd x = ds.covariates();
  for (const auto& s : scaling) x.col(s.column) = x.col(s.column).array() * s.scale + s.mean;
  return ds.with_covariates(std::move(x));
}

IndexList continuous_columns(const Dataset& ds) {
  IndexList out;
  for (Index j = 0; j < ds.dim(); ++j) {
    const auto col = ds.covariates().col(j).array();
    if (!((col == 0.0) || (col == 1.0)).all()) out.push_back(j);
  }
  return out;
}

}  // namespace ecb
