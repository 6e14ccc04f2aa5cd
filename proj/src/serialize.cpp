#include "ecb/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "ecb/error.hpp"

namespace ecb {

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

const char* link_name(OutcomeLink l) { return l == OutcomeLink::kIdentity ? "identity" : "exp"; }

}  // namespace

Json to_json(const EstimateReport& r, bool with_phi) {
  Json j{{"method", r.method},   {"tau_hat", r.tau_hat}, {"se_hat", r.se_hat},
         {"bias_hat", r.bias_hat}, {"mse_hat", r.mse_hat}, {"n_used", r.n_used},
         {"k_borrowed", r.k_borrowed}, {"n_clipped", r.n_clipped}};
  if (with_phi) j["phi_values"] = to_vec(r.phi_values);
  return j;
}

Json to_json(const LinearFit& fit) {
  std::vector<std::vector<double>> h(static_cast<std::size_t>(fit.hessian.rows()));
  for (Index i = 0; i < fit.hessian.rows(); ++i) h[static_cast<std::size_t>(i)] = to_vec(fit.hessian.row(i).transpose());
  return Json{{"link", link_name(fit.link)}, {"theta", to_vec(fit.theta)}, {"ridge", fit.ridge},
              {"n_fit", fit.n_fit},           {"hessian", h},                {"data_hash", hex64(fit.data_hash)},
              {"converged", fit.converged},   {"iterations", fit.iterations}};
}

LinearFit linear_fit_from_json(const Json& j) {
  try {
    LinearFit fit;
    fit.theta = from_vec(j.at("theta").get<std::vector<double>>());
    fit.link = j.at("link").get<std::string>() == "exp" ? OutcomeLink::kExp : OutcomeLink::kIdentity;
    fit.ridge = j.at("ridge").get<double>();
    fit.n_fit = j.at("n_fit").get<Index>();
    const auto h = j.at("hessian").get<std::vector<std::vector<double>>>();
    fit.hessian.resize(static_cast<Index>(h.size()), static_cast<Index>(h.size()));
    for (std::size_t r = 0; r < h.size(); ++r) {
      if (h[r].size() != h.size()) throw DataError("hessian is not square");
      for (std::size_t c = 0; c < h.size(); ++c) fit.hessian(static_cast<Index>(r), static_cast<Index>(c)) = h[r][c];
    }
    fit.data_hash = std::stoull(j.at("data_hash").get<std::string>(), nullptr, 16);
    fit.converged = j.value("converged", true);
    fit.iterations = j.value("iterations", 0);
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model json: ") + e.what());
  }
}

EstimateReport report_from_json(const Json& j) {
  try {
    EstimateReport r;
    r.method = j.at("method").get<std::string>();
    r.tau_hat = j.at("tau_hat").get<double>();
    r.se_hat = j.at("se_hat").get<double>();
    r.bias_hat = j.at("bias_hat").get<double>();
    r.mse_hat = j.at("mse_hat").get<double>();
    r.n_used = j.at("n_used").get<Index>();
    r.k_borrowed = j.at("k_borrowed").get<Index>();
    r.n_clipped = j.value("n_clipped", Index{0});
    if (j.contains("phi_values")) r.phi_values = from_vec(j["phi_values"].get<std::vector<double>>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report json: ") + e.what());
  }
}

Json to_json(const LogisticFit& fit) {
  return Json{{"beta", to_vec(fit.beta)}, {"converged", fit.converged}, {"iterations", fit.iterations},
              {"clip", fit.clip}};
}

Json to_json(const ColumnScaling& s) {
  return Json{{"name", s.name}, {"column", s.column}, {"mean", s.mean}, {"scale", s.scale}};
}

Json to_json(const BorrowResult& r) {
  return Json{{"k_hat", r.k_hat},
              {"grid_step", r.grid.step()},
              {"grid", r.grid.points()},
              {"calibrated", r.calibrated},
              {"borrowed_indices", r.borrowed_indices},
              {"final", to_json(r.final)},
              {"aipw", to_json(r.aipw)}};
}

Json to_json(const BiasFit& fit) {
  Json j{{"theta_b", to_vec(fit.theta_b)}, {"lambda", fit.lambda}};
  if (fit.m_all) j["m_all"] = to_json(*fit.m_all);
  if (fit.pi0) j["pi0"] = to_json(*fit.pi0);
  return j;
}

Json to_json(const AlbFit& fit) {
  return Json{{"lambda", fit.lambda},        {"nu", fit.nu},
              {"ec_rows", fit.ec_rows},      {"b_hat", to_vec(fit.b_hat)},
              {"sigma_diag", to_vec(fit.sigma_diag)}, {"b_tilde", to_vec(fit.b_tilde)},
              {"borrowed", fit.borrowed}};
}

Json to_json(const DgpConfig& c) {
  return Json{{"mechanism", to_string(c.mechanism)},
              {"d", c.d},
              {"n_rct", c.n_rct},
              {"n_treated", c.n_treated},
              {"n_ec", c.n_ec},
              {"delta", c.delta},
              {"seed", c.seed},
              {"beta_seed", c.beta_seed},
              {"sigma_rct", c.sigma_rct},
              {"sigma_ec", c.sigma_ec},
              {"selection_slope", c.selection_slope}};
}

Json to_json(const ReplicationReport& r) {
  return Json{{"method", r.method},
              {"est", r.est_mean},
              {"bias_abs", r.bias_abs},
              {"sd", r.sd_empirical},
              {"sd_hat", r.sd_estimated_mean},
              {"mse", r.mse_empirical},
              {"mse_hat", r.mse_estimated_mean},
              {"n_ecs", r.n_ecs_modal},
              {"n_reps", r.n_reps},
              {"n_failed", r.n_failed},
              {"tau_true", r.tau_true},
              {"tau_source", r.tau_true_source}};
}

std::uint64_t config_hash(const Json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json Manifest::to_json() const {
  return Json{{"command", command},
              {"version", kVersion},
              {"config", config},
              {"config_hash", hex64(config_hash(config))},
              {"seeds", seeds},
              {"outputs", outputs}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace ecb
