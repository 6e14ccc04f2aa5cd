#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecb/baselines.hpp"
#include "ecb/borrowing.hpp"
#include "ecb/calibration.hpp"
#include "ecb/dataset.hpp"
#include "ecb/estimators.hpp"
#include "ecb/nuisance.hpp"
#include "ecb/simulation.hpp"

namespace ecb {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

Json to_json(const EstimateReport& r, bool with_phi = false);
Json to_json(const LinearFit& fit);
Json to_json(const LogisticFit& fit);
Json to_json(const ColumnScaling& s);
Json to_json(const BorrowResult& r);
Json to_json(const BiasFit& fit);
Json to_json(const AlbFit& fit);
Json to_json(const DgpConfig& c);
Json to_json(const ReplicationReport& r);

LinearFit linear_fit_from_json(const Json& j);
EstimateReport report_from_json(const Json& j);

/// FNV-1a of the compact dump; stable across runs for identical configs.
std::uint64_t config_hash(const Json& config);
std::string hex64(std::uint64_t v);

struct Manifest {
  std::string command;
  Json config = Json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;

  Json to_json() const;
};

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace ecb
