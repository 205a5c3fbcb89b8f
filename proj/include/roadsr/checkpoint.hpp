#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadsr/downstream.hpp"
#include "roadsr/srp_model.hpp"

namespace roadsr {

/// Binary weight file: "RSRPCKPT", u32 version, length-prefixed JSON metadata,
/// then named row-major little-endian f64 tensors.
struct TensorArchive {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, MatrixXd>> tensors;

  const MatrixXd& get(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(std::string name, MatrixXd m) { tensors.emplace_back(std::move(name), std::move(m)); }
};

void write_archive(const TensorArchive& a, std::ostream& os);
TensorArchive read_archive(std::istream& is);
void save_archive(const TensorArchive& a, const std::string& path);
TensorArchive load_archive(const std::string& path);

/// Tensors are stored under SrpParams::tensors() names with an "srp." prefix;
/// the config goes into meta["srp_config"].
void put_srp(TensorArchive& a, const SrpParams& p, const SrpConfig& cfg);
SrpParams get_srp(const TensorArchive& a, SrpConfig* cfg_out = nullptr);

void put_head(TensorArchive& a, const std::string& prefix, const SoftmaxHead& h);
SoftmaxHead get_head(const TensorArchive& a, const std::string& prefix);

nlohmann::ordered_json srp_config_json(const SrpConfig& cfg);
SrpConfig srp_config_from_json(const nlohmann::ordered_json& j);

}  // namespace roadsr
